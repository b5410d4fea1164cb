#include <gtest/gtest.h>

#include "triplex/error.hpp"
#include "triplex/report.hpp"

using namespace triplex;

TEST(SensorRecord, PayloadRoundTrip) {
  const SensorRecord r{42, 410, -0.125};
  const auto back = SensorRecord::from_payload(r.to_payload());
  EXPECT_EQ(back.seq, 42);
  EXPECT_EQ(back.t_ms, 410);
  EXPECT_EQ(back.value, -0.125);
  const Json j = Json::parse(r.to_payload());
  EXPECT_TRUE(j.contains("seq") && j.contains("t_ms") && j.contains("value"));
  EXPECT_EQ(j.size(), 3u);
}

TEST(SensorRecord, FieldOrderIrrelevant) {
  const auto r = SensorRecord::from_payload(R"({"value": 1.5, "t_ms": 20, "seq": 3})");
  EXPECT_EQ(r.seq, 3);
  EXPECT_EQ(r.value, 1.5);
}

TEST(SensorRecord, Malformed) {
  EXPECT_THROW(SensorRecord::from_payload("nope"), InvalidSignal);
  EXPECT_THROW(SensorRecord::from_payload(R"({"seq": 1, "t_ms": 2})"), InvalidSignal);
  EXPECT_THROW(SensorRecord::from_payload(R"({"seq": "1", "t_ms": 2, "value": 1})"), InvalidSignal);
  EXPECT_THROW(SensorRecord::from_payload("[]"), InvalidSignal);
}

TEST(Mode, Names) {
  for (Mode m : {Mode::Monolith, Mode::Flow, Mode::Faas}) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_EQ(to_string(Mode::Faas), "faas");
  EXPECT_THROW(parse_mode("lambda"), InvalidConfig);
}

TEST(MetricsReport, JsonRoundTripAndSchema) {
  MetricsReport r;
  r.mode = "flow";
  r.ts_ms = 999;
  hrv::HrvMetrics m;
  m.bpm = 61;
  m.ibi_ms = 983.6;
  m.sdnn_ms = 12;
  m.rmssd_ms = 10;
  m.pnn20 = 0.1;
  m.pnn50 = 0;
  m.mad_ms = 5;
  m.beat_count = 31;
  m.window_span_ms = 29508;
  r.metrics = m;
  r.window_first_seq = 1;
  r.window_last_seq = 3000;
  r.window_samples = 3000;
  const Json j = r.to_json();
  EXPECT_TRUE(j["sdsd_ms"].is_null());
  for (const char* k : {"mode", "ts_ms", "status", "bpm", "ibi_ms", "sdnn_ms", "sdsd_ms", "rmssd_ms", "pnn20", "pnn50",
                        "mad_ms", "beat_count", "window_span_ms", "flags", "window_first_seq", "window_last_seq",
                        "window_samples"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  const auto back = MetricsReport::from_json(j);
  EXPECT_EQ(back.metrics, r.metrics);
  EXPECT_EQ(back.to_json(), j);
}

TEST(AnalyzeWindow, InsufficientAndOk) {
  std::vector<Json> recs;
  for (int i = 1; i <= 100; ++i) recs.push_back(SensorRecord{i, i * 10, 0.0}.to_json());
  const auto small = analyze_window(recs, {}, 100.0, Mode::Monolith);
  EXPECT_EQ(small.status, kStatusInsufficient);
  EXPECT_FALSE(small.metrics);
  EXPECT_EQ(small.window_first_seq, 1);
  EXPECT_EQ(small.window_last_seq, 100);
  EXPECT_EQ(small.ts_ms, 1000);
  EXPECT_FALSE(small.detail.empty());

  const auto empty = analyze_window({}, {}, 100.0, Mode::Faas);
  EXPECT_EQ(empty.status, kStatusInsufficient);
  EXPECT_EQ(empty.window_samples, 0);

  recs.clear();
  for (int i = 0; i < 3000; ++i) {
    recs.push_back(SensorRecord{i + 1, i * 10, std::sin(2 * M_PI * i / 100.0)}.to_json());
  }
  const auto ok = analyze_window(recs, {}, 100.0, Mode::Flow);
  ASSERT_EQ(ok.status, kStatusOk);
  EXPECT_NEAR(ok.metrics->bpm, 60.0, 1.0);
  EXPECT_TRUE(ok.flags.empty());
  EXPECT_EQ(ok.mode, "flow");
}
