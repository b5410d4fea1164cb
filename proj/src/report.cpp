#include "triplex/report.hpp"

#include "triplex/error.hpp"

namespace triplex {

Json SensorRecord::to_json() const { return Json{{"seq", seq}, {"t_ms", t_ms}, {"value", value}}; }

std::string SensorRecord::to_payload() const { return to_json().dump(); }

SensorRecord SensorRecord::from_json(const Json& j) {
  if (!j.is_object()) throw InvalidSignal("sensor record must be an object");
  auto seq = j.find("seq");
  auto t = j.find("t_ms");
  auto v = j.find("value");
  if (seq == j.end() || !seq->is_number_integer() || t == j.end() || !t->is_number_integer() ||
      v == j.end() || !v->is_number()) {
    throw InvalidSignal("sensor record needs integer seq, integer t_ms and numeric value");
  }
  return {seq->get<std::int64_t>(), t->get<std::int64_t>(), v->get<double>()};
}

SensorRecord SensorRecord::from_payload(std::string_view text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InvalidSignal("sensor payload is not valid JSON");
  return from_json(j);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Monolith:
      return "monolith";
    case Mode::Flow:
      return "flow";
    case Mode::Faas:
      return "faas";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "monolith") return Mode::Monolith;
  if (text == "flow") return Mode::Flow;
  if (text == "faas") return Mode::Faas;
  throw InvalidConfig("unknown mode '" + std::string(text) + "' (monolith|flow|faas)");
}

namespace {
Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
std::optional<double> optional_from(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}
}  // namespace

Json metrics_to_json(const hrv::HrvMetrics& m) {
  return Json{{"bpm", m.bpm},
              {"ibi_ms", m.ibi_ms},
              {"sdnn_ms", m.sdnn_ms},
              {"sdsd_ms", optional_number(m.sdsd_ms)},
              {"rmssd_ms", optional_number(m.rmssd_ms)},
              {"pnn20", optional_number(m.pnn20)},
              {"pnn50", optional_number(m.pnn50)},
              {"mad_ms", m.mad_ms},
              {"beat_count", m.beat_count},
              {"window_span_ms", m.window_span_ms}};
}

hrv::HrvMetrics metrics_from_json(const Json& j) {
  hrv::HrvMetrics m;
  m.bpm = j.at("bpm").get<double>();
  m.ibi_ms = j.at("ibi_ms").get<double>();
  m.sdnn_ms = j.at("sdnn_ms").get<double>();
  m.sdsd_ms = optional_from(j, "sdsd_ms");
  m.rmssd_ms = optional_from(j, "rmssd_ms");
  m.pnn20 = optional_from(j, "pnn20");
  m.pnn50 = optional_from(j, "pnn50");
  m.mad_ms = j.at("mad_ms").get<double>();
  m.beat_count = j.at("beat_count").get<std::int64_t>();
  m.window_span_ms = j.at("window_span_ms").get<double>();
  return m;
}

Json MetricsReport::to_json() const {
  Json j{{"mode", mode},
         {"ts_ms", ts_ms},
         {"status", status},
         {"window_first_seq", window_first_seq},
         {"window_last_seq", window_last_seq},
         {"window_samples", window_samples},
         {"flags", flags}};
  if (!detail.empty()) j["detail"] = detail;
  const Json mj = metrics ? metrics_to_json(*metrics) : Json(nullptr);
  for (const char* key : {"bpm", "ibi_ms", "sdnn_ms", "sdsd_ms", "rmssd_ms", "pnn20", "pnn50", "mad_ms",
                          "beat_count", "window_span_ms"}) {
    j[key] = metrics ? mj.at(key) : Json(nullptr);
  }
  return j;
}

MetricsReport MetricsReport::from_json(const Json& j) {
  MetricsReport r;
  r.mode = j.at("mode").get<std::string>();
  r.ts_ms = j.at("ts_ms").get<std::int64_t>();
  r.status = j.at("status").get<std::string>();
  r.detail = j.value("detail", "");
  r.flags = j.at("flags").get<std::vector<std::string>>();
  r.window_first_seq = j.at("window_first_seq").get<std::int64_t>();
  r.window_last_seq = j.at("window_last_seq").get<std::int64_t>();
  r.window_samples = j.at("window_samples").get<std::int64_t>();
  if (!j.at("bpm").is_null()) r.metrics = metrics_from_json(j);
  return r;
}

MetricsReport analyze_window(const std::vector<Json>& records, const hrv::AnalysisConfig& cfg,
                             double sample_rate_hz, Mode mode) {
  MetricsReport r;
  r.mode = to_string(mode);
  hrv::Signal sig;
  sig.sample_rate_hz = sample_rate_hz;
  sig.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SensorRecord rec = SensorRecord::from_json(records[i]);
    if (i == 0) {
      r.window_first_seq = rec.seq;
      sig.start_time_ms = rec.t_ms;
    }
    r.window_last_seq = rec.seq;
    r.ts_ms = rec.t_ms;
    sig.samples.push_back(rec.value);
  }
  r.window_samples = static_cast<std::int64_t>(sig.samples.size());
  try {
    r.metrics = hrv::analyze(sig, cfg);
    r.flags = hrv::abnormality_flags(*r.metrics, cfg);
  } catch (const InvalidSignal& e) {
    r.status = kStatusInsufficient;
    r.detail = e.what();
  } catch (const InsufficientBeats& e) {
    r.status = kStatusInsufficient;
    r.detail = e.what();
  }
  return r;
}

MetricsReport analyze_documents(const std::vector<store::Document>& docs, const hrv::AnalysisConfig& cfg,
                                double sample_rate_hz, Mode mode) {
  std::vector<Json> bodies;
  bodies.reserve(docs.size());
  for (const auto& d : docs) bodies.push_back(d.body);
  return analyze_window(bodies, cfg, sample_rate_hz, mode);
}

}  // namespace triplex
