// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "flow_corpus.hpp"
#include "hrv_oracle.hpp"
#include "packet_gen.hpp"
#include "store_oracle.hpp"
#include "triplex/app.hpp"
#include "triplex/error.hpp"
#include "triplex/faas.hpp"
#include "triplex/flow.hpp"
#include "triplex/hrv.hpp"
#include "triplex/mqtt/broker.hpp"
#include "triplex/mqtt/codec.hpp"
#include "triplex/store.hpp"

using namespace triplex;
using namespace std::chrono_literals;

namespace {

const std::string kRoot = TRIPLEX_SOURCE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  Outcome& o;
  void operator()(bool cond, const std::string& what) {
    if (!cond && o.pass) {
      o.pass = false;
      o.detail = what;
    }
  }
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

app::RunConfig pipeline_config() {
  app::RunConfig cfg;
  cfg.broker = {"127.0.0.1", 0};
  cfg.flow_file = kRoot + "/flows/health_monitor.json";
  cfg.speedup = 0;
  return cfg;
}

hrv::RRSeries accepted_series(const std::vector<double>& v) {
  hrv::RRSeries rr;
  rr.intervals_ms = v;
  rr.accepted.assign(v.size(), true);
  return rr;
}

bool opt_close(const std::optional<double>& a, const std::optional<double>& b, double tol) {
  if (a.has_value() != b.has_value()) return false;
  return !a || oracle::rel_close(*a, *b, tol);
}

// 1. compute_metrics against the brute-force oracle on 1000 random series.
Outcome metric_oracle() {
  Outcome o;
  Check check{o};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1000);
  std::uniform_int_distribution<int> len(2, 500);
  std::uniform_real_distribution<double> iv(300.0, 2000.0);
  constexpr double tol = 1e-9;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v) x = iv(rng);
    const auto got = hrv::compute_metrics(accepted_series(v));
    const auto want = oracle::metrics(v);
    const std::string at = "series " + std::to_string(t) + ": ";
    check(oracle::rel_close(got.bpm, want.bpm, tol), at + "bpm");
    check(oracle::rel_close(got.ibi_ms, want.ibi, tol), at + "ibi");
    check(oracle::rel_close(got.sdnn_ms, want.sdnn, tol), at + "sdnn");
    check(opt_close(got.sdsd_ms, want.sdsd, tol), at + "sdsd");
    check(opt_close(got.rmssd_ms, want.rmssd, tol), at + "rmssd");
    check(opt_close(got.pnn20, want.pnn20, tol), at + "pnn20");
    check(opt_close(got.pnn50, want.pnn50, tol), at + "pnn50");
    check(oracle::rel_close(got.mad_ms, want.mad, tol), at + "mad");
  }
  const double s = elapsed_s(t0);
  check(s < 10.0, "runtime " + std::to_string(s) + " s");
  if (o.pass) o.detail = "1000 series, 8 metrics within 1e-9, " + std::to_string(s) + " s";
  return o;
}

// 2. Worked example RR [800, 820, 790, 810].
Outcome worked_example() {
  Outcome o;
  Check check{o};
  const auto m = hrv::compute_metrics(accepted_series({800, 820, 790, 810}));
  auto near = [&](double got, double want, const char* name) {
    check(std::fabs(got - want) <= 1e-9 * std::max(1.0, std::fabs(want)), name);
  };
  near(m.ibi_ms, 805.0, "ibi");
  near(m.bpm, 74.53416149068323, "bpm");
  near(m.sdnn_ms, 11.180339887498949, "sdnn");
  near(m.rmssd_ms.value_or(NAN), 23.804761428476166, "rmssd");
  near(m.sdsd_ms.value_or(NAN), 23.570226039551585, "sdsd");
  near(m.pnn20.value_or(NAN), 1.0 / 3.0, "pnn20");
  near(m.pnn50.value_or(NAN), 0.0, "pnn50");
  near(m.mad_ms, 10.0, "mad");
  if (o.pass) o.detail = "ibi 805, bpm 74.534, sdnn 11.1803, rmssd 23.8048, sdsd 23.5702, pnn20 1/3, pnn50 0, mad 10";
  return o;
}

// 3. Codec round-trip, fuzz and varint bijectivity.
Outcome codec() {
  using namespace triplex::mqtt;
  Outcome o;
  Check check{o};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000 && o.pass; ++i) {
    const Packet p = gen::packet(rng);
    const Bytes b = encode_packet(p);
    const auto d = decode_packet(b);
    check(d && d->packet == p && d->consumed == b.size(), std::string("round-trip of ") + packet_name(p));
  }
  int protocol_errors = 0;
  for (int i = 0; i < 100000 && o.pass; ++i) {
    Bytes b(rng() % 48);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    if (!b.empty() && rng() % 2) b[0] = static_cast<std::uint8_t>((rng() % 16) << 4 | (rng() % 4 == 0 ? rng() % 16 : 0));
    try {
      if (auto d = decode_packet(b)) check(d->consumed <= b.size(), "decoder consumed past buffer");
    } catch (const ProtocolError&) {
      ++protocol_errors;
    } catch (const std::exception& e) {
      check(false, std::string("fuzz raised non-protocol error: ") + e.what());
    }
  }
  Bytes buf;
  buf.reserve(4);
  for (std::uint32_t v = 0; v <= kMaxRemainingLength && o.pass; ++v) {
    buf.clear();
    encode_remaining_length(v, buf);
    const auto d = decode_remaining_length(buf);
    if (!d || d->value != v || d->length != buf.size()) check(false, "varint " + std::to_string(v));
  }
  const double s = elapsed_s(t0);
  check(s < 30.0, "runtime " + std::to_string(s) + " s");
  if (o.pass) {
    o.detail = "10000 round-trips, 100000 fuzz inputs (" + std::to_string(protocol_errors) +
               " protocol errors, 0 crashes), varint [0, 268435455] bijective, " + std::to_string(s) + " s";
  }
  return o;
}

// 4. 6000 qos-1 publishes with 10% PUBACK drop, zero loss after dedup.
Outcome delivery() {
  Outcome o;
  Check check{o};
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = pipeline_config();
  cfg.threshold = 6000;
  cfg.puback_drop = 0.10;
  cfg.fault_seed = 4;
  cfg.ack_timeout_ms = 20;
  cfg.max_attempts = 10;
  std::vector<double> samples(6000);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = std::sin(2.0 * M_PI * static_cast<double>(i) / 100.0);
  try {
    const auto res = app::run_mode(Mode::Monolith, cfg, &samples);
    const auto& r = res.final_report;
    check(res.published == 6000, "published " + std::to_string(res.published));
    check(r.window_samples == 6000 && r.window_first_seq == 1 && r.window_last_seq == 6000,
          "stored window " + std::to_string(r.window_first_seq) + ".." + std::to_string(r.window_last_seq) + " (" +
              std::to_string(r.window_samples) + " docs)");
    const double s = elapsed_s(t0);
    check(s < 60.0, "runtime " + std::to_string(s) + " s");
    if (o.pass) {
      o.detail = "6000 unique seqs stored, " + std::to_string(res.messages - 6000) + " duplicate deliveries removed, " +
                 std::to_string(s) + " s";
    }
  } catch (const std::exception& e) {
    check(false, e.what());
  }
  return o;
}

// 5. Capped window vs list oracle, and bound under concurrency.
Outcome capped_window() {
  Outcome o;
  Check check{o};
  std::mt19937_64 rng(5);
  store::DocStore s;
  const std::size_t threshold = 50;
  s.create_collection("c", threshold);
  oracle::CappedList ref{threshold};
  for (int op = 0; op < 10000 && o.pass; ++op) {
    const auto r = rng() % 100;
    if (r < 75) {
      const Json body{{"op", op}};
      check(s.insert("c", body) == ref.insert(body), "insert seq at op " + std::to_string(op));
    } else if (r < 97) {
      const auto all = s.get_all("c");
      bool same = all.size() == ref.items.size();
      auto it = ref.items.begin();
      for (std::size_t k = 0; same && k < all.size(); ++k, ++it) same = all[k].seq == it->first && all[k].body == it->second;
      check(same, "snapshot mismatch at op " + std::to_string(op));
    } else {
      check(s.delete_all("c") == ref.clear(), "delete_all count at op " + std::to_string(op));
    }
  }

  store::DocStore shared;
  shared.create_collection("hr", 100);
  std::atomic<bool> done{false};
  std::atomic<int> over{0};
  std::vector<std::thread> writers;
  for (int t = 0; t < 4; ++t) {
    writers.emplace_back([&] {
      for (int i = 0; i < 5000; ++i) shared.insert("hr", i);
    });
  }
  std::thread deleter([&] {
    for (int i = 0; i < 200; ++i) {
      shared.delete_all("hr");
      std::this_thread::sleep_for(50us);
    }
  });
  std::thread reader([&] {
    while (!done) {
      if (shared.count("hr") > 100 || shared.get_all("hr").size() > 100) ++over;
    }
  });
  for (auto& w : writers) w.join();
  deleter.join();
  done = true;
  reader.join();
  check(over == 0, std::to_string(over.load()) + " observations above threshold");
  if (o.pass) o.detail = "10000 ops match list oracle; concurrent stress never exceeded threshold";
  return o;
}

// 6. Timeout with a scaled 200 ms limit; 60 s default in config.
Outcome function_timeout() {
  Outcome o;
  Check check{o};
  faas::Services svc;
  svc.store = std::make_shared<store::DocStore>();
  faas::FunctionHost host(svc);
  faas::register_builtin_functions(host);
  host.register_function({"sleepy", 200, 128, [](const faas::EventEnvelope&, faas::FunctionContext&) -> Json {
                            std::this_thread::sleep_for(600ms);
                            return "late";
                          }});
  const auto r = host.invoke("sleepy", Json::object(), "acceptance");
  check(r.outcome == faas::Outcome::Timeout, "outcome " + faas::to_string(r.outcome));
  const auto after = host.invoke(faas::kStoreOps, Json{{"op", "insert"}, {"body", {{"seq", 1}}}}, "acceptance");
  check(after.outcome == faas::Outcome::Ok, "host not serviceable after timeout");
  check(host.descriptor(faas::kMetricsCalc).timeout_ms == 60000, "built-in default timeout");
  app::RunConfig cfg;
  check(cfg.function_timeout_ms == 60000, "RunConfig default timeout");
  app::apply_config_text(cfg, "function_timeout_ms = 60000\n");
  check(cfg.function_timeout_ms == 60000, "parsed timeout");
  if (o.pass) {
    o.detail = "200 ms limit -> timeout after " + std::to_string(static_cast<int>(r.duration_ms)) +
               " ms; next invocation ok; default 60000 ms";
  }
  return o;
}

// 7. Cross-architecture equivalence over the 70 s sample recording.
Outcome equivalence() {
  Outcome o;
  Check check{o};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto samples = hrv::load_signal_file(kRoot + "/data/sample_hr.csv");
    check(samples.size() >= 6000, "dataset shorter than 60 s");
    const auto cmp = app::compare_modes(pipeline_config(), samples);
    check(cmp.verdict == "EQUAL", "verdict " + cmp.verdict + " " + cmp.diverged_mode + " " + cmp.diverged_field);
    for (const auto& r : cmp.runs) {
      check(r.final_report.status == kStatusOk, to_string(r.mode) + " status " + r.final_report.status);
      check(r.final_report.window_first_seq == cmp.runs[0].final_report.window_first_seq &&
                r.final_report.window_last_seq == cmp.runs[0].final_report.window_last_seq,
            to_string(r.mode) + " window range differs");
    }
    const double s = elapsed_s(t0);
    check(s < 120.0, "runtime " + std::to_string(s) + " s");
    if (o.pass) {
      const auto& f = cmp.runs[0].final_report;
      char buf[200];
      std::snprintf(buf, sizeof buf, "EQUAL over %zu samples; window %lld..%lld, bpm %.6f; %.1f s", samples.size(),
                    static_cast<long long>(f.window_first_seq), static_cast<long long>(f.window_last_seq),
                    f.metrics->bpm, s);
      o.detail = buf;
    }
  } catch (const std::exception& e) {
    check(false, e.what());
  }
  return o;
}

// 8. Malformed corpus yields located diagnostics; shipped flows parse and run.
Outcome flow_parser() {
  Outcome o;
  Check check{o};
  const auto dir = std::filesystem::temp_directory_path() / "triplex_flow_corpus";
  std::filesystem::create_directories(dir);
  const auto cases = corpus::malformed_flows();
  check(cases.size() >= 50, "corpus too small");
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto path = (dir / ("case_" + std::to_string(i) + ".json")).string();
    std::ofstream(path, std::ios::binary) << cases[i].text;
    try {
      flow::load_flow_file(path);
      check(false, "case " + std::to_string(i) + " parsed");
    } catch (const ParseError& e) {
      check(e.location().find(cases[i].location) != std::string::npos,
            "case " + std::to_string(i) + " unlocated: " + e.what());
    } catch (const std::exception& e) {
      check(false, "case " + std::to_string(i) + " raised " + e.what());
    }
  }
  std::filesystem::remove_all(dir);

  try {
    auto broker = mqtt::Broker::start({"127.0.0.1", 0});
    flow::FlowRuntime rt;
    rt.broker = broker->address();
    rt.store = std::make_shared<store::DocStore>();
    std::atomic<int> reports{0};
    std::atomic<int> debug{0};
    rt.report_sink = [&](const MetricsReport&) { ++reports; };
    rt.debug_sink = [&](const std::string&, const Json&) { ++debug; };
    auto h = flow::run_flow(flow::load_flow_file(kRoot + "/flows/health_monitor.json"), rt);
    auto pub = mqtt::ClientSession::connect(broker->address(), "acceptance", 30);
    for (int i = 1; i <= 500; ++i) pub->publish("hr/patient1", SensorRecord{i, i * 10, 0.0}.to_payload(), 1);
    for (int i = 0; i < 300 && rt.store->high_water("hr").value_or(0) < 500; ++i) std::this_thread::sleep_for(10ms);
    h->inject("tick");
    h->inject("clear");
    h->wait_idle(5s);
    h->stop();
    check(reports >= 1, "analysis flow produced no report");
    check(debug == 1, "debug flow did not log the removed count");
    check(rt.store->count("hr") == 0, "delete-all flow left documents");
    for (const char* f : {"clear_store.json", "ingest.json", "analyze.json"}) {
      flow::load_flow_file(kRoot + "/flows/" + f);
    }
  } catch (const std::exception& e) {
    check(false, std::string("shipped flows: ") + e.what());
  }
  if (o.pass) o.detail = std::to_string(cases.size()) + " malformed files located; shipped flows parse and run";
  return o;
}

// 9. 1 Hz sinusoid at 100 Hz for 30 s reports 60 +- 1 bpm in every mode.
Outcome synthetic_end_to_end() {
  Outcome o;
  Check check{o};
  std::vector<double> samples(3000);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = std::sin(2.0 * M_PI * static_cast<double>(i) / 100.0);
  std::string detail;
  for (Mode m : {Mode::Monolith, Mode::Flow, Mode::Faas}) {
    try {
      const auto res = app::run_mode(m, pipeline_config(), &samples);
      const auto& r = res.final_report;
      check(r.status == kStatusOk, to_string(m) + " status " + r.status + " " + r.detail);
      if (r.metrics) {
        check(std::fabs(r.metrics->bpm - 60.0) <= 1.0, to_string(m) + " bpm " + std::to_string(r.metrics->bpm));
        detail += to_string(m) + " " + std::to_string(r.metrics->bpm) + " bpm; ";
      }
    } catch (const std::exception& e) {
      check(false, to_string(m) + ": " + e.what());
    }
  }
  if (o.pass) o.detail = detail;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle", metric_oracle},
      {2, "worked example", worked_example},
      {3, "codec round-trip/fuzz/varint", codec},
      {4, "qos-1 delivery under ack drop", delivery},
      {5, "capped window", capped_window},
      {6, "function timeout", function_timeout},
      {7, "cross-architecture equivalence", equivalence},
      {8, "flow parser totality", flow_parser},
      {9, "synthetic end-to-end", synthetic_end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("uncaught: ") + e.what()};
    }
    if (!out.pass) ++failed;
    std::printf("[%s] criterion %d %s: %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
