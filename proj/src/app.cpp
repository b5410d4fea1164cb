#include "triplex/app.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "triplex/emulator.hpp"
#include "triplex/error.hpp"
#include "triplex/faas.hpp"
#include "triplex/flow.hpp"
#include "triplex/monolith.hpp"
#include "triplex/mqtt/broker.hpp"
#include "triplex/mqtt/client.hpp"

namespace triplex::app {

using namespace std::chrono_literals;
using Json = nlohmann::json;

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) {
    throw InvalidConfig(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw InvalidConfig(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidConfig(key + ": expected a boolean, got '" + v + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

/// Waits until the collection has accepted sensor seq `last_seq`.
void wait_for_drain(const store::DocStore& store, const std::string& coll, std::int64_t last_seq,
                    std::int64_t timeout_ms) {
  if (last_seq <= 0) return;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (true) {
    const auto hw = store.high_water(coll);
    if (hw && *hw >= last_seq) return;
    if (std::chrono::steady_clock::now() > deadline) {
      throw Error("pipeline did not store seq " + std::to_string(last_seq) + " within " +
                  std::to_string(timeout_ms) + " ms (highest stored: " + (hw ? std::to_string(*hw) : "none") +
                  ")");
    }
    std::this_thread::sleep_for(2ms);
  }
}

MetricsReport report_from_invocation(const faas::InvocationRecord& rec) {
  if (rec.outcome == faas::Outcome::Ok) return MetricsReport::from_json(rec.result);
  if (rec.result.is_object() && rec.result.contains("status")) return MetricsReport::from_json(rec.result);
  throw Error("metrics_calc " + faas::to_string(rec.outcome) + ": " + rec.error);
}

std::string collection_of_flow(const flow::FlowGraph& g, const std::string& fallback) {
  for (const auto& n : g.nodes) {
    if (n.type == flow::NodeType::StoreInsert) return n.config.value("collection", std::string("hr"));
  }
  return fallback;
}

bool close_enough(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

std::ostream& open_report(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty()) return fallback;
  file.open(path, std::ios::trunc);
  if (!file) throw InvalidConfig("cannot write report file '" + path + "'");
  return file;
}

}  // namespace

void RunConfig::validate() const {
  analysis.validate();
  if (threshold == 0) throw InvalidConfig("threshold must be >= 1");
  if (decimation < 1) throw InvalidConfig("decimation must be >= 1");
  if (!(rate_hz > 0.0)) throw InvalidConfig("rate must be > 0");
  if (!(speedup >= 0.0)) throw InvalidConfig("speedup must be >= 0");
  if (qos > 1) throw InvalidConfig("qos must be 0 or 1");
  if (ack_timeout_ms <= 0 || max_attempts < 1) throw InvalidConfig("ack timeout and attempts must be positive");
  if (!(puback_drop >= 0.0 && puback_drop < 1.0)) throw InvalidConfig("puback_drop must be in [0, 1)");
  if (function_timeout_ms <= 0) throw InvalidConfig("function_timeout_ms must be > 0");
  if (topic.empty() || !mqtt::is_valid_topic_name(topic)) throw InvalidConfig("invalid topic '" + topic + "'");
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "broker") c.broker = mqtt::Address::parse(v);
  else if (key == "embedded_broker") c.embedded_broker = to_bool(key, v);
  else if (key == "topic") c.topic = v;
  else if (key == "collection") c.collection = v;
  else if (key == "threshold") c.threshold = static_cast<std::size_t>(std::max<std::int64_t>(0, to_int(key, v)));
  else if (key == "decimation") c.decimation = to_int(key, v);
  else if (key == "report") c.report_path = v;
  else if (key == "data") c.data_path = v;
  else if (key == "rate") c.rate_hz = to_double(key, v);
  else if (key == "speedup") c.speedup = to_double(key, v);
  else if (key == "flow_file") c.flow_file = v;
  else if (key == "qos") c.qos = static_cast<std::uint8_t>(std::clamp<std::int64_t>(to_int(key, v), 0, 255));
  else if (key == "ack_timeout_ms") c.ack_timeout_ms = to_int(key, v);
  else if (key == "max_attempts") c.max_attempts = static_cast<int>(to_int(key, v));
  else if (key == "puback_drop") c.puback_drop = to_double(key, v);
  else if (key == "fault_seed") c.fault_seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "function_timeout_ms") c.function_timeout_ms = to_int(key, v);
  else if (key == "function_memory_mb") c.function_memory_mb = static_cast<int>(to_int(key, v));
  else if (key == "run_log") c.run_log_path = v;
  else if (key == "drain_timeout_ms") c.drain_timeout_ms = to_int(key, v);
  else if (key == "min_bpm") c.analysis.min_bpm = to_double(key, v);
  else if (key == "max_bpm") c.analysis.max_bpm = to_double(key, v);
  else if (key == "ma_window_s") c.analysis.ma_window_s = to_double(key, v);
  else if (key == "rel_rise") c.analysis.rel_rise = to_double(key, v);
  else if (key == "rr_outlier_band") c.analysis.rr_outlier_band = to_double(key, v);
  else if (key == "outlier_rejection") c.analysis.outlier_rejection = to_bool(key, v);
  else throw InvalidConfig("unknown setting '" + key + "'");
}

void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfig(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

// ---------------------------------------------------------------------------

RunResult run_mode(Mode mode, const RunConfig& cfg, const std::vector<double>* samples, RunHooks hooks) {
  cfg.validate();
  const hrv::AnalysisConfig analysis = hooks.analysis_override.value_or(cfg.analysis);
  analysis.validate();

  RunResult res;
  res.mode = mode;
  const auto t0 = std::chrono::steady_clock::now();

  std::mutex report_mu;
  auto sink = [&](const MetricsReport& r) {
    std::lock_guard lk(report_mu);
    res.reports.push_back(r);
    if (hooks.on_report) hooks.on_report(r);
  };

  std::unique_ptr<mqtt::Broker> broker;
  mqtt::Address addr = cfg.broker;
  if (cfg.embedded_broker) {
    mqtt::BrokerConfig bc;
    bc.bind_address = addr.host == "localhost" ? "127.0.0.1" : addr.host;
    bc.port = addr.port;
    bc.faults = {cfg.puback_drop, cfg.fault_seed};
    broker = mqtt::Broker::start(bc);
    addr.port = broker->port();
  }
  mqtt::ClientOptions copts;
  copts.ack_timeout = std::chrono::milliseconds(cfg.ack_timeout_ms);
  copts.max_attempts = cfg.max_attempts;

  auto store = std::make_shared<store::DocStore>();
  std::string collection = cfg.collection;

  // Pipeline, per architecture.
  std::unique_ptr<monolith::StoreGateway> gateway;
  std::unique_ptr<monolith::MetricsCalculator> calculator;
  std::unique_ptr<monolith::MqttListener> listener;
  std::unique_ptr<flow::FlowHandle> flow_handle;
  std::unique_ptr<faas::FunctionHost> host;
  std::unique_ptr<faas::TriggerHandle> trigger;
  std::vector<std::string> tick_nodes;

  switch (mode) {
    case Mode::Monolith: {
      gateway = std::make_unique<monolith::StoreGateway>(store, collection, cfg.threshold);
      calculator = std::make_unique<monolith::MetricsCalculator>(analysis, cfg.rate_hz);
      listener = std::make_unique<monolith::MqttListener>(*gateway, *calculator, cfg.decimation, sink);
      listener->connect(addr, cfg.topic, cfg.qos, copts);
      break;
    }
    case Mode::Flow: {
      const flow::FlowGraph graph = flow::load_flow_file(cfg.flow_file);
      bool subscribed = false;
      for (const auto& n : graph.nodes) {
        if (n.type == flow::NodeType::MqttIn && mqtt::topic_matches(n.config["topic"].get<std::string>(), cfg.topic)) {
          subscribed = true;
        }
        if (n.type == flow::NodeType::IntervalInject) tick_nodes.push_back(n.id);
      }
      if (!subscribed) {
        throw InvalidConfig("flow file '" + cfg.flow_file + "' has no mqtt-in node subscribed to '" + cfg.topic + "'");
      }
      collection = collection_of_flow(graph, collection);
      flow::FlowRuntime rt;
      rt.broker = addr;
      rt.client_options = copts;
      rt.store = store;
      rt.default_threshold = cfg.threshold;
      rt.analysis = analysis;
      rt.sample_rate_hz = cfg.rate_hz;
      rt.report_sink = sink;
      flow_handle = flow::run_flow(graph, rt);
      break;
    }
    case Mode::Faas: {
      faas::Services services{store, collection, analysis, cfg.rate_hz};
      host = std::make_unique<faas::FunctionHost>(services, faas::HostOptions{cfg.run_log_path});
      faas::register_builtin_functions(*host, cfg.threshold, cfg.function_timeout_ms, cfg.function_memory_mb);
      host->set_observer([&](const faas::InvocationRecord& rec) {
        if (rec.function != faas::kMetricsCalc) return;
        try {
          sink(report_from_invocation(rec));
        } catch (const Error&) {
        }
      });
      faas::TriggerOptions topts;
      topts.client = copts;
      topts.qos = cfg.qos;
      trigger = faas::bind_mqtt_trigger(*host, addr, cfg.topic, faas::kSubscriber, cfg.decimation, topts);
      break;
    }
  }

  auto shutdown = [&] {
    if (listener) listener->stop();
    if (flow_handle) flow_handle->stop();
    if (trigger) trigger->stop();
    if (broker) broker->stop();
  };

  try {
    if (samples != nullptr && !samples->empty()) {
      auto publisher = mqtt::ClientSession::connect(addr, "emulator", 30, copts);
      emulator::ReplayConfig rc;
      rc.sample_rate_hz = cfg.rate_hz;
      rc.speedup = cfg.speedup;
      rc.topic = cfg.topic;
      rc.qos = cfg.qos;
      const auto rep = emulator::replay_samples(*samples, rc, emulator::client_publisher(*publisher), hooks.stop);
      res.published = rep.published_count;
      publisher->disconnect();
      if (cfg.qos == 1) wait_for_drain(*store, collection, res.published, cfg.drain_timeout_ms);
    } else if (hooks.stop != nullptr) {
      while (!hooks.stop->load()) std::this_thread::sleep_for(50ms);
    }

    // Final analysis tick over the retained window.
    switch (mode) {
      case Mode::Monolith:
        res.final_report = listener->analyze_now();
        break;
      case Mode::Flow: {
        std::size_t before = 0;
        {
          std::lock_guard lk(report_mu);
          before = res.reports.size();
        }
        flow_handle->wait_idle(std::chrono::milliseconds(cfg.drain_timeout_ms));
        for (const auto& id : tick_nodes) flow_handle->inject(id);
        flow_handle->wait_idle(std::chrono::milliseconds(cfg.drain_timeout_ms));
        std::lock_guard lk(report_mu);
        if (res.reports.size() == before) throw Error("flow produced no report on the final tick");
        res.final_report = res.reports.back();
        break;
      }
      case Mode::Faas:
        res.final_report = report_from_invocation(host->invoke(faas::kMetricsCalc, Json::object(), "final-tick"));
        break;
    }
  } catch (...) {
    shutdown();
    throw;
  }
  shutdown();

  switch (mode) {
    case Mode::Monolith:
      res.messages = listener->messages_received();
      res.invocations = listener->analyses();
      break;
    case Mode::Flow: {
      const auto st = flow_handle->stats();
      res.messages = st.mqtt_messages;
      res.invocations = st.messages_processed;
      break;
    }
    case Mode::Faas:
      res.messages = trigger->delivered();
      res.invocations = host->invocation_count(faas::kStoreOps) + host->invocation_count(faas::kMetricsCalc) +
                        host->invocation_count(faas::kSubscriber);
      break;
  }
  res.wall_ms = elapsed_ms(t0);
  return res;
}

std::optional<std::string> first_difference(const MetricsReport& a, const MetricsReport& b, double tol) {
  if (a.status != b.status) return "status";
  if (a.window_first_seq != b.window_first_seq) return "window_first_seq";
  if (a.window_last_seq != b.window_last_seq) return "window_last_seq";
  if (a.window_samples != b.window_samples) return "window_samples";
  if (a.metrics.has_value() != b.metrics.has_value()) return "metrics";
  if (a.metrics) {
    const auto& x = *a.metrics;
    const auto& y = *b.metrics;
    auto num = [&](const char* name, double p, double q) -> std::optional<std::string> {
      if (!close_enough(p, q, tol)) return std::string(name);
      return std::nullopt;
    };
    auto opt = [&](const char* name, const std::optional<double>& p,
                   const std::optional<double>& q) -> std::optional<std::string> {
      if (p.has_value() != q.has_value()) return std::string(name);
      if (p && !close_enough(*p, *q, tol)) return std::string(name);
      return std::nullopt;
    };
    for (auto d : {num("bpm", x.bpm, y.bpm), num("ibi_ms", x.ibi_ms, y.ibi_ms), num("sdnn_ms", x.sdnn_ms, y.sdnn_ms),
                   opt("sdsd_ms", x.sdsd_ms, y.sdsd_ms), opt("rmssd_ms", x.rmssd_ms, y.rmssd_ms),
                   opt("pnn20", x.pnn20, y.pnn20), opt("pnn50", x.pnn50, y.pnn50), num("mad_ms", x.mad_ms, y.mad_ms),
                   num("window_span_ms", x.window_span_ms, y.window_span_ms)}) {
      if (d) return d;
    }
    if (x.beat_count != y.beat_count) return "beat_count";
  }
  if (a.flags != b.flags) return "flags";
  return std::nullopt;
}

Json ComparisonReport::to_json() const {
  Json modes = Json::array();
  for (const auto& r : runs) {
    modes.push_back(Json{{"mode", to_string(r.mode)},
                         {"wall_ms", r.wall_ms},
                         {"published", r.published},
                         {"messages", r.messages},
                         {"invocations", r.invocations},
                         {"reports", r.reports.size()},
                         {"final", r.final_report.to_json()}});
  }
  Json j{{"verdict", verdict}, {"modes", modes}};
  if (!diverged_field.empty()) {
    j["diverged_mode"] = diverged_mode;
    j["diverged_field"] = diverged_field;
  }
  return j;
}

ComparisonReport compare_modes(const RunConfig& cfg, const std::vector<double>& samples, CompareOptions opts) {
  ComparisonReport cmp;
  for (Mode m : {Mode::Monolith, Mode::Flow, Mode::Faas}) {
    RunHooks hooks;
    if (opts.tamper_mode == m) {
      hrv::AnalysisConfig tampered = cfg.analysis;
      tampered.outlier_rejection = false;
      hooks.analysis_override = tampered;
    }
    cmp.runs.push_back(run_mode(m, cfg, &samples, hooks));
  }
  const MetricsReport& ref = cmp.runs.front().final_report;
  for (std::size_t i = 1; i < cmp.runs.size(); ++i) {
    if (auto field = first_difference(ref, cmp.runs[i].final_report, opts.tolerance)) {
      cmp.verdict = "DIVERGED";
      cmp.diverged_mode = to_string(cmp.runs[i].mode);
      cmp.diverged_field = *field;
      return cmp;
    }
  }
  const bool all_empty = std::all_of(cmp.runs.begin(), cmp.runs.end(),
                                     [](const RunResult& r) { return r.final_report.status != kStatusOk; });
  cmp.verdict = all_empty ? "EQUAL-EMPTY" : "EQUAL";
  return cmp;
}

// --- subcommands -------------------------------------------------------------

int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.analysis.validate();
    if (cfg.data_path.empty()) throw InvalidConfig("analyze needs --data");
    hrv::Signal sig{hrv::load_signal_file(cfg.data_path), cfg.rate_hz, 0};
    if (!(cfg.rate_hz > 0.0)) throw InvalidConfig("rate must be > 0");
    MetricsReport r;
    r.mode = "offline";
    r.metrics = hrv::analyze(sig, cfg.analysis);
    r.flags = hrv::abnormality_flags(*r.metrics, cfg.analysis);
    const auto n = static_cast<std::int64_t>(sig.samples.size());
    r.window_first_seq = 1;
    r.window_last_seq = n;
    r.window_samples = n;
    r.ts_ms = std::llround(static_cast<double>(n - 1) * 1000.0 / cfg.rate_hz);
    std::ofstream file;
    open_report(cfg.report_path, file, out) << r.to_line() << '\n';
    if (!cfg.report_path.empty()) out << r.to_line() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "analyze: " << e.what() << '\n';
    return kExitConfig;
  }
}

int cmd_broker(const RunConfig& cfg, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop) {
  std::unique_ptr<mqtt::Broker> broker;
  try {
    mqtt::BrokerConfig bc;
    bc.bind_address = cfg.broker.host == "localhost" ? "127.0.0.1" : cfg.broker.host;
    bc.port = cfg.broker.port;
    bc.faults = {cfg.puback_drop, cfg.fault_seed};
    broker = mqtt::Broker::start(bc);
  } catch (const StartupError& e) {
    err << "broker: " << e.what() << '\n';
    return kExitRuntime;
  }
  out << "broker listening on " << broker->address().to_string() << std::endl;
  while (!stop.load()) std::this_thread::sleep_for(100ms);
  broker->stop();
  const auto st = broker->stats();
  out << "broker stopped: " << st.publishes_received << " publishes, " << st.deliveries << " deliveries\n";
  return kExitOk;
}

int cmd_emulate(const RunConfig& cfg, bool loop, std::ostream& out, std::ostream& err,
                const std::atomic<bool>& stop) {
  emulator::ReplayConfig rc;
  rc.data_path = cfg.data_path;
  rc.sample_rate_hz = cfg.rate_hz;
  rc.speedup = cfg.speedup;
  rc.topic = cfg.topic;
  rc.qos = cfg.qos;
  rc.loop = loop;
  try {
    rc.validate();
    if (rc.data_path.empty()) throw InvalidConfig("emulate needs --data");
  } catch (const Error& e) {
    err << "emulate: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    mqtt::ClientOptions copts;
    copts.ack_timeout = std::chrono::milliseconds(cfg.ack_timeout_ms);
    copts.max_attempts = cfg.max_attempts;
    auto session = mqtt::ClientSession::connect(cfg.broker, "emulator", 30, copts);
    const auto rep = emulator::replay(rc, emulator::client_publisher(*session), &stop);
    session->disconnect();
    out << Json{{"published_count", rep.published_count}, {"duration_ms", rep.duration_ms}}.dump() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "emulate: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_run(Mode mode, const RunConfig& cfg, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop) {
  std::vector<double> samples;
  std::ofstream file;
  std::ostream* sink = &out;
  try {
    cfg.validate();
    if (mode == Mode::Flow) flow::load_flow_file(cfg.flow_file);
    if (!cfg.data_path.empty()) samples = hrv::load_signal_file(cfg.data_path);
    sink = &open_report(cfg.report_path, file, out);
  } catch (const Error& e) {
    err << "run: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    RunHooks hooks;
    std::mutex mu;
    hooks.on_report = [&](const MetricsReport& r) {
      std::lock_guard lk(mu);
      *sink << r.to_line() << '\n';
      sink->flush();
    };
    hooks.stop = &stop;
    const RunResult res = run_mode(mode, cfg, cfg.data_path.empty() ? nullptr : &samples, hooks);
    err << to_string(mode) << ": published " << res.published << ", received " << res.messages << ", "
        << res.reports.size() << " reports in " << std::llround(res.wall_ms) << " ms\n";
    return kExitOk;
  } catch (const InvalidConfig& e) {
    err << "run: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "run: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "run: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err, CompareOptions opts) {
  std::vector<double> samples;
  try {
    cfg.validate();
    flow::load_flow_file(cfg.flow_file);
    if (cfg.data_path.empty()) throw InvalidConfig("compare needs --data");
    samples = hrv::load_signal_file(cfg.data_path);
  } catch (const Error& e) {
    err << "compare: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const ComparisonReport cmp = compare_modes(cfg, samples, opts);
    const std::string text = cmp.to_json().dump(2);
    out << text << '\n';
    if (!cfg.report_path.empty()) {
      std::ofstream f(cfg.report_path, std::ios::trunc);
      f << text << '\n';
    }
    return cmp.verdict == "DIVERGED" ? kExitRuntime : kExitOk;
  } catch (const InvalidConfig& e) {
    err << "compare: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "compare: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace triplex::app
