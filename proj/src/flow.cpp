#include "triplex/flow.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "triplex/error.hpp"

namespace triplex::flow {

using namespace std::chrono_literals;

namespace {

struct TypeName {
  NodeType type;
  const char* name;
};

constexpr TypeName kTypeNames[] = {
    {NodeType::MqttIn, "mqtt-in"},
    {NodeType::StoreInsert, "store-insert"},
    {NodeType::StoreGetAll, "store-get-all"},
    {NodeType::StoreDeleteAll, "store-delete-all"},
    {NodeType::HrvAnalyze, "hrv-analyze"},
    {NodeType::IntervalInject, "interval-inject"},
    {NodeType::ManualInject, "manual-inject"},
    {NodeType::Debug, "debug"},
    {NodeType::Report, "report"},
};

std::string node_loc(const std::string& id) { return "node '" + id + "'"; }

std::string text_position(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Per-type config validation. Each checker throws ParseError located at the node.
void check_keys(const std::string& id, const Json& cfg, std::initializer_list<const char*> allowed) {
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      throw ParseError(node_loc(id), "unknown config key '" + it.key() + "'");
    }
  }
}

void want_string(const std::string& id, const Json& cfg, const char* key, bool required) {
  auto it = cfg.find(key);
  if (it == cfg.end()) {
    if (required) throw ParseError(node_loc(id), std::string("missing required config '") + key + "'");
    return;
  }
  if (!it->is_string() || it->get_ref<const std::string&>().empty()) {
    throw ParseError(node_loc(id), std::string("config '") + key + "' must be a non-empty string");
  }
}

void want_positive(const std::string& id, const Json& cfg, const char* key, bool required, bool integer) {
  auto it = cfg.find(key);
  if (it == cfg.end()) {
    if (required) throw ParseError(node_loc(id), std::string("missing required config '") + key + "'");
    return;
  }
  const bool ok = integer ? (it->is_number_integer() && it->get<std::int64_t>() > 0)
                          : (it->is_number() && it->get<double>() > 0.0);
  if (!ok) {
    throw ParseError(node_loc(id), std::string("config '") + key + "' must be a positive " +
                                       (integer ? "integer" : "number"));
  }
}

void validate_config(const NodeSpec& n) {
  const Json& c = n.config;
  switch (n.type) {
    case NodeType::MqttIn: {
      check_keys(n.id, c, {"topic", "qos", "broker", "client_id"});
      want_string(n.id, c, "topic", true);
      if (!mqtt::is_valid_topic_filter(c["topic"].get<std::string>())) {
        throw ParseError(node_loc(n.id), "config 'topic' is not a valid topic filter");
      }
      if (auto q = c.find("qos"); q != c.end()) {
        if (!q->is_number_integer() || q->get<int>() < 0 || q->get<int>() > 1) {
          throw ParseError(node_loc(n.id), "config 'qos' must be 0 or 1");
        }
      }
      want_string(n.id, c, "client_id", false);
      want_string(n.id, c, "broker", false);
      if (c.contains("broker")) {
        try {
          mqtt::Address::parse(c["broker"].get<std::string>());
        } catch (const Error& e) {
          throw ParseError(node_loc(n.id), e.what());
        }
      }
      break;
    }
    case NodeType::StoreInsert:
      check_keys(n.id, c, {"collection", "dedup_key", "threshold"});
      want_string(n.id, c, "collection", false);
      if (auto d = c.find("dedup_key"); d != c.end() && !d->is_null()) want_string(n.id, c, "dedup_key", false);
      want_positive(n.id, c, "threshold", false, true);
      break;
    case NodeType::StoreGetAll:
    case NodeType::StoreDeleteAll:
      check_keys(n.id, c, {"collection"});
      want_string(n.id, c, "collection", false);
      break;
    case NodeType::HrvAnalyze:
      check_keys(n.id, c, {"sample_rate_hz"});
      want_positive(n.id, c, "sample_rate_hz", false, false);
      break;
    case NodeType::IntervalInject:
      check_keys(n.id, c, {"period_ms", "payload"});
      want_positive(n.id, c, "period_ms", true, true);
      break;
    case NodeType::ManualInject:
      check_keys(n.id, c, {"payload"});
      break;
    case NodeType::Debug:
      check_keys(n.id, c, {"name"});
      want_string(n.id, c, "name", false);
      break;
    case NodeType::Report:
      check_keys(n.id, c, {});
      break;
  }
}

std::int64_t now_ms() { return store::wall_clock_ms(); }

std::string collection_of(const NodeSpec& n) { return n.config.value("collection", std::string("hr")); }

}  // namespace

std::string to_string(NodeType t) {
  for (const auto& tn : kTypeNames) {
    if (tn.type == t) return tn.name;
  }
  return "?";
}

std::optional<NodeType> node_type_from_string(std::string_view s) {
  for (const auto& tn : kTypeNames) {
    if (s == tn.name) return tn.type;
  }
  return std::nullopt;
}

bool is_source(NodeType t) {
  return t == NodeType::MqttIn || t == NodeType::IntervalInject || t == NodeType::ManualInject;
}

bool is_sink_only(NodeType t) { return t == NodeType::Debug || t == NodeType::Report; }

const NodeSpec* FlowGraph::node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::vector<std::string> FlowGraph::targets(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& w : wires) {
    if (w.from == id) out.push_back(w.to);
  }
  return out;
}

FlowGraph parse_flow(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(text_position(text, e.byte == 0 ? 0 : e.byte - 1), "malformed JSON");
  } catch (const Json::exception&) {
    throw ParseError("document", "malformed JSON");
  }
  if (!doc.is_object()) throw ParseError("document", "top level must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() != "nodes" && it.key() != "wires" && it.key() != "name" && it.key() != "description") {
      throw ParseError("document", "unknown top-level key '" + it.key() + "'");
    }
  }
  auto nodes = doc.find("nodes");
  if (nodes == doc.end() || !nodes->is_array()) throw ParseError("document", "'nodes' must be a list");
  auto wires = doc.find("wires");
  if (wires != doc.end() && !wires->is_array()) throw ParseError("document", "'wires' must be a list");

  FlowGraph g;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < nodes->size(); ++i) {
    const Json& jn = (*nodes)[i];
    const std::string loc = "nodes[" + std::to_string(i) + "]";
    if (!jn.is_object()) throw ParseError(loc, "node must be an object");
    for (auto it = jn.begin(); it != jn.end(); ++it) {
      if (it.key() != "id" && it.key() != "type" && it.key() != "config") {
        throw ParseError(loc, "unknown node key '" + it.key() + "'");
      }
    }
    auto id = jn.find("id");
    if (id == jn.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
      throw ParseError(loc, "node needs a non-empty string 'id'");
    }
    NodeSpec spec;
    spec.id = id->get<std::string>();
    if (!ids.insert(spec.id).second) throw ParseError(node_loc(spec.id), "duplicate id");
    auto type = jn.find("type");
    if (type == jn.end() || !type->is_string()) throw ParseError(node_loc(spec.id), "node needs a string 'type'");
    auto t = node_type_from_string(type->get_ref<const std::string&>());
    if (!t) {
      throw ParseError(node_loc(spec.id), "unknown node type '" + type->get<std::string>() + "'");
    }
    spec.type = *t;
    if (auto cfg = jn.find("config"); cfg != jn.end()) {
      if (!cfg->is_object()) throw ParseError(node_loc(spec.id), "'config' must be an object");
      spec.config = *cfg;
    }
    validate_config(spec);
    g.nodes.push_back(std::move(spec));
  }

  if (wires != doc.end()) {
    for (std::size_t i = 0; i < wires->size(); ++i) {
      const Json& jw = (*wires)[i];
      const std::string loc = "wires[" + std::to_string(i) + "]";
      if (!jw.is_array() || jw.size() != 2 || !jw[0].is_string() || !jw[1].is_string()) {
        throw ParseError(loc, "wire must be a [from, to] pair of node ids");
      }
      Wire w{jw[0].get<std::string>(), jw[1].get<std::string>()};
      const NodeSpec* from = g.node(w.from);
      const NodeSpec* to = g.node(w.to);
      if (from == nullptr) throw ParseError(loc, "references missing node '" + w.from + "'");
      if (to == nullptr) throw ParseError(loc, "references missing node '" + w.to + "'");
      if (is_sink_only(from->type)) {
        throw ParseError(loc, "node '" + w.from + "' of type " + to_string(from->type) + " has no outputs");
      }
      if (is_source(to->type)) {
        throw ParseError(loc, "node '" + w.to + "' of type " + to_string(to->type) + " accepts no input");
      }
      g.wires.push_back(std::move(w));
    }
  }
  return g;
}

FlowGraph load_flow_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open flow file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_flow(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.location(), std::string(e.what()).substr(e.location().size() + 2));
  }
}

// ---------------------------------------------------------------------------

struct FlowHandle::Impl {
  struct Work {
    std::size_t node;
    FlowMessage msg;
  };
  struct Interval {
    std::size_t node;
    std::chrono::milliseconds period;
    std::chrono::steady_clock::time_point next_due;
  };
  struct MqttSource {
    std::size_t node;
    std::unique_ptr<mqtt::ClientSession> client;
    std::thread poller;
  };

  FlowGraph graph;
  FlowRuntime rt;
  std::vector<std::vector<std::size_t>> out;

  mutable std::mutex mu;
  std::condition_variable cv;
  std::condition_variable idle_cv;
  std::deque<Work> queue;
  std::vector<Interval> intervals;
  bool busy = false;
  bool accepting = true;
  bool stop_requested = false;
  FlowStats stats;

  std::atomic<bool> sources_running{true};
  std::vector<MqttSource> mqtt_sources;
  std::thread loop;
  bool stopped = false;

  std::size_t index_of(std::string_view id) const {
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
      if (graph.nodes[i].id == id) return i;
    }
    throw ParseError(node_loc(std::string(id)), "no such node");
  }

  // Caller holds mu.
  void emit_locked(std::size_t from, Json payload) {
    auto shared = std::make_shared<const Json>(std::move(payload));
    const std::int64_t ts = now_ms();
    for (std::size_t target : out[from]) {
      queue.push_back(Work{target, FlowMessage{shared, graph.nodes[from].id, ts}});
    }
    cv.notify_all();
  }

  void emit(std::size_t from, Json payload) {
    std::lock_guard lk(mu);
    emit_locked(from, std::move(payload));
  }

  void report_error(const std::string& node_id, const std::string& what) {
    {
      std::lock_guard lk(mu);
      ++stats.errors;
    }
    if (rt.error_sink) rt.error_sink(node_id, what);
  }

  std::optional<Json> execute(const NodeSpec& n, const FlowMessage& m) {
    const Json& p = *m.payload;
    switch (n.type) {
      case NodeType::StoreInsert: {
        const auto key = n.config.find("dedup_key");
        const bool dedup = key == n.config.end() || !key->is_null();
        if (dedup) {
          const std::string k = key == n.config.end() ? "seq" : key->get<std::string>();
          if (!rt.store->insert_unique(collection_of(n), p, k)) return std::nullopt;
        } else {
          rt.store->insert(collection_of(n), p);
        }
        return Json(p);
      }
      case NodeType::StoreGetAll: {
        Json list = Json::array();
        for (const auto& d : rt.store->get_all(collection_of(n))) {
          list.push_back(Json{{"seq", d.seq}, {"inserted_at_ms", d.inserted_at_ms}, {"body", d.body}});
        }
        return list;
      }
      case NodeType::StoreDeleteAll:
        return Json(rt.store->delete_all(collection_of(n)));
      case NodeType::HrvAnalyze: {
        if (!p.is_array()) throw InvalidSignal("hrv-analyze expects a document list");
        std::vector<Json> records;
        records.reserve(p.size());
        for (const auto& d : p) records.push_back(d.is_object() && d.contains("body") ? d["body"] : d);
        const double rate = n.config.value("sample_rate_hz", rt.sample_rate_hz);
        return analyze_window(records, rt.analysis, rate, Mode::Flow).to_json();
      }
      case NodeType::Debug:
        if (rt.debug_sink) rt.debug_sink(n.id, p);
        return std::nullopt;
      case NodeType::Report: {
        const MetricsReport r = MetricsReport::from_json(p);
        {
          std::lock_guard lk(mu);
          ++stats.reports;
        }
        if (rt.report_sink) rt.report_sink(r);
        return std::nullopt;
      }
      case NodeType::MqttIn:
      case NodeType::IntervalInject:
      case NodeType::ManualInject:
        return Json(p);
    }
    return std::nullopt;
  }

  void run_loop() {
    std::unique_lock lk(mu);
    while (true) {
      if (queue.empty()) {
        if (stop_requested) break;
        if (intervals.empty() || !accepting) {
          cv.wait(lk, [&] { return !queue.empty() || stop_requested; });
        } else {
          auto next = std::min_element(intervals.begin(), intervals.end(),
                                       [](auto& a, auto& b) { return a.next_due < b.next_due; });
          cv.wait_until(lk, next->next_due, [&] { return !queue.empty() || stop_requested; });
        }
      }
      if (accepting) {
        const auto now = std::chrono::steady_clock::now();
        for (auto& iv : intervals) {
          if (iv.next_due <= now) {
            iv.next_due = now + iv.period;
            emit_locked(iv.node, graph.nodes[iv.node].config.value("payload", Json{{"ts_ms", now_ms()}}));
          }
        }
      }
      if (queue.empty()) continue;

      Work w = std::move(queue.front());
      queue.pop_front();
      busy = true;
      lk.unlock();

      const NodeSpec& n = graph.nodes[w.node];
      std::optional<Json> result;
      try {
        result = execute(n, w.msg);
      } catch (const std::exception& e) {
        report_error(n.id, e.what());
      }

      lk.lock();
      ++stats.messages_processed;
      if (result) emit_locked(w.node, std::move(*result));
      busy = false;
      if (queue.empty()) idle_cv.notify_all();
    }
    busy = false;
    idle_cv.notify_all();
  }

  void poll_mqtt(MqttSource& src) {
    const std::string& id = graph.nodes[src.node].id;
    while (sources_running) {
      std::vector<mqtt::Publish> msgs;
      try {
        msgs = src.client->poll(100ms);
      } catch (const Error& e) {
        if (sources_running) report_error(id, e.what());
        return;
      }
      for (auto& m : msgs) {
        try {
          const SensorRecord rec = SensorRecord::from_payload(
              std::string_view(reinterpret_cast<const char*>(m.payload.data()), m.payload.size()));
          std::lock_guard lk(mu);
          ++stats.mqtt_messages;
          if (accepting) emit_locked(src.node, rec.to_json());
        } catch (const Error& e) {
          report_error(id, e.what());
        }
      }
    }
  }
};

FlowHandle::FlowHandle(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

FlowHandle::~FlowHandle() { stop(); }

std::unique_ptr<FlowHandle> run_flow(const FlowGraph& graph, FlowRuntime runtime) {
  if (!runtime.store) runtime.store = std::make_shared<store::DocStore>();
  runtime.analysis.validate();

  auto impl = std::make_unique<FlowHandle::Impl>();
  impl->graph = graph;
  impl->rt = std::move(runtime);
  auto& g = impl->graph;
  impl->out.resize(g.nodes.size());
  for (const auto& w : g.wires) impl->out[impl->index_of(w.from)].push_back(impl->index_of(w.to));

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const NodeSpec& n = g.nodes[i];
    switch (n.type) {
      case NodeType::StoreInsert: {
        const std::size_t threshold = n.config.value("threshold", impl->rt.default_threshold);
        impl->rt.store->create_collection(collection_of(n), threshold);
        break;
      }
      case NodeType::StoreGetAll:
      case NodeType::StoreDeleteAll:
        if (!impl->rt.store->has_collection(collection_of(n))) {
          impl->rt.store->create_collection(collection_of(n), impl->rt.default_threshold);
        }
        break;
      case NodeType::IntervalInject: {
        const auto period = std::chrono::milliseconds(n.config["period_ms"].get<std::int64_t>());
        impl->intervals.push_back({i, period, std::chrono::steady_clock::now() + period});
        break;
      }
      default:
        break;
    }
  }

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const NodeSpec& n = g.nodes[i];
    if (n.type != NodeType::MqttIn) continue;
    const mqtt::Address addr =
        n.config.contains("broker") ? mqtt::Address::parse(n.config["broker"].get<std::string>()) : impl->rt.broker;
    const std::string client_id = n.config.value("client_id", "flow-" + n.id);
    auto client = mqtt::ClientSession::connect(addr, client_id, 30, impl->rt.client_options);
    client->subscribe(n.config["topic"].get<std::string>(), n.config.value("qos", std::uint8_t{1}));
    impl->mqtt_sources.push_back({i, std::move(client), {}});
  }

  auto* raw = impl.get();
  for (auto& src : raw->mqtt_sources) src.poller = std::thread([raw, &src] { raw->poll_mqtt(src); });
  raw->loop = std::thread([raw] { raw->run_loop(); });
  return std::unique_ptr<FlowHandle>(new FlowHandle(std::move(impl)));
}

void FlowHandle::inject(const std::string& node_id, std::optional<Json> payload) {
  const std::size_t idx = impl_->index_of(node_id);
  const NodeSpec& n = impl_->graph.nodes[idx];
  if (n.type != NodeType::ManualInject && n.type != NodeType::IntervalInject) {
    throw ParseError(node_loc(node_id), "only inject nodes can be triggered");
  }
  Json p = payload ? std::move(*payload) : n.config.value("payload", Json{{"ts_ms", now_ms()}});
  std::lock_guard lk(impl_->mu);
  if (!impl_->accepting) throw Error("flow is stopping");
  impl_->emit_locked(idx, std::move(p));
}

bool FlowHandle::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lk(impl_->mu);
  return impl_->idle_cv.wait_for(lk, timeout, [&] { return impl_->queue.empty() && !impl_->busy; });
}

void FlowHandle::stop() {
  if (!impl_ || impl_->stopped) return;
  impl_->stopped = true;
  {
    std::lock_guard lk(impl_->mu);
    impl_->accepting = false;
  }
  impl_->sources_running = false;
  for (auto& src : impl_->mqtt_sources) {
    if (src.poller.joinable()) src.poller.join();
  }
  {
    std::lock_guard lk(impl_->mu);
    impl_->stop_requested = true;
  }
  impl_->cv.notify_all();
  if (impl_->loop.joinable()) impl_->loop.join();
  for (auto& src : impl_->mqtt_sources) src.client->disconnect();
}

FlowStats FlowHandle::stats() const {
  std::lock_guard lk(impl_->mu);
  return impl_->stats;
}

}  // namespace triplex::flow
