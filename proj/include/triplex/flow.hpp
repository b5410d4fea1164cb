#pragma once

// Mashup-style flow runtime: a JSON flow file describes typed nodes and the
// wires between them; each running flow is a single-threaded event loop with
// run-to-completion semantics per message per node.
//
// Flow file schema:
//   {
//     "nodes": [ {"id": "<unique>", "type": "<node type>", "config": {...}}, ... ],
//     "wires": [ ["<from id>", "<to id>"], ... ]
//   }
//
// Node types and config keys (unknown keys are rejected):
//   mqtt-in           topic (required filter), qos (0|1, default 1), broker ("host:port"), client_id
//   store-insert      collection (default "hr"), dedup_key (string or null, default "seq"), threshold (> 0)
//   store-get-all     collection
//   store-delete-all  collection
//   hrv-analyze       sample_rate_hz (> 0)
//   interval-inject   period_ms (required, > 0), payload
//   manual-inject     payload
//   debug             name
//   report            (none)

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "triplex/hrv.hpp"
#include "triplex/mqtt/client.hpp"
#include "triplex/report.hpp"
#include "triplex/store.hpp"

namespace triplex::flow {

using Json = nlohmann::json;

enum class NodeType {
  MqttIn,
  StoreInsert,
  StoreGetAll,
  StoreDeleteAll,
  HrvAnalyze,
  IntervalInject,
  ManualInject,
  Debug,
  Report,
};

std::string to_string(NodeType t);
std::optional<NodeType> node_type_from_string(std::string_view s);
bool is_source(NodeType t);
bool is_sink_only(NodeType t);

struct NodeSpec {
  std::string id;
  NodeType type = NodeType::Debug;
  Json config = Json::object();
};

struct Wire {
  std::string from;
  std::string to;
};

struct FlowGraph {
  std::vector<NodeSpec> nodes;
  std::vector<Wire> wires;

  const NodeSpec* node(std::string_view id) const;
  /// Targets of `id`'s out-wires, in declaration order.
  std::vector<std::string> targets(std::string_view id) const;
};

/// Throws ParseError naming the offending node, wire, or text position.
FlowGraph parse_flow(std::string_view text);
FlowGraph load_flow_file(const std::string& path);

struct FlowMessage {
  std::shared_ptr<const Json> payload;
  std::string source_node;
  std::int64_t ts_ms = 0;
};

struct FlowRuntime {
  mqtt::Address broker;
  mqtt::ClientOptions client_options;
  std::shared_ptr<store::DocStore> store;
  std::size_t default_threshold = store::kDefaultThreshold;
  hrv::AnalysisConfig analysis;
  double sample_rate_hz = 100.0;

  std::function<void(const MetricsReport&)> report_sink;
  std::function<void(const std::string& node_id, const Json& payload)> debug_sink;
  std::function<void(const std::string& node_id, const std::string& error)> error_sink;
};

struct FlowStats {
  std::uint64_t messages_processed = 0;
  std::uint64_t errors = 0;
  std::uint64_t reports = 0;
  std::uint64_t mqtt_messages = 0;
};

class FlowHandle {
 public:
  ~FlowHandle();
  FlowHandle(const FlowHandle&) = delete;
  FlowHandle& operator=(const FlowHandle&) = delete;

  /// Emits from a manual-inject or interval-inject node now. Throws ParseError
  /// for an unknown id or a non-inject node.
  void inject(const std::string& node_id, std::optional<Json> payload = std::nullopt);

  /// Blocks until no message is queued or executing (or `timeout` passes).
  bool wait_idle(std::chrono::milliseconds timeout);

  /// Sources stop, in-flight messages drain, then node resources close.
  void stop();

  FlowStats stats() const;

 private:
  friend std::unique_ptr<FlowHandle> run_flow(const FlowGraph& graph, FlowRuntime runtime);
  struct Impl;
  explicit FlowHandle(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Starts sources and the event loop. Throws SessionClosed when an mqtt-in
/// node cannot reach its broker.
std::unique_ptr<FlowHandle> run_flow(const FlowGraph& graph, FlowRuntime runtime);
inline void stop_flow(FlowHandle& h) { h.stop(); }

}  // namespace triplex::flow
