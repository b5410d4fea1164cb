#pragma once

// Malformed flow documents, each paired with a fragment the diagnostic's
// location must contain.

#include <string>
#include <vector>

namespace corpus {

struct Case {
  std::string text;
  std::string location;
};

inline std::string node(const std::string& id, const std::string& type, const std::string& config = "{}") {
  return R"({"id": ")" + id + R"(", "type": ")" + type + R"(", "config": )" + config + "}";
}

inline std::string flow(const std::vector<std::string>& nodes, const std::string& wires = "[]") {
  std::string s = "{\n  \"nodes\": [\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) s += "    " + nodes[i] + (i + 1 < nodes.size() ? ",\n" : "\n");
  return s + "  ],\n  \"wires\": " + wires + "\n}\n";
}

inline std::vector<Case> malformed_flows() {
  const std::string in = node("in", "mqtt-in", R"({"topic": "hr/p1"})");
  const std::string ins = node("ins", "store-insert");
  std::vector<Case> c;

  // Text-level damage.
  c.push_back({"", "line 1"});
  c.push_back({"{", "line 1"});
  c.push_back({"{\n  \"nodes\": [\n", "line 3"});
  c.push_back({"{\"nodes\": [}", "line 1, column 12"});
  c.push_back({"{\"nodes\": []}}", "line 1"});
  c.push_back({"{\n\"nodes\": [],\n\"wires\": [,]\n}", "line 3"});
  c.push_back({"{'nodes': []}", "line 1, column 2"});
  c.push_back({"{\"nodes\": [] \"wires\": []}", "line 1"});
  c.push_back({"\xff\xfe{}", "line 1"});
  c.push_back({"{\"nodes\": [{\"id\": \"a\", \"type\": \"debug\",}]}", "line 1"});
  c.push_back({"nodes: []", "line 1"});
  c.push_back({"{\n\n\n   \"nodes\": tru\n}", "line 4"});

  // Document shape.
  c.push_back({"[]", "document"});
  c.push_back({"42", "document"});
  c.push_back({"{}", "document"});
  c.push_back({R"({"nodes": {}})", "document"});
  c.push_back({R"({"nodes": [], "wires": {}})", "document"});
  c.push_back({R"({"nodes": [], "extra": 1})", "document"});

  // Node shape.
  c.push_back({flow({"1"}), "nodes[0]"});
  c.push_back({flow({in, "[]"}), "nodes[1]"});
  c.push_back({flow({R"({"type": "debug"})"}), "nodes[0]"});
  c.push_back({flow({R"({"id": "", "type": "debug"})"}), "nodes[0]"});
  c.push_back({flow({R"({"id": 7, "type": "debug"})"}), "nodes[0]"});
  c.push_back({flow({R"({"id": "a", "type": "debug", "colour": "red"})"}), "nodes[0]"});
  c.push_back({flow({R"({"id": "a"})"}), "node 'a'"});
  c.push_back({flow({R"({"id": "a", "type": 3})"}), "node 'a'"});
  c.push_back({flow({node("a", "pythn-function")}), "node 'a'"});
  c.push_back({flow({node("a", "MQTT-IN", R"({"topic": "x"})")}), "node 'a'"});
  c.push_back({flow({R"({"id": "a", "type": "debug", "config": []})"}), "node 'a'"});
  c.push_back({flow({node("a", "debug"), node("a", "report")}), "node 'a'"});

  // Per-type config.
  c.push_back({flow({node("m", "mqtt-in")}), "node 'm'"});
  c.push_back({flow({node("m", "mqtt-in", R"({"topic": ""})")}), "node 'm'"});
  c.push_back({flow({node("m", "mqtt-in", R"({"topic": 5})")}), "node 'm'"});
  c.push_back({flow({node("m", "mqtt-in", R"({"topic": "a/#/b"})")}), "node 'm'"});
  c.push_back({flow({node("m", "mqtt-in", R"({"topic": "a", "qos": 2})")}), "node 'm'"});
  c.push_back({flow({node("m", "mqtt-in", R"({"topic": "a", "qos": "1"})")}), "node 'm'"});
  c.push_back({flow({node("m", "mqtt-in", R"({"topic": "a", "broker": "nowhere"})")}), "node 'm'"});
  c.push_back({flow({node("m", "mqtt-in", R"({"topic": "a", "retain": true})")}), "node 'm'"});
  c.push_back({flow({node("s", "store-insert", R"({"threshold": 0})")}), "node 's'"});
  c.push_back({flow({node("s", "store-insert", R"({"threshold": -5})")}), "node 's'"});
  c.push_back({flow({node("s", "store-insert", R"({"threshold": 2.5})")}), "node 's'"});
  c.push_back({flow({node("s", "store-insert", R"({"collection": 1})")}), "node 's'"});
  c.push_back({flow({node("s", "store-insert", R"({"dedup_key": 4})")}), "node 's'"});
  c.push_back({flow({node("g", "store-get-all", R"({"collection": ""})")}), "node 'g'"});
  c.push_back({flow({node("d", "store-delete-all", R"({"limit": 3})")}), "node 'd'"});
  c.push_back({flow({node("h", "hrv-analyze", R"({"sample_rate_hz": 0})")}), "node 'h'"});
  c.push_back({flow({node("h", "hrv-analyze", R"({"sample_rate_hz": "100"})")}), "node 'h'"});
  c.push_back({flow({node("t", "interval-inject")}), "node 't'"});
  c.push_back({flow({node("t", "interval-inject", R"({"period_ms": 0})")}), "node 't'"});
  c.push_back({flow({node("t", "interval-inject", R"({"period_ms": "1000"})")}), "node 't'"});
  c.push_back({flow({node("t", "interval-inject", R"({"period_ms": 100.5})")}), "node 't'"});
  c.push_back({flow({node("t", "manual-inject", R"({"period_ms": 10})")}), "node 't'"});
  c.push_back({flow({node("b", "debug", R"({"name": 1})")}), "node 'b'"});
  c.push_back({flow({node("r", "report", R"({"path": "x"})")}), "node 'r'"});

  // Wires.
  c.push_back({flow({in, ins}, R"([["in", "x"]])"), "wires[0]"});
  c.push_back({flow({in, ins}, R"([["in", "ins"], ["x", "ins"]])"), "wires[1]"});
  c.push_back({flow({in, ins}, R"([["in"]])"), "wires[0]"});
  c.push_back({flow({in, ins}, R"([["in", "ins", "ins"]])"), "wires[0]"});
  c.push_back({flow({in, ins}, R"(["in"])"), "wires[0]"});
  c.push_back({flow({in, ins}, R"([["in", 2]])"), "wires[0]"});
  c.push_back({flow({in, node("r", "report")}, R"([["in", "r"], ["r", "in"]])"), "wires[1]"});
  c.push_back({flow({node("b", "debug"), ins}, R"([["b", "ins"]])"), "wires[0]"});
  c.push_back({flow({in, ins}, R"([["ins", "in"]])"), "wires[0]"});
  c.push_back({flow({ins, node("t", "interval-inject", R"({"period_ms": 5})")}, R"([["ins", "t"]])"), "wires[0]"});
  return c;
}

}  // namespace corpus
