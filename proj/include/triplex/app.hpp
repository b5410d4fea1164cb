#pragma once

// Orchestration behind the `triplex` executable: configuration, the three
// architecture runs, and the cross-architecture comparison.

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triplex/hrv.hpp"
#include "triplex/mqtt/net.hpp"
#include "triplex/report.hpp"

namespace triplex::app {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2 };

struct RunConfig {
  mqtt::Address broker{"127.0.0.1", 1883};
  /// run/compare start their own broker on broker.port (0 = ephemeral).
  bool embedded_broker = true;
  std::string topic = "hr/patient1";
  std::string collection = "hr";
  std::size_t threshold = 3000;
  hrv::AnalysisConfig analysis;
  std::int64_t decimation = 100;
  std::string report_path;  // empty: standard output
  std::string data_path;
  double rate_hz = 100.0;
  double speedup = 1.0;
  std::string flow_file = "flows/health_monitor.json";
  std::uint8_t qos = 1;
  std::int64_t ack_timeout_ms = 2000;
  int max_attempts = 3;
  double puback_drop = 0.0;
  std::uint64_t fault_seed = 1;
  std::int64_t function_timeout_ms = 60'000;
  int function_memory_mb = 128;
  std::string run_log_path;
  std::int64_t drain_timeout_ms = 60'000;

  void validate() const;
};

/// Applies one key=value setting. Throws InvalidConfig for an unknown key or bad value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// "key = value" lines; '#' starts a comment.
void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin = "config");
void apply_config_file(RunConfig& cfg, const std::string& path);

struct RunResult {
  Mode mode = Mode::Monolith;
  std::vector<MetricsReport> reports;  // periodic reports, then the final one
  MetricsReport final_report;
  std::int64_t published = 0;
  std::uint64_t messages = 0;     // sensor messages received by the pipeline
  std::uint64_t invocations = 0;  // analyses (monolith), node executions (flow), function calls (faas)
  double wall_ms = 0.0;
};

/// Test hooks for the comparison.
struct RunHooks {
  /// Analysis config override for this mode only.
  std::optional<hrv::AnalysisConfig> analysis_override;
  std::function<void(const MetricsReport&)> on_report;
  /// Ends an open-ended run (no data to replay).
  const std::atomic<bool>* stop = nullptr;
};

/// Runs one architecture end to end: broker, pipeline, replay of `samples`
/// (when non-null and non-empty), drain, a final analysis tick, ordered shutdown.
RunResult run_mode(Mode mode, const RunConfig& cfg, const std::vector<double>* samples, RunHooks hooks = {});

struct ComparisonReport {
  std::string verdict;  // EQUAL | DIVERGED | EQUAL-EMPTY
  std::string diverged_mode;
  std::string diverged_field;
  std::vector<RunResult> runs;

  nlohmann::json to_json() const;
};

struct CompareOptions {
  /// Runs this mode without outlier rejection so the comparison must diverge.
  std::optional<Mode> tamper_mode;
  double tolerance = 1e-9;
};

/// Field-by-field comparison of two final reports; returns the first
/// differing field name, or std::nullopt.
std::optional<std::string> first_difference(const MetricsReport& a, const MetricsReport& b, double tolerance);

ComparisonReport compare_modes(const RunConfig& cfg, const std::vector<double>& samples, CompareOptions opts = {});

// Subcommands. Each returns a process exit code and writes human/JSON output to `out`.
int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_broker(const RunConfig& cfg, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop);
int cmd_emulate(const RunConfig& cfg, bool loop, std::ostream& out, std::ostream& err,
                const std::atomic<bool>& stop);
int cmd_run(Mode mode, const RunConfig& cfg, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop);
int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err, CompareOptions opts = {});

}  // namespace triplex::app
