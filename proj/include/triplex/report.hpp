#pragma once

// Shared analysis core used by every architecture: sensor record schema,
// window -> metrics conversion, and the line-delimited metrics report.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triplex/hrv.hpp"
#include "triplex/store.hpp"

namespace triplex {

using Json = nlohmann::json;

/// One sample as carried in an MQTT payload: {"seq", "t_ms", "value"}.
struct SensorRecord {
  std::int64_t seq = 0;
  std::int64_t t_ms = 0;
  double value = 0.0;

  Json to_json() const;
  std::string to_payload() const;
  /// Throws InvalidSignal when a field is missing or mistyped.
  static SensorRecord from_json(const Json& j);
  static SensorRecord from_payload(std::string_view text);
};

enum class Mode { Monolith, Flow, Faas };
std::string to_string(Mode m);
Mode parse_mode(std::string_view text);

inline constexpr const char* kStatusOk = "ok";
inline constexpr const char* kStatusInsufficient = "insufficient_data";

struct MetricsReport {
  std::string mode;
  std::int64_t ts_ms = 0;
  std::string status = kStatusOk;
  std::string detail;  // error text when status != ok
  std::optional<hrv::HrvMetrics> metrics;
  std::vector<std::string> flags;
  std::int64_t window_first_seq = 0;
  std::int64_t window_last_seq = 0;
  std::int64_t window_samples = 0;

  Json to_json() const;
  static MetricsReport from_json(const Json& j);
  std::string to_line() const { return to_json().dump(); }
};

/// Rebuilds a Signal from stored sensor records (ascending store order) and
/// analyses it. Insufficient data is reported in-band, never thrown.
MetricsReport analyze_window(const std::vector<Json>& records, const hrv::AnalysisConfig& cfg,
                             double sample_rate_hz, Mode mode);
MetricsReport analyze_documents(const std::vector<store::Document>& docs,
                                const hrv::AnalysisConfig& cfg, double sample_rate_hz, Mode mode);

Json metrics_to_json(const hrv::HrvMetrics& m);
hrv::HrvMetrics metrics_from_json(const Json& j);

}  // namespace triplex
