#pragma once

// Replays a recorded heart signal as timed sensor publishes.

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "triplex/mqtt/client.hpp"

namespace triplex::emulator {

struct ReplayConfig {
  std::string data_path;
  double sample_rate_hz = 100.0;
  /// 1.0 is real time; 0 publishes as fast as the publisher accepts.
  double speedup = 1.0;
  std::string topic = "hr/patient1";
  std::uint8_t qos = 1;
  bool loop = false;
  std::int64_t start_time_ms = 0;

  void validate() const;
};

struct ReplayReport {
  std::int64_t published_count = 0;
  double duration_ms = 0.0;
};

/// Sends one payload; throws on failure.
using Publisher = std::function<void(const std::string& topic, const std::string& payload, std::uint8_t qos)>;

Publisher client_publisher(mqtt::ClientSession& session);

/// Replays samples already in memory. `stop`, when given, ends a looping
/// replay. Throws ReplayError (carrying the count so far) when a publish fails.
ReplayReport replay_samples(const std::vector<double>& samples, const ReplayConfig& cfg,
                            const Publisher& publish, const std::atomic<bool>* stop = nullptr);

/// Loads cfg.data_path and replays it. Throws ReplayError for an unreadable
/// or empty file.
ReplayReport replay(const ReplayConfig& cfg, const Publisher& publish,
                    const std::atomic<bool>* stop = nullptr);

}  // namespace triplex::emulator
