#include "triplex/emulator.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "triplex/error.hpp"
#include "triplex/hrv.hpp"
#include "triplex/report.hpp"

namespace triplex::emulator {

void ReplayConfig::validate() const {
  if (!(sample_rate_hz > 0.0)) throw InvalidConfig("sample_rate_hz must be > 0");
  if (!(speedup >= 0.0)) throw InvalidConfig("speedup must be >= 0");
  if (qos > 1) throw InvalidConfig("qos must be 0 or 1");
}

Publisher client_publisher(mqtt::ClientSession& session) {
  return [&session](const std::string& topic, const std::string& payload, std::uint8_t qos) {
    session.publish(topic, payload, qos);
  };
}

ReplayReport replay_samples(const std::vector<double>& samples, const ReplayConfig& cfg,
                            const Publisher& publish, const std::atomic<bool>* stop) {
  cfg.validate();
  if (samples.empty()) throw ReplayError("no samples to replay");

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const double period_ms = cfg.speedup > 0.0 ? (1000.0 / cfg.sample_rate_hz) / cfg.speedup : 0.0;

  ReplayReport report;
  std::int64_t index = 0;  // continues across loops so seq and t_ms keep increasing
  do {
    for (double v : samples) {
      if (stop != nullptr && stop->load()) break;
      if (period_ms > 0.0) {
        std::this_thread::sleep_until(
            start + std::chrono::duration_cast<clock::duration>(
                        std::chrono::duration<double, std::milli>(period_ms * static_cast<double>(index))));
      }
      const SensorRecord rec{
          index + 1,
          cfg.start_time_ms +
              static_cast<std::int64_t>(std::llround(static_cast<double>(index) * 1000.0 / cfg.sample_rate_hz)),
          v};
      try {
        publish(cfg.topic, rec.to_payload(), cfg.qos);
      } catch (const std::exception& e) {
        throw ReplayError(std::string("publish failed after ") + std::to_string(report.published_count) +
                              " records: " + e.what(),
                          report.published_count);
      }
      ++report.published_count;
      ++index;
    }
  } while (cfg.loop && !(stop != nullptr && stop->load()));

  report.duration_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
  return report;
}

ReplayReport replay(const ReplayConfig& cfg, const Publisher& publish, const std::atomic<bool>* stop) {
  std::vector<double> samples;
  try {
    samples = hrv::load_signal_file(cfg.data_path);
  } catch (const InvalidSignal& e) {
    throw ReplayError(e.what());
  }
  if (samples.empty()) throw ReplayError("data file '" + cfg.data_path + "' has no samples");
  return replay_samples(samples, cfg, publish, stop);
}

}  // namespace triplex::emulator
