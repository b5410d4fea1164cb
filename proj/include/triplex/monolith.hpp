#pragma once

// Model-based architecture: three collaborating classes. The MQTT listener
// stores every message through the store gateway and asks the metrics
// calculator for a report once every `decimation` messages.

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "triplex/mqtt/client.hpp"
#include "triplex/report.hpp"
#include "triplex/store.hpp"

namespace triplex::monolith {

/// Insert / get-all / delete-all against one capped collection.
class StoreGateway {
 public:
  StoreGateway(std::shared_ptr<store::DocStore> store, std::string collection, std::size_t threshold);

  /// False for a duplicate (already-seen sensor seq).
  bool insert(const Json& record);
  std::vector<store::Document> get_all() const;
  std::size_t delete_all();
  const std::string& collection() const { return collection_; }

 private:
  std::shared_ptr<store::DocStore> store_;
  std::string collection_;
};

/// Reads the stored window, rebuilds the signal and computes the metrics.
class MetricsCalculator {
 public:
  MetricsCalculator(hrv::AnalysisConfig cfg, double sample_rate_hz);
  MetricsReport calculate(const std::vector<store::Document>& docs) const;

 private:
  hrv::AnalysisConfig cfg_;
  double sample_rate_hz_;
};

class MqttListener {
 public:
  using ReportSink = std::function<void(const MetricsReport&)>;

  MqttListener(StoreGateway& gateway, MetricsCalculator& metrics, std::int64_t decimation, ReportSink sink);
  ~MqttListener();
  MqttListener(const MqttListener&) = delete;
  MqttListener& operator=(const MqttListener&) = delete;

  void connect(const mqtt::Address& broker, const std::string& topic, std::uint8_t qos,
               mqtt::ClientOptions opts = {});
  void stop();

  /// Computes and emits a report on the current window.
  MetricsReport analyze_now();

  std::uint64_t messages_received() const { return received_; }
  std::uint64_t analyses() const { return analyses_; }

 private:
  void run();
  void on_message(const mqtt::Publish& m);

  StoreGateway& gateway_;
  MetricsCalculator& metrics_;
  std::int64_t decimation_;
  ReportSink sink_;
  std::unique_ptr<mqtt::ClientSession> client_;
  std::thread worker_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> received_{0};
  std::atomic<std::uint64_t> analyses_{0};
};

}  // namespace triplex::monolith
