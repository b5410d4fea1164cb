#include "triplex/monolith.hpp"

#include "triplex/error.hpp"

namespace triplex::monolith {

using namespace std::chrono_literals;

StoreGateway::StoreGateway(std::shared_ptr<store::DocStore> store, std::string collection,
                           std::size_t threshold)
    : store_(std::move(store)), collection_(std::move(collection)) {
  store_->create_collection(collection_, threshold);
}

bool StoreGateway::insert(const Json& record) {
  return store_->insert_unique(collection_, record, "seq").has_value();
}

std::vector<store::Document> StoreGateway::get_all() const { return store_->get_all(collection_); }

std::size_t StoreGateway::delete_all() { return store_->delete_all(collection_); }

MetricsCalculator::MetricsCalculator(hrv::AnalysisConfig cfg, double sample_rate_hz)
    : cfg_(cfg), sample_rate_hz_(sample_rate_hz) {
  cfg_.validate();
}

MetricsReport MetricsCalculator::calculate(const std::vector<store::Document>& docs) const {
  return analyze_documents(docs, cfg_, sample_rate_hz_, Mode::Monolith);
}

MqttListener::MqttListener(StoreGateway& gateway, MetricsCalculator& metrics, std::int64_t decimation,
                           ReportSink sink)
    : gateway_(gateway), metrics_(metrics), decimation_(decimation), sink_(std::move(sink)) {
  if (decimation_ < 1) throw InvalidConfig("decimation must be >= 1");
}

MqttListener::~MqttListener() { stop(); }

void MqttListener::connect(const mqtt::Address& broker, const std::string& topic, std::uint8_t qos,
                           mqtt::ClientOptions opts) {
  client_ = mqtt::ClientSession::connect(broker, "monolith-listener", 30, opts);
  client_->subscribe(topic, qos);
  running_ = true;
  worker_ = std::thread([this] { run(); });
}

void MqttListener::stop() {
  running_ = false;
  if (worker_.joinable()) worker_.join();
  if (client_) client_->disconnect();
}

void MqttListener::run() {
  while (running_) {
    std::vector<mqtt::Publish> batch;
    try {
      batch = client_->poll(100ms);
    } catch (const SessionClosed&) {
      return;
    }
    for (const auto& m : batch) on_message(m);
  }
}

void MqttListener::on_message(const mqtt::Publish& m) {
  ++received_;
  SensorRecord rec;
  try {
    rec = SensorRecord::from_payload(
        std::string_view(reinterpret_cast<const char*>(m.payload.data()), m.payload.size()));
  } catch (const Error&) {
    return;  // not a sensor record
  }
  if (gateway_.insert(rec.to_json()) && rec.seq % decimation_ == 0) analyze_now();
}

MetricsReport MqttListener::analyze_now() {
  MetricsReport r = metrics_.calculate(gateway_.get_all());
  ++analyses_;
  if (sink_) sink_(r);
  return r;
}

}  // namespace triplex::monolith
