#pragma once

// Local Function-as-a-Service host. Functions are stateless handlers that
// receive an event envelope plus a context exposing external services (the
// document store, other functions). Each invocation runs on its own thread
// and is abandoned when it overruns the descriptor's timeout.
//
// memory_mb is recorded metadata only; it is not enforced.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "triplex/error.hpp"
#include "triplex/hrv.hpp"
#include "triplex/mqtt/client.hpp"
#include "triplex/store.hpp"

namespace triplex::faas {

using Json = nlohmann::json;

inline constexpr std::int64_t kDefaultTimeoutMs = 60'000;
inline constexpr int kDefaultMemoryMb = 128;

struct EventEnvelope {
  std::string event_id;
  std::string source;
  std::int64_t ts_ms = 0;
  Json payload;

  Json to_json() const;
  static EventEnvelope from_json(const Json& j);
};

enum class Outcome { Ok, Error, Timeout };
std::string to_string(Outcome o);

struct InvocationRecord {
  std::string event_id;
  std::string function;
  Outcome outcome = Outcome::Ok;
  double duration_ms = 0.0;
  Json result;  // handler result, or failure detail when the handler supplied one
  std::string error;

  Json to_json() const;
};

/// Thrown by a handler to fail with a structured detail payload.
class FunctionFailure : public Error {
 public:
  FunctionFailure(const std::string& what, Json detail) : Error(what), detail_(std::move(detail)) {}
  const Json& detail() const noexcept { return detail_; }

 private:
  Json detail_;
};

/// External services visible to handlers. Everything a function needs
/// between calls lives here, never in the handler.
struct Services {
  std::shared_ptr<store::DocStore> store;
  std::string collection = "hr";
  hrv::AnalysisConfig analysis;
  double sample_rate_hz = 100.0;
};

class FunctionHost;
class FunctionContext;
using Handler = std::function<Json(const EventEnvelope&, FunctionContext&)>;

struct FunctionDescriptor {
  std::string name;
  std::int64_t timeout_ms = kDefaultTimeoutMs;
  int memory_mb = kDefaultMemoryMb;
  Handler handler;
};

struct HostOptions {
  std::string run_log_path;  // one InvocationRecord per line when set
};

class FunctionHost {
 public:
  explicit FunctionHost(Services services, HostOptions opts = {});
  ~FunctionHost();
  FunctionHost(const FunctionHost&) = delete;
  FunctionHost& operator=(const FunctionHost&) = delete;

  /// Throws RegistrationError for a duplicate name or invalid descriptor.
  void register_function(FunctionDescriptor d);
  bool has_function(const std::string& name) const;
  FunctionDescriptor descriptor(const std::string& name) const;

  /// Runs the handler on a fresh thread. Throws NoSuchFunction; handler
  /// failures and overruns are reported in the record.
  InvocationRecord invoke(const std::string& name, EventEnvelope envelope);
  /// Wraps `payload` in a new envelope from `source`.
  InvocationRecord invoke(const std::string& name, Json payload, const std::string& source);

  /// Called after every invocation, from the invoking thread.
  void set_observer(std::function<void(const InvocationRecord&)> observer);

  std::uint64_t invocation_count(const std::string& name) const;
  const Services& services() const;
  std::string next_event_id();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  friend class FunctionContext;
};

class FunctionContext {
 public:
  FunctionContext(std::shared_ptr<FunctionHost::Impl> host, const FunctionDescriptor& self);

  const Services& services() const;
  store::DocStore& store() const;
  const FunctionDescriptor& self() const { return self_; }
  /// Invokes another function through the host.
  InvocationRecord invoke(const std::string& name, Json payload);

 private:
  std::shared_ptr<FunctionHost::Impl> host_;
  const FunctionDescriptor& self_;
};

// Built-in functions of the health-monitoring application.
inline constexpr const char* kStoreOps = "store_ops";
inline constexpr const char* kMetricsCalc = "metrics_calc";
inline constexpr const char* kSubscriber = "mqtt_subscriber";

/// {op: insert|get_all|delete_all, body?} against the services collection.
/// Inserts are deduplicated by the sensor "seq" field.
Json fn_store_ops(const EventEnvelope& ev, FunctionContext& ctx);
/// Fetches the window via store_ops and returns a metrics report; fails with
/// "insufficient data" when no metrics can be computed.
Json fn_metrics_calc(const EventEnvelope& ev, FunctionContext& ctx);
/// {record, decimation_n}: stores the record, then runs metrics_calc when
/// record.seq is a multiple of decimation_n.
Json fn_subscriber(const EventEnvelope& ev, FunctionContext& ctx);

/// Creates the collection and registers the three functions.
void register_builtin_functions(FunctionHost& host, std::size_t threshold = store::kDefaultThreshold,
                                std::int64_t timeout_ms = kDefaultTimeoutMs, int memory_mb = kDefaultMemoryMb);

struct TriggerOptions {
  mqtt::ClientOptions client;
  int connect_attempts = 5;
  std::chrono::milliseconds initial_backoff{100};
  std::uint8_t qos = 1;
};

/// MQTT subscription bound to a function; messages are delivered to it one
/// at a time in arrival order.
class TriggerHandle {
 public:
  ~TriggerHandle();
  TriggerHandle(const TriggerHandle&) = delete;
  TriggerHandle& operator=(const TriggerHandle&) = delete;

  void stop();
  std::uint64_t delivered() const { return delivered_; }

 private:
  friend std::unique_ptr<TriggerHandle> bind_mqtt_trigger(FunctionHost&, const mqtt::Address&,
                                                          const std::string&, const std::string&,
                                                          std::int64_t, TriggerOptions);
  TriggerHandle() = default;
  void run();

  FunctionHost* host_ = nullptr;
  std::string function_;
  std::int64_t decimation_n_ = 1;
  std::unique_ptr<mqtt::ClientSession> client_;
  std::thread worker_;
  std::atomic<bool> running_{true};
  std::atomic<std::uint64_t> delivered_{0};
};

/// Throws TriggerError when the broker stays unreachable after retries, and
/// NoSuchFunction when `function` is not registered.
std::unique_ptr<TriggerHandle> bind_mqtt_trigger(FunctionHost& host, const mqtt::Address& broker,
                                                 const std::string& topic, const std::string& function,
                                                 std::int64_t decimation_n, TriggerOptions opts = {});

}  // namespace triplex::faas
