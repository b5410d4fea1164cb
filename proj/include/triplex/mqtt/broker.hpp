#pragma once

// Embedded MQTT 3.1.1 broker (qos 0/1, clean sessions only).

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "triplex/mqtt/codec.hpp"
#include "triplex/mqtt/net.hpp"

namespace triplex::mqtt {

/// Milliseconds on an arbitrary monotonic time base.
using Clock = std::function<std::int64_t()>;
Clock steady_clock_ms();

struct FaultInjection {
  /// Probability that a PUBACK owed to a publisher is silently dropped.
  double puback_drop_probability = 0.0;
  std::uint64_t seed = 1;
};

struct BrokerConfig {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 1883;  // 0 picks an ephemeral port
  int max_sessions = 64;
  double keep_alive_grace = 1.5;
  /// Period of the keep-alive sweeper thread; 0 disables it (tests call sweep_expired()).
  int sweep_interval_ms = 250;
  Clock clock;  // defaults to the steady clock
  FaultInjection faults;
};

struct BrokerStats {
  std::uint64_t publishes_received = 0;
  std::uint64_t deliveries = 0;
  std::uint64_t pubacks_dropped = 0;
  std::uint64_t sessions_expired = 0;
};

class Broker {
 public:
  /// Binds and starts serving. Throws StartupError on bind failure.
  static std::unique_ptr<Broker> start(BrokerConfig cfg);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Closes every session and the listener; idempotent.
  void stop();

  std::uint16_t port() const { return listener_.port(); }
  Address address() const { return {cfg_.bind_address, port()}; }
  std::size_t session_count() const;
  BrokerStats stats() const;

  /// Drops every session silent for longer than keep_alive x grace.
  /// Returns the number of sessions dropped.
  std::size_t sweep_expired();

 private:
  struct Session;

  explicit Broker(BrokerConfig cfg);
  void accept_loop();
  void sweep_loop();
  void serve(std::shared_ptr<Session> s);
  void handle(Session& s, Packet& p);
  void route(const Publish& p);
  void send(Session& s, const Packet& p);
  void close_session(Session& s);
  bool should_drop_puback();
  void reap_finished();

  BrokerConfig cfg_;
  Listener listener_;
  std::atomic<bool> running_{true};
  std::thread acceptor_;
  std::thread sweeper_;

  mutable std::shared_mutex sessions_mu_;  // guards sessions_ and every Session::subs
  std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_id_ = 1;

  std::mutex threads_mu_;
  std::vector<std::pair<std::shared_ptr<Session>, std::thread>> threads_;

  std::mutex rng_mu_;
  std::mt19937_64 rng_;

  mutable std::mutex stats_mu_;
  BrokerStats stats_;
};

inline std::unique_ptr<Broker> broker_start(BrokerConfig cfg) { return Broker::start(std::move(cfg)); }
inline void broker_stop(Broker& b) { b.stop(); }

}  // namespace triplex::mqtt
