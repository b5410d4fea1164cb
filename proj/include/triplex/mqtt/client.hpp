#pragma once

// Blocking MQTT client session. Publishes with qos 1 wait for the PUBACK and
// are retransmitted with the dup flag when it does not arrive in time.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "triplex/mqtt/codec.hpp"
#include "triplex/mqtt/net.hpp"

namespace triplex::mqtt {

struct ClientOptions {
  std::chrono::milliseconds ack_timeout{2000};
  int max_attempts = 3;
  std::chrono::milliseconds connect_timeout{5000};
  /// Send PINGREQ when idle for half the keep-alive period.
  bool auto_ping = true;
};

struct PublishResult {
  std::optional<std::uint16_t> packet_id;
  int attempts = 1;
};

class ClientSession {
 public:
  /// Connects and waits for CONNACK. Throws SessionClosed or ProtocolError.
  static std::unique_ptr<ClientSession> connect(const Address& addr, std::string client_id,
                                                std::uint16_t keep_alive_s,
                                                ClientOptions opts = {});
  ~ClientSession();
  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;

  /// Returns the granted qos. Throws DeliveryError when the broker refuses.
  std::uint8_t subscribe(const std::string& filter, std::uint8_t qos);

  /// qos 1 blocks until acknowledged; throws DeliveryError after max_attempts.
  PublishResult publish(const std::string& topic, const Bytes& payload, std::uint8_t qos);
  PublishResult publish(const std::string& topic, std::string_view payload, std::uint8_t qos);

  /// Drains inbound messages in arrival order, waiting up to `wait` for the
  /// first one. Throws SessionClosed once the connection is gone and the
  /// queue is empty.
  std::vector<Publish> poll(std::chrono::milliseconds wait = std::chrono::milliseconds(0));

  /// Sends DISCONNECT and closes the socket.
  void disconnect();
  bool connected() const { return !closed_; }
  const std::string& client_id() const { return client_id_; }

 private:
  ClientSession() = default;
  void reader_loop();
  void send(const Packet& p);
  std::uint16_t next_id();
  void mark_closed();

  Socket sock_;
  std::string client_id_;
  std::uint16_t keep_alive_s_ = 0;
  ClientOptions opts_;
  std::thread reader_;

  std::mutex write_mu_;
  std::atomic<std::int64_t> last_send_ms_{0};

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Publish> inbound_;
  std::set<std::uint16_t> acked_;
  std::map<std::uint16_t, SubAck> subacks_;
  std::uint16_t packet_id_ = 0;
  std::atomic<bool> closed_{false};
  std::atomic<bool> stopping_{false};
};

}  // namespace triplex::mqtt
