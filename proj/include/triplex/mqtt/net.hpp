#pragma once

// Thin RAII layer over POSIX TCP sockets plus an incremental packet reader.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "triplex/mqtt/codec.hpp"

namespace triplex::mqtt {

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 1883;

  /// Parses "host:port" or "port". Throws InvalidConfig.
  static Address parse(std::string_view text);
  std::string to_string() const;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  /// Throws SessionClosed when the peer cannot be reached.
  static Socket connect_tcp(const Address& addr, std::chrono::milliseconds timeout);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  /// Throws SessionClosed on a broken connection.
  void send_all(const Bytes& data);

  enum class RecvStatus { Data, Timeout, Closed };
  /// Appends whatever is available within `timeout` to `buf`.
  RecvStatus recv_some(Bytes& buf, std::chrono::milliseconds timeout);

  /// Wakes any thread blocked in recv; safe to call from another thread.
  void shutdown();
  void close();

 private:
  int fd_ = -1;
};

class Listener {
 public:
  /// Port 0 picks an ephemeral port. Throws StartupError.
  static Listener bind(const std::string& host, std::uint16_t port, int backlog = 64);

  std::uint16_t port() const { return port_; }
  /// std::nullopt on timeout or after shutdown().
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void shutdown();

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

/// Accumulates bytes from a socket and yields complete packets.
class PacketReader {
 public:
  explicit PacketReader(Socket& sock) : sock_(sock) {}

  /// A packet, or std::nullopt when `timeout` passed without one.
  /// Throws SessionClosed on EOF and ProtocolError on malformed bytes.
  std::optional<Packet> next(std::chrono::milliseconds timeout);

 private:
  Socket& sock_;
  Bytes buf_;
};

}  // namespace triplex::mqtt
