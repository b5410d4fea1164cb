#include "triplex/mqtt/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "triplex/error.hpp"

namespace triplex::mqtt {

namespace {

std::string errno_text() { return std::strerror(errno); }

int poll_one(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  while (true) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) return rc;
    return p.revents;
  }
}

sockaddr_in resolve(const Address& addr) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  const std::string host = addr.host == "localhost" ? "127.0.0.1" : addr.host;
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw SessionClosed("cannot resolve host '" + addr.host + "'");
  }
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return sa;
}

}  // namespace

Address Address::parse(std::string_view text) {
  Address a;
  std::string_view port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
    a.host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || value > 65535 ||
      a.host.empty()) {
    throw InvalidConfig("bad address '" + std::string(text) + "', expected host:port");
  }
  a.port = static_cast<std::uint16_t>(value);
  return a;
}

std::string Address::to_string() const { return host + ":" + std::to_string(port); }

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

Socket Socket::connect_tcp(const Address& addr, std::chrono::milliseconds timeout) {
  const sockaddr_in sa = resolve(addr);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw SessionClosed("socket(): " + errno_text());

  const int flags = ::fcntl(s.fd_, F_GETFL, 0);
  ::fcntl(s.fd_, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof sa);
  if (rc < 0 && errno != EINPROGRESS) {
    throw SessionClosed("connect to " + addr.to_string() + ": " + errno_text());
  }
  if (rc < 0) {
    if (poll_one(s.fd_, POLLOUT, timeout) <= 0) {
      throw SessionClosed("connect to " + addr.to_string() + " timed out");
    }
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd_, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw SessionClosed("connect to " + addr.to_string() + ": " + std::strerror(err));
    }
  }
  ::fcntl(s.fd_, F_SETFL, flags);
  const int one = 1;
  ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

void Socket::send_all(const Bytes& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw SessionClosed("send failed: " + errno_text());
    sent += static_cast<std::size_t>(n);
  }
}

Socket::RecvStatus Socket::recv_some(Bytes& buf, std::chrono::milliseconds timeout) {
  if (fd_ < 0) return RecvStatus::Closed;
  const int ev = poll_one(fd_, POLLIN, timeout);
  if (ev == 0) return RecvStatus::Timeout;
  if (ev < 0) return RecvStatus::Closed;
  std::uint8_t chunk[16384];
  while (true) {
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return RecvStatus::Closed;
    buf.insert(buf.end(), chunk, chunk + n);
    return RecvStatus::Data;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener Listener::bind(const std::string& host, std::uint16_t port, int backlog) {
  Listener l;
  l.sock_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!l.sock_.valid()) throw StartupError("socket(): " + errno_text());
  const int one = 1;
  ::setsockopt(l.sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &sa.sin_addr) != 1) {
    throw StartupError("bind address must be an IPv4 literal, got '" + host + "'");
  }
  if (::bind(l.sock_.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
    throw StartupError("bind " + h + ":" + std::to_string(port) + ": " + errno_text());
  }
  if (::listen(l.sock_.fd(), backlog) < 0) throw StartupError("listen: " + errno_text());

  socklen_t len = sizeof sa;
  ::getsockname(l.sock_.fd(), reinterpret_cast<sockaddr*>(&sa), &len);
  l.port_ = ntohs(sa.sin_port);
  return l;
}

std::optional<Socket> Listener::accept(std::chrono::milliseconds timeout) {
  if (!sock_.valid()) return std::nullopt;
  const int ev = poll_one(sock_.fd(), POLLIN, timeout);
  if (ev <= 0 || (ev & (POLLERR | POLLHUP | POLLNVAL))) return std::nullopt;
  const int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Socket(fd);
}

void Listener::shutdown() { sock_.shutdown(); }

std::optional<Packet> PacketReader::next(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto d = decode_packet(buf_)) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(d->consumed));
      return std::move(d->packet);
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    const auto status = sock_.recv_some(buf_, std::max(left, std::chrono::milliseconds(0)));
    if (status == Socket::RecvStatus::Closed) throw SessionClosed("connection closed by peer");
    if (status == Socket::RecvStatus::Timeout) return std::nullopt;
  }
}

}  // namespace triplex::mqtt
