#include "triplex/mqtt/client.hpp"

#include "triplex/error.hpp"

namespace triplex::mqtt {

using namespace std::chrono_literals;

namespace {
std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}
}  // namespace

std::unique_ptr<ClientSession> ClientSession::connect(const Address& addr, std::string client_id,
                                                      std::uint16_t keep_alive_s, ClientOptions opts) {
  std::unique_ptr<ClientSession> c(new ClientSession());
  c->sock_ = Socket::connect_tcp(addr, opts.connect_timeout);
  c->client_id_ = std::move(client_id);
  c->keep_alive_s_ = keep_alive_s;
  c->opts_ = opts;
  c->send(Connect{c->client_id_, keep_alive_s});

  PacketReader reader(c->sock_);
  auto p = reader.next(opts.connect_timeout);
  if (!p) throw SessionClosed("no CONNACK from " + addr.to_string());
  auto* ack = std::get_if<ConnAck>(&*p);
  if (ack == nullptr) throw ProtocolError("expected CONNACK");
  if (ack->return_code != 0) {
    throw SessionClosed("connection refused, return code " + std::to_string(ack->return_code));
  }
  c->reader_ = std::thread([raw = c.get()] { raw->reader_loop(); });
  return c;
}

ClientSession::~ClientSession() {
  stopping_ = true;
  sock_.shutdown();
  if (reader_.joinable()) reader_.join();
}

void ClientSession::send(const Packet& p) {
  const Bytes bytes = encode_packet(p);
  std::lock_guard lk(write_mu_);
  if (closed_) throw SessionClosed("session closed");
  sock_.send_all(bytes);
  last_send_ms_ = now_ms();
}

std::uint16_t ClientSession::next_id() {
  std::lock_guard lk(mu_);
  if (++packet_id_ == 0) packet_id_ = 1;
  return packet_id_;
}

void ClientSession::mark_closed() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

void ClientSession::reader_loop() {
  PacketReader reader(sock_);
  const auto tick = keep_alive_s_ > 0
                        ? std::chrono::milliseconds(std::min<std::int64_t>(keep_alive_s_ * 250, 200))
                        : 200ms;
  try {
    while (!stopping_) {
      auto p = reader.next(tick);
      if (!p) {
        if (opts_.auto_ping && keep_alive_s_ > 0 &&
            now_ms() - last_send_ms_ >= static_cast<std::int64_t>(keep_alive_s_) * 500) {
          send(PingReq{});
        }
        continue;
      }
      if (auto* pub = std::get_if<Publish>(&*p)) {
        const auto id = pub->packet_id;
        const bool ack = pub->qos == 1;
        {
          std::lock_guard lk(mu_);
          inbound_.push_back(std::move(*pub));
        }
        cv_.notify_all();
        if (ack) send(PubAck{*id});
      } else if (auto* a = std::get_if<PubAck>(&*p)) {
        {
          std::lock_guard lk(mu_);
          acked_.insert(a->packet_id);
        }
        cv_.notify_all();
      } else if (auto* s = std::get_if<SubAck>(&*p)) {
        {
          std::lock_guard lk(mu_);
          subacks_[s->packet_id] = *s;
        }
        cv_.notify_all();
      } else if (std::holds_alternative<PingResp>(*p)) {
        // keep-alive answered
      } else {
        throw ProtocolError(std::string("unexpected ") + packet_name(*p) + " from broker");
      }
    }
  } catch (const Error&) {
  }
  mark_closed();
  sock_.shutdown();
}

std::uint8_t ClientSession::subscribe(const std::string& filter, std::uint8_t qos) {
  const std::uint16_t id = next_id();
  send(Subscribe{id, {{filter, qos}}});
  std::unique_lock lk(mu_);
  const bool got = cv_.wait_for(lk, opts_.ack_timeout * opts_.max_attempts,
                                [&] { return subacks_.count(id) > 0 || closed_; });
  if (closed_ && subacks_.count(id) == 0) throw SessionClosed("session closed during subscribe");
  if (!got) throw DeliveryError("no SUBACK for '" + filter + "'");
  const std::uint8_t rc = subacks_[id].return_codes.at(0);
  subacks_.erase(id);
  if (rc == kSubAckFailure) throw DeliveryError("broker refused subscription '" + filter + "'");
  return rc;
}

PublishResult ClientSession::publish(const std::string& topic, std::string_view payload,
                                     std::uint8_t qos) {
  return publish(topic, Bytes(payload.begin(), payload.end()), qos);
}

PublishResult ClientSession::publish(const std::string& topic, const Bytes& payload, std::uint8_t qos) {
  Publish p;
  p.topic = topic;
  p.payload = payload;
  p.qos = qos;
  if (qos == 0) {
    send(p);
    return {};
  }
  const std::uint16_t id = next_id();
  {
    std::lock_guard lk(mu_);
    acked_.erase(id);  // a stale ack from a wrapped-around id
  }
  p.packet_id = id;
  for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
    p.dup = attempt > 1;
    send(p);
    std::unique_lock lk(mu_);
    if (cv_.wait_for(lk, opts_.ack_timeout, [&] { return acked_.count(id) > 0 || closed_; })) {
      if (acked_.erase(id) > 0) return {id, attempt};
      throw SessionClosed("session closed awaiting PUBACK");
    }
  }
  throw DeliveryError("no PUBACK for packet " + std::to_string(id) + " after " +
                      std::to_string(opts_.max_attempts) + " attempts");
}

std::vector<Publish> ClientSession::poll(std::chrono::milliseconds wait) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, wait, [&] { return !inbound_.empty() || closed_; });
  if (inbound_.empty() && closed_) throw SessionClosed("session closed");
  std::vector<Publish> out(std::make_move_iterator(inbound_.begin()),
                           std::make_move_iterator(inbound_.end()));
  inbound_.clear();
  return out;
}

void ClientSession::disconnect() {
  if (closed_) return;
  try {
    send(Disconnect{});
  } catch (const Error&) {
  }
  stopping_ = true;
  sock_.shutdown();
  if (reader_.joinable()) reader_.join();
}

}  // namespace triplex::mqtt
