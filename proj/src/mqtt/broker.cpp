#include "triplex/mqtt/broker.hpp"

#include <algorithm>
#include <chrono>

#include "triplex/error.hpp"

namespace triplex::mqtt {

using namespace std::chrono_literals;

Clock steady_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

struct Broker::Session {
  std::uint64_t id = 0;
  Socket sock;
  std::mutex write_mu;
  std::string client_id;
  std::uint16_t keep_alive_s = 0;
  bool connected = false;
  std::atomic<std::int64_t> last_activity_ms{0};
  std::atomic<bool> finished{false};
  std::atomic<bool> expired{false};
  std::vector<Subscription> subs;
  std::uint16_t next_packet_id = 0;  // guarded by write_mu
};

Broker::Broker(BrokerConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.faults.seed) {
  if (!cfg_.clock) cfg_.clock = steady_clock_ms();
}

std::unique_ptr<Broker> Broker::start(BrokerConfig cfg) {
  if (cfg.max_sessions < 1) throw StartupError("max_sessions must be >= 1");
  std::unique_ptr<Broker> b(new Broker(std::move(cfg)));
  b->listener_ = Listener::bind(b->cfg_.bind_address, b->cfg_.port);
  b->acceptor_ = std::thread([raw = b.get()] { raw->accept_loop(); });
  if (b->cfg_.sweep_interval_ms > 0) {
    b->sweeper_ = std::thread([raw = b.get()] { raw->sweep_loop(); });
  }
  return b;
}

Broker::~Broker() { stop(); }

void Broker::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown();
  if (acceptor_.joinable()) acceptor_.join();
  if (sweeper_.joinable()) sweeper_.join();
  {
    std::shared_lock lk(sessions_mu_);
    for (auto& [id, s] : sessions_) s->sock.shutdown();
  }
  std::vector<std::pair<std::shared_ptr<Session>, std::thread>> threads;
  {
    std::lock_guard lk(threads_mu_);
    threads.swap(threads_);
  }
  for (auto& [s, t] : threads) {
    s->sock.shutdown();
    if (t.joinable()) t.join();
  }
}

std::size_t Broker::session_count() const {
  std::shared_lock lk(sessions_mu_);
  return static_cast<std::size_t>(
      std::count_if(sessions_.begin(), sessions_.end(), [](auto& kv) { return kv.second->connected; }));
}

BrokerStats Broker::stats() const {
  std::lock_guard lk(stats_mu_);
  return stats_;
}

void Broker::accept_loop() {
  while (running_) {
    auto sock = listener_.accept(100ms);
    reap_finished();
    if (!sock) continue;
    if (!running_) break;
    auto s = std::make_shared<Session>();
    s->sock = std::move(*sock);
    s->last_activity_ms = cfg_.clock();
    std::lock_guard lk(threads_mu_);
    threads_.emplace_back(s, std::thread([this, s] { serve(s); }));
  }
}

void Broker::reap_finished() {
  std::vector<std::thread> done;
  {
    std::lock_guard lk(threads_mu_);
    for (auto it = threads_.begin(); it != threads_.end();) {
      if (it->first->finished) {
        done.push_back(std::move(it->second));
        it = threads_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& t : done) t.join();
}

void Broker::sweep_loop() {
  while (running_) {
    std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.sweep_interval_ms));
    sweep_expired();
  }
}

std::size_t Broker::sweep_expired() {
  const std::int64_t now = cfg_.clock();
  std::vector<std::shared_ptr<Session>> expired;
  {
    std::shared_lock lk(sessions_mu_);
    for (auto& [id, s] : sessions_) {
      if (s->keep_alive_s == 0) continue;
      const auto limit = static_cast<std::int64_t>(s->keep_alive_s * 1000.0 * cfg_.keep_alive_grace);
      if (now - s->last_activity_ms.load() > limit && !s->expired.exchange(true)) expired.push_back(s);
    }
  }
  for (auto& s : expired) close_session(*s);
  if (!expired.empty()) {
    std::lock_guard lk(stats_mu_);
    stats_.sessions_expired += expired.size();
  }
  return expired.size();
}

void Broker::close_session(Session& s) { s.sock.shutdown(); }

void Broker::send(Session& s, const Packet& p) {
  const Bytes bytes = encode_packet(p);
  std::lock_guard lk(s.write_mu);
  s.sock.send_all(bytes);
}

bool Broker::should_drop_puback() {
  if (cfg_.faults.puback_drop_probability <= 0.0) return false;
  std::lock_guard lk(rng_mu_);
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < cfg_.faults.puback_drop_probability;
}

void Broker::serve(std::shared_ptr<Session> s) {
  PacketReader reader(s->sock);
  try {
    // The first packet must be CONNECT.
    std::optional<Packet> first;
    while (running_ && !first) first = reader.next(100ms);
    if (!first) throw SessionClosed("broker stopping");
    auto* c = std::get_if<Connect>(&*first);
    if (c == nullptr) throw ProtocolError("first packet must be CONNECT");

    {
      std::unique_lock lk(sessions_mu_);
      std::shared_ptr<Session> taken_over;
      for (auto& [id, other] : sessions_) {
        if (!c->client_id.empty() && other->client_id == c->client_id) taken_over = other;
      }
      if (taken_over) {
        // A second connection with the same client id replaces the first.
        taken_over->subs.clear();
        taken_over->connected = false;
        sessions_.erase(taken_over->id);
        taken_over->sock.shutdown();
      }
      if (static_cast<int>(sessions_.size()) >= cfg_.max_sessions) {
        lk.unlock();
        send(*s, ConnAck{false, 3});
        throw SessionClosed("session limit reached");
      }
      s->id = next_session_id_++;
      s->client_id = c->client_id.empty() ? "auto-" + std::to_string(s->id) : c->client_id;
      s->keep_alive_s = c->keep_alive_s;
      s->connected = true;
      sessions_[s->id] = s;
    }
    s->last_activity_ms = cfg_.clock();
    send(*s, ConnAck{false, 0});

    while (running_) {
      auto p = reader.next(200ms);
      if (!p) continue;
      s->last_activity_ms = cfg_.clock();
      if (std::holds_alternative<Disconnect>(*p)) break;
      handle(*s, *p);
    }
  } catch (const Error&) {
    // Protocol violations and peer loss both end the session.
  }
  {
    std::unique_lock lk(sessions_mu_);
    if (auto it = sessions_.find(s->id); it != sessions_.end() && it->second == s) sessions_.erase(it);
    s->connected = false;
    s->subs.clear();
  }
  s->sock.shutdown();
  s->finished = true;
}

void Broker::handle(Session& s, Packet& p) {
  if (auto* pub = std::get_if<Publish>(&p)) {
    if (pub->retain) throw ProtocolError("retained messages are not supported");
    {
      std::lock_guard lk(stats_mu_);
      ++stats_.publishes_received;
    }
    route(*pub);
    if (pub->qos == 1) {
      if (should_drop_puback()) {
        std::lock_guard lk(stats_mu_);
        ++stats_.pubacks_dropped;
      } else {
        send(s, PubAck{*pub->packet_id});
      }
    }
  } else if (auto* sub = std::get_if<Subscribe>(&p)) {
    SubAck ack{sub->packet_id, {}};
    {
      std::unique_lock lk(sessions_mu_);
      for (auto& f : sub->filters) {
        auto existing = std::find_if(s.subs.begin(), s.subs.end(),
                                     [&](const Subscription& x) { return x.filter == f.filter; });
        if (existing != s.subs.end()) {
          existing->qos = f.qos;
        } else {
          s.subs.push_back(f);
        }
        ack.return_codes.push_back(f.qos);
      }
    }
    send(s, ack);
  } else if (std::holds_alternative<PingReq>(p)) {
    send(s, PingResp{});
  } else if (std::holds_alternative<PubAck>(p)) {
    // Acks for our outbound qos 1 deliveries; TCP already guarantees transfer.
  } else {
    throw ProtocolError(std::string("unexpected ") + packet_name(p) + " from client");
  }
}

void Broker::route(const Publish& p) {
  std::vector<std::pair<std::shared_ptr<Session>, std::uint8_t>> targets;
  {
    std::shared_lock lk(sessions_mu_);
    for (auto& [id, s] : sessions_) {
      int granted = -1;
      for (const auto& sub : s->subs) {
        if (topic_matches(sub.filter, p.topic)) granted = std::max<int>(granted, sub.qos);
      }
      if (granted >= 0) targets.emplace_back(s, static_cast<std::uint8_t>(granted));
    }
  }
  std::uint64_t delivered = 0;
  for (auto& [target, granted] : targets) {
    Publish out;
    out.topic = p.topic;
    out.payload = p.payload;
    out.qos = std::min(p.qos, granted);
    // A redelivered publish keeps its dup marker so subscribers can tell copies apart.
    out.dup = out.qos == 1 && p.dup;
    try {
      Bytes bytes;
      {
        std::lock_guard lk(target->write_mu);
        if (out.qos == 1) {
          if (++target->next_packet_id == 0) target->next_packet_id = 1;
          out.packet_id = target->next_packet_id;
        }
        bytes = encode_packet(out);
        target->sock.send_all(bytes);
      }
      ++delivered;
    } catch (const Error&) {
      target->sock.shutdown();
    }
  }
  std::lock_guard lk(stats_mu_);
  stats_.deliveries += delivered;
}

}  // namespace triplex::mqtt
