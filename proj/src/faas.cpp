#include "triplex/faas.hpp"

#include <condition_variable>

#include "triplex/report.hpp"

namespace triplex::faas {

using namespace std::chrono_literals;

Json EventEnvelope::to_json() const {
  return Json{{"event_id", event_id}, {"source", source}, {"ts_ms", ts_ms}, {"payload", payload}};
}

EventEnvelope EventEnvelope::from_json(const Json& j) {
  try {
    return {j.at("event_id").get<std::string>(), j.at("source").get<std::string>(),
            j.at("ts_ms").get<std::int64_t>(), j.at("payload")};
  } catch (const Json::exception& e) {
    throw InvalidConfig(std::string("bad envelope: ") + e.what());
  }
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Ok:
      return "ok";
    case Outcome::Error:
      return "error";
    case Outcome::Timeout:
      return "timeout";
  }
  return "?";
}

Json InvocationRecord::to_json() const {
  Json j{{"event_id", event_id},
         {"function", function},
         {"outcome", to_string(outcome)},
         {"duration_ms", duration_ms}};
  if (outcome == Outcome::Ok) {
    j["result"] = result;
  } else {
    j["error"] = error;
    if (!result.is_null()) j["detail"] = result;
  }
  return j;
}

struct FunctionHost::Impl {
  Services services;
  HostOptions opts;

  mutable std::mutex mu;
  std::map<std::string, FunctionDescriptor> functions;
  std::map<std::string, std::uint64_t> counts;
  std::function<void(const InvocationRecord&)> observer;

  std::mutex log_mu;
  std::ofstream log;

  std::atomic<std::uint64_t> next_event{1};

  std::string event_id() { return "evt-" + std::to_string(next_event++); }

  InvocationRecord invoke(const std::shared_ptr<Impl>& self, const std::string& name, EventEnvelope env);
};

namespace {

// Shared between the invoking thread and the handler thread, which may
// outlive the wait when the handler overruns.
struct Call {
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  bool ok = false;
  Json result;
  std::string error;
};

}  // namespace

InvocationRecord FunctionHost::Impl::invoke(const std::shared_ptr<Impl>& self, const std::string& name,
                                            EventEnvelope env) {
  FunctionDescriptor desc;
  std::function<void(const InvocationRecord&)> obs;
  {
    std::lock_guard lk(mu);
    auto it = functions.find(name);
    if (it == functions.end()) throw NoSuchFunction("no such function '" + name + "'");
    desc = it->second;
    ++counts[name];
    obs = observer;
  }
  if (env.event_id.empty()) env.event_id = event_id();

  InvocationRecord rec;
  rec.event_id = env.event_id;
  rec.function = name;

  auto call = std::make_shared<Call>();
  const auto start = std::chrono::steady_clock::now();
  std::thread worker([self, desc, env = std::move(env), call] {
    FunctionContext ctx(self, desc);
    Json result;
    std::string error;
    bool ok = false;
    try {
      result = desc.handler(env, ctx);
      ok = true;
    } catch (const FunctionFailure& e) {
      error = e.what();
      result = e.detail();
    } catch (const std::exception& e) {
      error = e.what();
    } catch (...) {
      error = "unknown exception";
    }
    {
      std::lock_guard lk(call->mu);
      call->done = true;
      call->ok = ok;
      call->result = std::move(result);
      call->error = std::move(error);
    }
    call->cv.notify_all();
  });

  std::unique_lock lk(call->mu);
  const bool finished =
      call->cv.wait_for(lk, std::chrono::milliseconds(desc.timeout_ms), [&] { return call->done; });
  rec.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (finished && rec.duration_ms <= static_cast<double>(desc.timeout_ms)) {
    lk.unlock();
    worker.join();
    rec.outcome = call->ok ? Outcome::Ok : Outcome::Error;
    if (call->ok) {
      rec.result = std::move(call->result);
    } else {
      rec.error = call->error;
      rec.result = std::move(call->result);
    }
  } else {
    lk.unlock();
    if (finished) {
      worker.join();
    } else {
      worker.detach();  // result discarded; the thread owns its shared state
    }
    rec.outcome = Outcome::Timeout;
    rec.error = "timed out after " + std::to_string(desc.timeout_ms) + " ms";
  }

  if (!opts.run_log_path.empty()) {
    std::lock_guard lk2(log_mu);
    if (!log.is_open()) log.open(opts.run_log_path, std::ios::app);
    log << rec.to_json().dump() << '\n';
    log.flush();
  }
  if (obs) obs(rec);
  return rec;
}

FunctionHost::FunctionHost(Services services, HostOptions opts) : impl_(std::make_shared<Impl>()) {
  if (!services.store) services.store = std::make_shared<store::DocStore>();
  services.analysis.validate();
  impl_->services = std::move(services);
  impl_->opts = std::move(opts);
}

FunctionHost::~FunctionHost() = default;

void FunctionHost::register_function(FunctionDescriptor d) {
  if (d.name.empty()) throw RegistrationError("function name must not be empty");
  if (d.timeout_ms <= 0) throw RegistrationError("timeout_ms must be positive");
  if (!d.handler) throw RegistrationError("function '" + d.name + "' has no handler");
  std::lock_guard lk(impl_->mu);
  if (impl_->functions.count(d.name) > 0) {
    throw RegistrationError("function '" + d.name + "' is already registered");
  }
  const std::string name = d.name;
  impl_->functions.emplace(name, std::move(d));
}

bool FunctionHost::has_function(const std::string& name) const {
  std::lock_guard lk(impl_->mu);
  return impl_->functions.count(name) > 0;
}

FunctionDescriptor FunctionHost::descriptor(const std::string& name) const {
  std::lock_guard lk(impl_->mu);
  auto it = impl_->functions.find(name);
  if (it == impl_->functions.end()) throw NoSuchFunction("no such function '" + name + "'");
  return it->second;
}

InvocationRecord FunctionHost::invoke(const std::string& name, EventEnvelope envelope) {
  return impl_->invoke(impl_, name, std::move(envelope));
}

InvocationRecord FunctionHost::invoke(const std::string& name, Json payload, const std::string& source) {
  return invoke(name, EventEnvelope{next_event_id(), source, store::wall_clock_ms(), std::move(payload)});
}

void FunctionHost::set_observer(std::function<void(const InvocationRecord&)> observer) {
  std::lock_guard lk(impl_->mu);
  impl_->observer = std::move(observer);
}

std::uint64_t FunctionHost::invocation_count(const std::string& name) const {
  std::lock_guard lk(impl_->mu);
  auto it = impl_->counts.find(name);
  return it == impl_->counts.end() ? 0 : it->second;
}

const Services& FunctionHost::services() const { return impl_->services; }

std::string FunctionHost::next_event_id() { return impl_->event_id(); }

FunctionContext::FunctionContext(std::shared_ptr<FunctionHost::Impl> host, const FunctionDescriptor& self)
    : host_(std::move(host)), self_(self) {}

const Services& FunctionContext::services() const { return host_->services; }

store::DocStore& FunctionContext::store() const { return *host_->services.store; }

InvocationRecord FunctionContext::invoke(const std::string& name, Json payload) {
  return host_->invoke(
      host_, name, EventEnvelope{host_->event_id(), self_.name, store::wall_clock_ms(), std::move(payload)});
}

// --- built-in functions -----------------------------------------------------

Json fn_store_ops(const EventEnvelope& ev, FunctionContext& ctx) {
  const Json& p = ev.payload;
  if (!p.is_object() || !p.contains("op") || !p["op"].is_string()) {
    throw Error("store_ops: payload needs a string 'op'");
  }
  const std::string op = p["op"].get<std::string>();
  const std::string& coll = ctx.services().collection;
  if (op == "insert") {
    if (!p.contains("body")) throw Error("store_ops: insert needs a 'body'");
    auto seq = ctx.store().insert_unique(coll, p["body"], "seq");
    return Json{{"inserted", seq.has_value()}, {"seq", seq ? Json(*seq) : Json(nullptr)}};
  }
  if (op == "get_all") {
    Json docs = Json::array();
    for (const auto& d : ctx.store().get_all(coll)) {
      docs.push_back(Json{{"seq", d.seq}, {"inserted_at_ms", d.inserted_at_ms}, {"body", d.body}});
    }
    return Json{{"documents", std::move(docs)}};
  }
  if (op == "delete_all") return Json{{"removed", ctx.store().delete_all(coll)}};
  throw Error("store_ops: unknown op '" + op + "'");
}

Json fn_metrics_calc(const EventEnvelope&, FunctionContext& ctx) {
  const InvocationRecord got = ctx.invoke(kStoreOps, Json{{"op", "get_all"}});
  if (got.outcome != Outcome::Ok) throw Error("metrics_calc: store_ops failed: " + got.error);
  std::vector<Json> records;
  for (const auto& d : got.result.at("documents")) records.push_back(d.at("body"));
  const MetricsReport r =
      analyze_window(records, ctx.services().analysis, ctx.services().sample_rate_hz, Mode::Faas);
  if (r.status != kStatusOk) throw FunctionFailure("insufficient data", r.to_json());
  return r.to_json();
}

Json fn_subscriber(const EventEnvelope& ev, FunctionContext& ctx) {
  const Json& p = ev.payload;
  if (!p.is_object() || !p.contains("record")) throw Error("subscriber: payload needs a 'record'");
  const SensorRecord rec = SensorRecord::from_json(p["record"]);
  const std::int64_t decimation = p.value("decimation_n", std::int64_t{1});
  if (decimation < 1) throw Error("subscriber: decimation_n must be >= 1");

  const InvocationRecord stored = ctx.invoke(kStoreOps, Json{{"op", "insert"}, {"body", p["record"]}});
  if (stored.outcome != Outcome::Ok) throw Error("subscriber: store_ops failed: " + stored.error);
  const bool inserted = stored.result.at("inserted").get<bool>();

  Json out{{"inserted", inserted}, {"metrics_event", nullptr}};
  if (inserted && rec.seq % decimation == 0) {
    const InvocationRecord m = ctx.invoke(kMetricsCalc, Json::object());
    out["metrics_event"] = m.event_id;
    out["metrics_outcome"] = to_string(m.outcome);
  }
  return out;
}

void register_builtin_functions(FunctionHost& host, std::size_t threshold, std::int64_t timeout_ms,
                                int memory_mb) {
  host.services().store->create_collection(host.services().collection, threshold);
  host.register_function({kStoreOps, timeout_ms, memory_mb, &fn_store_ops});
  host.register_function({kMetricsCalc, timeout_ms, memory_mb, &fn_metrics_calc});
  host.register_function({kSubscriber, timeout_ms, memory_mb, &fn_subscriber});
}

// --- MQTT trigger -----------------------------------------------------------

std::unique_ptr<TriggerHandle> bind_mqtt_trigger(FunctionHost& host, const mqtt::Address& broker,
                                                 const std::string& topic, const std::string& function,
                                                 std::int64_t decimation_n, TriggerOptions opts) {
  if (!host.has_function(function)) throw NoSuchFunction("no such function '" + function + "'");
  if (decimation_n < 1) throw TriggerError("decimation_n must be >= 1");

  std::unique_ptr<TriggerHandle> t(new TriggerHandle());
  t->host_ = &host;
  t->function_ = function;
  t->decimation_n_ = decimation_n;

  auto backoff = opts.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= opts.connect_attempts; ++attempt) {
    try {
      t->client_ = mqtt::ClientSession::connect(broker, "trigger-" + function + "-" + host.next_event_id(),
                                                30, opts.client);
      t->client_->subscribe(topic, opts.qos);
      break;
    } catch (const Error& e) {
      t->client_.reset();
      last_error = e.what();
      if (attempt < opts.connect_attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
  }
  if (!t->client_) {
    throw TriggerError("cannot bind trigger to " + broker.to_string() + ": " + last_error);
  }
  t->worker_ = std::thread([raw = t.get()] { raw->run(); });
  return t;
}

void TriggerHandle::run() {
  while (running_) {
    std::vector<mqtt::Publish> msgs;
    try {
      msgs = client_->poll(100ms);
    } catch (const Error&) {
      return;
    }
    for (auto& m : msgs) {
      const std::string text(m.payload.begin(), m.payload.end());
      Json record = Json::parse(text, nullptr, false);
      if (record.is_discarded()) record = text;
      ++delivered_;
      host_->invoke(function_, Json{{"record", std::move(record)}, {"decimation_n", decimation_n_}},
                    "mqtt:" + m.topic);
    }
  }
}

void TriggerHandle::stop() {
  running_ = false;
  if (worker_.joinable()) worker_.join();
  if (client_) client_->disconnect();
}

TriggerHandle::~TriggerHandle() { stop(); }

}  // namespace triplex::faas
