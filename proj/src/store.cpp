#include "triplex/store.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "triplex/error.hpp"

namespace triplex::store {

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void DocStore::create_collection(const std::string& name, std::size_t threshold) {
  if (threshold == 0) throw InvalidConfig("collection threshold must be positive");
  std::unique_lock lk(mu_);
  auto& slot = collections_[name];
  if (!slot) slot = std::make_shared<Collection>();
  std::lock_guard clk(slot->mu);
  slot->threshold = threshold;
  while (slot->docs.size() > threshold) slot->docs.pop_front();
}

bool DocStore::has_collection(const std::string& name) const {
  std::shared_lock lk(mu_);
  return collections_.count(name) > 0;
}

std::shared_ptr<DocStore::Collection> DocStore::find(const std::string& name) const {
  std::shared_lock lk(mu_);
  auto it = collections_.find(name);
  if (it == collections_.end()) throw NoSuchCollection("no such collection '" + name + "'");
  return it->second;
}

std::int64_t DocStore::append(Collection& c, Json body, std::int64_t now_ms) {
  const std::int64_t seq = c.next_seq++;
  c.docs.push_back(Document{seq, now_ms, std::move(body)});
  if (c.docs.size() > c.threshold) c.docs.pop_front();
  return seq;
}

std::int64_t DocStore::insert(const std::string& coll, Json body, std::optional<std::int64_t> now_ms) {
  auto c = find(coll);
  const std::int64_t t = now_ms.value_or(wall_clock_ms());
  std::lock_guard lk(c->mu);
  return append(*c, std::move(body), t);
}

std::optional<std::int64_t> DocStore::insert_unique(const std::string& coll, Json body,
                                                    const std::string& key,
                                                    std::optional<std::int64_t> now_ms) {
  auto c = find(coll);
  const std::int64_t t = now_ms.value_or(wall_clock_ms());
  std::optional<std::int64_t> k;
  if (body.is_object()) {
    auto it = body.find(key);
    if (it != body.end() && it->is_number_integer()) k = it->get<std::int64_t>();
  }
  std::lock_guard lk(c->mu);
  if (!k) return append(*c, std::move(body), t);
  if (c->high_water && *k <= *c->high_water) return std::nullopt;
  c->high_water = k;
  return append(*c, std::move(body), t);
}

std::vector<Document> DocStore::get_all(const std::string& coll) const {
  auto c = find(coll);
  std::lock_guard lk(c->mu);
  return {c->docs.begin(), c->docs.end()};
}

std::size_t DocStore::delete_all(const std::string& coll) {
  auto c = find(coll);
  std::lock_guard lk(c->mu);
  const std::size_t n = c->docs.size();
  c->docs.clear();
  return n;
}

std::size_t DocStore::count(const std::string& coll) const {
  auto c = find(coll);
  std::lock_guard lk(c->mu);
  return c->docs.size();
}

std::size_t DocStore::threshold(const std::string& coll) const {
  auto c = find(coll);
  std::lock_guard lk(c->mu);
  return c->threshold;
}

std::optional<std::int64_t> DocStore::high_water(const std::string& coll) const {
  auto c = find(coll);
  std::lock_guard lk(c->mu);
  return c->high_water;
}

void DocStore::write_snapshot(const std::string& coll, const std::string& path) const {
  const auto docs = get_all(coll);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write snapshot " + path);
  for (const auto& d : docs) {
    out << Json{{"seq", d.seq}, {"t_ms", d.inserted_at_ms}, {"body", d.body}}.dump() << '\n';
  }
}

std::size_t DocStore::load_snapshot(const std::string& coll, const std::string& path) {
  auto c = find(coll);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read snapshot " + path);
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      docs.push_back(Document{j.at("seq").get<std::int64_t>(), j.at("t_ms").get<std::int64_t>(), j.at("body")});
    } catch (const Json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::lock_guard lk(c->mu);
  for (auto& d : docs) {
    if (!c->docs.empty() && d.seq <= c->docs.back().seq) {
      throw Error("snapshot seqs must be strictly increasing");
    }
    c->next_seq = std::max(c->next_seq, d.seq + 1);
    c->docs.push_back(std::move(d));
    if (c->docs.size() > c->threshold) c->docs.pop_front();
  }
  return docs.size();
}

}  // namespace triplex::store
