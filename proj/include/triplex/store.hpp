#pragma once

// In-memory document store with capped (sliding-window) collections.
// Inserting into a full collection evicts the lowest-seq document in the
// same critical section, so readers never observe count > threshold.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace triplex::store {

using Json = nlohmann::json;

inline constexpr std::size_t kDefaultThreshold = 3000;

struct Document {
  std::int64_t seq = 0;
  std::int64_t inserted_at_ms = 0;
  Json body;

  bool operator==(const Document&) const = default;
};

class DocStore {
 public:
  DocStore() = default;
  DocStore(const DocStore&) = delete;
  DocStore& operator=(const DocStore&) = delete;

  /// Creates the collection, or resets its threshold when it exists.
  void create_collection(const std::string& name, std::size_t threshold = kDefaultThreshold);
  bool has_collection(const std::string& name) const;

  /// Appends `body` and returns its store-assigned seq. Throws NoSuchCollection.
  std::int64_t insert(const std::string& coll, Json body, std::optional<std::int64_t> now_ms = {});

  /// Inserts only when body[key] is an integer greater than every key value
  /// previously accepted by this collection; returns std::nullopt for a
  /// duplicate or stale record. A body without an integer `key` is inserted
  /// unconditionally. The high-water mark survives eviction and delete_all.
  std::optional<std::int64_t> insert_unique(const std::string& coll, Json body, const std::string& key,
                                            std::optional<std::int64_t> now_ms = {});

  std::vector<Document> get_all(const std::string& coll) const;
  std::size_t delete_all(const std::string& coll);
  std::size_t count(const std::string& coll) const;
  std::size_t threshold(const std::string& coll) const;

  /// Highest key accepted by insert_unique, if any.
  std::optional<std::int64_t> high_water(const std::string& coll) const;

  /// Writes one line per document: {"seq":..,"t_ms":..,"body":..}.
  void write_snapshot(const std::string& coll, const std::string& path) const;
  /// Appends the documents of a snapshot file, preserving their seqs.
  std::size_t load_snapshot(const std::string& coll, const std::string& path);

 private:
  struct Collection {
    mutable std::mutex mu;
    std::size_t threshold = kDefaultThreshold;
    std::deque<Document> docs;
    std::int64_t next_seq = 1;
    std::optional<std::int64_t> high_water;
  };

  std::shared_ptr<Collection> find(const std::string& name) const;
  static std::int64_t append(Collection& c, Json body, std::int64_t now_ms);

  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Collection>> collections_;
};

/// Milliseconds since the Unix epoch.
std::int64_t wall_clock_ms();

}  // namespace triplex::store
