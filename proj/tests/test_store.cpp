#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <random>
#include <thread>

#include "store_oracle.hpp"
#include "triplex/error.hpp"
#include "triplex/store.hpp"

using namespace triplex;
using namespace triplex::store;

namespace {

std::vector<std::int64_t> seqs(const std::vector<Document>& docs) {
  std::vector<std::int64_t> out;
  for (const auto& d : docs) out.push_back(d.seq);
  return out;
}

}  // namespace

TEST(Store, FifoEviction) {
  DocStore s;
  s.create_collection("c", 5);
  for (int i = 1; i <= 6; ++i) EXPECT_EQ(s.insert("c", Json{{"v", i}}), i);
  EXPECT_EQ(seqs(s.get_all("c")), (std::vector<std::int64_t>{2, 3, 4, 5, 6}));
  EXPECT_EQ(s.get_all("c").front().body["v"], 2);
}

TEST(Store, ThresholdOne) {
  DocStore s;
  s.create_collection("c", 1);
  s.insert("c", "first");
  s.insert("c", "second");
  const auto all = s.get_all("c");
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].body, "second");
}

TEST(Store, SixThousandAtDefaultThreshold) {
  DocStore s;
  s.create_collection("hr");
  EXPECT_EQ(s.threshold("hr"), 3000u);
  for (int i = 0; i < 6000; ++i) s.insert("hr", Json{{"seq", i + 1}});
  EXPECT_EQ(s.count("hr"), 3000u);
  EXPECT_EQ(s.get_all("hr").front().seq, 3001);
}

TEST(Store, EmptyAndOrder) {
  DocStore s;
  s.create_collection("c");
  EXPECT_TRUE(s.get_all("c").empty());
  s.insert("c", "A");
  s.insert("c", "B");
  const auto all = s.get_all("c");
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].body, "A");
  EXPECT_EQ(all[1].body, "B");
}

TEST(Store, DeleteAllKeepsCounter) {
  DocStore s;
  s.create_collection("c");
  EXPECT_EQ(s.delete_all("c"), 0u);
  for (int i = 0; i < 3; ++i) s.insert("c", i);
  EXPECT_EQ(s.delete_all("c"), 3u);
  EXPECT_TRUE(s.get_all("c").empty());
  EXPECT_EQ(s.insert("c", "x"), 4);
}

TEST(Store, UnknownCollection) {
  DocStore s;
  EXPECT_THROW(s.insert("nope", 1), NoSuchCollection);
  EXPECT_THROW(s.get_all("nope"), NoSuchCollection);
  EXPECT_THROW(s.delete_all("nope"), NoSuchCollection);
  EXPECT_THROW(s.count("nope"), NoSuchCollection);
  EXPECT_FALSE(s.has_collection("nope"));
  EXPECT_THROW(s.create_collection("bad", 0), InvalidConfig);
}

TEST(Store, InsertUniqueHighWater) {
  DocStore s;
  s.create_collection("c", 2);
  EXPECT_FALSE(s.high_water("c"));
  EXPECT_TRUE(s.insert_unique("c", Json{{"seq", 1}}, "seq"));
  EXPECT_TRUE(s.insert_unique("c", Json{{"seq", 2}}, "seq"));
  EXPECT_FALSE(s.insert_unique("c", Json{{"seq", 2}}, "seq"));
  EXPECT_TRUE(s.insert_unique("c", Json{{"seq", 3}}, "seq"));
  // seq 1 has been evicted; the mark still rejects it
  EXPECT_FALSE(s.insert_unique("c", Json{{"seq", 1}}, "seq"));
  s.delete_all("c");
  EXPECT_FALSE(s.insert_unique("c", Json{{"seq", 3}}, "seq"));
  EXPECT_EQ(*s.high_water("c"), 3);
  EXPECT_TRUE(s.insert_unique("c", Json{{"other", 1}}, "seq"));
  EXPECT_EQ(*s.high_water("c"), 3);
}

TEST(Store, InsertedAtUsesSuppliedClock) {
  DocStore s;
  s.create_collection("c");
  s.insert("c", 1, 12345);
  EXPECT_EQ(s.get_all("c")[0].inserted_at_ms, 12345);
  EXPECT_GT(wall_clock_ms(), 1'600'000'000'000);
}

TEST(Store, SnapshotRoundTrip) {
  DocStore s;
  s.create_collection("c", 10);
  for (int i = 0; i < 15; ++i) s.insert("c", Json{{"seq", i}, {"value", i * 0.5}}, 1000 + i);
  const auto path = (std::filesystem::temp_directory_path() / "triplex_store_snapshot.jsonl").string();
  s.write_snapshot("c", path);
  DocStore t;
  t.create_collection("c", 10);
  EXPECT_EQ(t.load_snapshot("c", path), 10u);
  EXPECT_EQ(t.get_all("c"), s.get_all("c"));
  EXPECT_EQ(t.insert("c", 1), 16);
  std::remove(path.c_str());
}

TEST(Store, RandomizedAgainstListOracle) {
  std::mt19937_64 rng(2024);
  for (std::size_t threshold : {1u, 3u, 17u, 100u}) {
    DocStore s;
    s.create_collection("c", threshold);
    oracle::CappedList ref{threshold};
    for (int op = 0; op < 2500; ++op) {
      const auto r = rng() % 100;
      if (r < 80) {
        const Json body{{"op", op}};
        ASSERT_EQ(s.insert("c", body), ref.insert(body));
      } else if (r < 97) {
        const auto all = s.get_all("c");
        ASSERT_EQ(all.size(), ref.items.size());
        auto it = ref.items.begin();
        for (const auto& d : all) {
          ASSERT_EQ(d.seq, it->first);
          ASSERT_EQ(d.body, it->second);
          ++it;
        }
      } else {
        ASSERT_EQ(s.delete_all("c"), ref.clear());
      }
      ASSERT_LE(s.count("c"), threshold);
    }
  }
}

TEST(Store, ConcurrentSnapshotsAreContiguousWindows) {
  DocStore s;
  s.create_collection("c", 64);
  std::atomic<bool> done{false};
  std::atomic<int> violations{0};
  std::vector<std::thread> writers;
  for (int t = 0; t < 3; ++t) {
    writers.emplace_back([&] {
      for (int i = 0; i < 4000; ++i) s.insert("c", i);
    });
  }
  std::thread reader([&] {
    while (!done) {
      const auto all = s.get_all("c");
      if (all.size() > 64) ++violations;
      for (std::size_t i = 1; i < all.size(); ++i) {
        if (all[i].seq != all[i - 1].seq + 1) ++violations;
      }
      if (s.count("c") > 64) ++violations;
    }
  });
  for (auto& w : writers) w.join();
  done = true;
  reader.join();
  EXPECT_EQ(violations.load(), 0);
  EXPECT_EQ(s.count("c"), 64u);
  EXPECT_EQ(s.get_all("c").back().seq, 12000);
}
