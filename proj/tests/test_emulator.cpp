#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "triplex/emulator.hpp"
#include "triplex/error.hpp"
#include "triplex/mqtt/broker.hpp"
#include "triplex/report.hpp"

using namespace triplex;
using namespace triplex::emulator;
using namespace std::chrono_literals;

namespace {

struct Captured {
  std::vector<SensorRecord> records;
  std::vector<std::string> topics;
  Publisher publisher() {
    return [this](const std::string& topic, const std::string& payload, std::uint8_t) {
      topics.push_back(topic);
      records.push_back(SensorRecord::from_payload(payload));
    };
  }
};

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST(Replay, FloodPublishesEveryLine) {
  std::string text = "hr\n";
  for (int i = 0; i < 6000; ++i) text += std::to_string(i * 0.001) + "\n";
  ReplayConfig cfg;
  cfg.data_path = temp_file("triplex_6000.csv", text);
  cfg.speedup = 0;
  Captured cap;
  const auto rep = replay(cfg, cap.publisher());
  EXPECT_EQ(rep.published_count, 6000);
  ASSERT_EQ(cap.records.size(), 6000u);
  for (std::size_t i = 0; i < cap.records.size(); ++i) {
    EXPECT_EQ(cap.records[i].seq, static_cast<std::int64_t>(i + 1));
    EXPECT_NEAR(cap.records[i].value, static_cast<double>(i) * 0.001, 1e-12);
  }
  EXPECT_EQ(cap.topics.front(), "hr/patient1");
}

TEST(Replay, TimestampsFollowRate) {
  ReplayConfig cfg;
  cfg.sample_rate_hz = 3.0;
  cfg.speedup = 0;
  cfg.start_time_ms = 1000;
  Captured cap;
  replay_samples({1, 2, 3, 4, 5}, cfg, cap.publisher());
  std::vector<std::int64_t> t;
  for (const auto& r : cap.records) t.push_back(r.t_ms);
  EXPECT_EQ(t, (std::vector<std::int64_t>{1000, 1333, 1667, 2000, 2333}));
}

TEST(Replay, RealTimePacing) {
  ReplayConfig cfg;
  cfg.speedup = 1.0;
  Captured cap;
  const auto rep = replay_samples(std::vector<double>(600, 0.5), cfg, cap.publisher());
  EXPECT_EQ(rep.published_count, 600);
  EXPECT_NEAR(rep.duration_ms, 6000.0, 600.0);
}

TEST(Replay, SpeedupScalesPacing) {
  ReplayConfig cfg;
  cfg.speedup = 20.0;
  Captured cap;
  const auto rep = replay_samples(std::vector<double>(400, 0.5), cfg, cap.publisher());
  EXPECT_NEAR(rep.duration_ms, 200.0, 60.0);
}

TEST(Replay, EmptyOrMissingFile) {
  ReplayConfig cfg;
  cfg.data_path = temp_file("triplex_empty.csv", "hr\n");
  Captured cap;
  EXPECT_THROW(replay(cfg, cap.publisher()), ReplayError);
  cfg.data_path = "/nonexistent/data.csv";
  EXPECT_THROW(replay(cfg, cap.publisher()), ReplayError);
}

TEST(Replay, PublisherFailureReportsCount) {
  ReplayConfig cfg;
  cfg.speedup = 0;
  int n = 0;
  const Publisher failing = [&n](const std::string&, const std::string&, std::uint8_t) {
    if (++n > 10) throw SessionClosed("gone");
  };
  try {
    replay_samples(std::vector<double>(50, 1.0), cfg, failing);
    FAIL();
  } catch (const ReplayError& e) {
    EXPECT_EQ(e.published_so_far(), 10);
  }
}

TEST(Replay, LoopUntilStopped) {
  ReplayConfig cfg;
  cfg.speedup = 0;
  cfg.loop = true;
  std::atomic<bool> stop{false};
  Captured cap;
  const Publisher p = [&](const std::string& t, const std::string& payload, std::uint8_t q) {
    cap.publisher()(t, payload, q);
    if (cap.records.size() == 25) stop = true;
  };
  const auto rep = replay_samples({1, 2, 3}, cfg, p, &stop);
  EXPECT_EQ(rep.published_count, 25);
  for (std::size_t i = 1; i < cap.records.size(); ++i) {
    EXPECT_EQ(cap.records[i].seq, cap.records[i - 1].seq + 1);
    EXPECT_GT(cap.records[i].t_ms, cap.records[i - 1].t_ms);
  }
  EXPECT_EQ(cap.records[3].value, 1.0);
}

TEST(Replay, InvalidConfig) {
  ReplayConfig cfg;
  cfg.sample_rate_hz = 0;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.speedup = -1;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
}

TEST(Replay, ThroughBroker) {
  auto broker = mqtt::Broker::start({"127.0.0.1", 0});
  auto sub = mqtt::ClientSession::connect(broker->address(), "sub", 30);
  sub->subscribe("hr/patient1", 1);
  auto pub = mqtt::ClientSession::connect(broker->address(), "emu", 30);
  ReplayConfig cfg;
  cfg.speedup = 0;
  const auto rep = replay_samples(std::vector<double>(300, 0.25), cfg, client_publisher(*pub));
  EXPECT_EQ(rep.published_count, 300);
  std::vector<mqtt::Publish> got;
  for (int i = 0; i < 100 && got.size() < 300; ++i) {
    for (auto& m : sub->poll(20ms)) got.push_back(std::move(m));
  }
  ASSERT_EQ(got.size(), 300u);
  const auto last = SensorRecord::from_payload(std::string(got.back().payload.begin(), got.back().payload.end()));
  EXPECT_EQ(last.seq, 300);
  EXPECT_EQ(last.t_ms, 2990);
}
