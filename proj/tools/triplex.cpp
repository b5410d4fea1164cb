// triplex: command-line front end for the heart-rate monitoring pipeline.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "triplex/app.hpp"
#include "triplex/error.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Overrides {
  std::map<std::string, std::string> values;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }
};

void add_common(CLI::App* app, Overrides& ov, std::string& config_path) {
  app->add_option("--config", config_path, "key = value config file (default: $TRIPLEX_CONFIG)");
  ov.add(app, "--data", "data", "heart-signal file, one amplitude per line");
  ov.add(app, "--rate", "rate", "sample rate in Hz");
  ov.add(app, "--min-bpm", "min_bpm", "lower heart-rate bound for flags");
  ov.add(app, "--max-bpm", "max_bpm", "upper heart-rate bound for flags");
  ov.add(app, "--report", "report", "report output path (default: stdout)");
}

void add_pipeline(CLI::App* app, Overrides& ov) {
  ov.add(app, "--broker", "broker", "broker address host:port");
  ov.add(app, "--topic", "topic", "sensor topic");
  ov.add(app, "--speedup", "speedup", "replay speed multiplier, 0 = flood");
  ov.add(app, "--threshold", "threshold", "capped collection size");
  ov.add(app, "--decimation", "decimation", "analyze every N-th sample");
  ov.add(app, "--flow-file", "flow_file", "flow definition for --mode flow");
  ov.add(app, "--qos", "qos", "publish/subscribe qos (0 or 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Heart-rate monitoring pipeline: analysis, broker, emulator and the three architectures"};
  cli.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::string mode_text = "monolith";
  std::string tamper;
  bool loop = false;

  auto* analyze = cli.add_subcommand("analyze", "offline HRV analysis of a signal file");
  add_common(analyze, ov, config_path);

  auto* broker = cli.add_subcommand("broker", "run the embedded MQTT broker until interrupted");
  add_common(broker, ov, config_path);
  ov.add(broker, "--broker", "broker", "listen address host:port");

  auto* emulate = cli.add_subcommand("emulate", "replay a signal file to a broker");
  add_common(emulate, ov, config_path);
  add_pipeline(emulate, ov);
  emulate->add_flag("--loop", loop, "restart from the first sample at end of file");

  auto* run = cli.add_subcommand("run", "run one architecture end to end");
  add_common(run, ov, config_path);
  add_pipeline(run, ov);
  run->add_option("--mode", mode_text, "monolith | flow | faas")
      ->check(CLI::IsMember({"monolith", "flow", "faas"}));

  auto* compare = cli.add_subcommand("compare", "run all three architectures and compare final metrics");
  add_common(compare, ov, config_path);
  add_pipeline(compare, ov);
  compare->add_option("--tamper", tamper, "disable outlier rejection in one mode (self-test)")
      ->check(CLI::IsMember({"monolith", "flow", "faas"}));

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : triplex::app::kExitConfig;
  }

  triplex::app::RunConfig cfg;
  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv("TRIPLEX_CONFIG"); env != nullptr) config_path = env;
    }
    if (!config_path.empty()) triplex::app::apply_config_file(cfg, config_path);
    for (const auto& [key, value] : ov.values) triplex::app::apply_setting(cfg, key, value);
  } catch (const triplex::Error& e) {
    std::cerr << "config: " << e.what() << '\n';
    return triplex::app::kExitConfig;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  if (*analyze) return triplex::app::cmd_analyze(cfg, std::cout, std::cerr);
  if (*broker) return triplex::app::cmd_broker(cfg, std::cout, std::cerr, g_stop);
  if (*emulate) return triplex::app::cmd_emulate(cfg, loop, std::cout, std::cerr, g_stop);
  if (*run) return triplex::app::cmd_run(triplex::parse_mode(mode_text), cfg, std::cout, std::cerr, g_stop);
  triplex::app::CompareOptions opts;
  if (!tamper.empty()) opts.tamper_mode = triplex::parse_mode(tamper);
  return triplex::app::cmd_compare(cfg, std::cout, std::cerr, opts);
}
