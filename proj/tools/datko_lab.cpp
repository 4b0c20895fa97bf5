// datko-lab: run analyses described by a JSON config.
//
//   datko-lab run <config.json> [--out DIR] [--parallel] [--seed N]
//   datko-lab validate <config.json>
//   datko-lab props <config.json> [--out DIR] [--seed N]
//
// Exit codes: 0 all checks passed, 2 property or certificate failures,
// 1 config or runtime errors. Log level from DATKO_LAB_LOG.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "datko/run.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("datko-lab");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("DATKO_LAB_LOG")) {
    const std::string s = lvl;
    if (s == "error" || s == "warn" || s == "info" || s == "debug") {
      spdlog::set_level(spdlog::level::from_str(s));
    } else {
      spdlog::warn("ignoring DATKO_LAB_LOG={} (use error, warn, info or debug)", s);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Nonuniform exponential stability analyses for evolution families"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool parallel = false;

  auto* run_cmd = app.add_subcommand("run", "Run every task and write report.json plus CSV series");
  run_cmd->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  auto* run_out = run_cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* run_seed = run_cmd->add_option("--seed", seed, "Seed for randomized probes (overrides the config)");
  run_cmd->add_flag("--parallel", parallel, "Run tasks concurrently");

  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);

  auto* props_cmd = app.add_subcommand("props", "Run only the verify-props tasks");
  props_cmd->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  auto* props_out = props_cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* props_seed = props_cmd->add_option("--seed", seed, "Seed (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const datko::RunConfig config = datko::load_config(config_path);
    if (validate_cmd->parsed()) {
      std::cout << config_path << ": ok (" << config.tasks.size() << " tasks)\n";
      return 0;
    }
    datko::RunOptions opts;
    opts.parallel = parallel;
    opts.props_only = props_cmd->parsed();
    if (*run_out || *props_out) opts.out_dir = out_dir;
    if (*run_seed || *props_seed) opts.seed = seed;

    const datko::RunResult result = datko::run(config, opts);
    for (const auto& f : result.fragments) {
      std::cout << f.name << " (" << f.kind << "): " << datko::to_string(f.status) << "\n";
    }
    std::cout << "report: " << (result.output_dir / "report.json").string() << "\n";
    return result.exit_code;
  } catch (const datko::ConfigError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
