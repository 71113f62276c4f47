#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fovnav/config.hpp"
#include "fovnav/io.hpp"
#include "fovnav/simulation.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Field-of-view aware multi-robot navigation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string out_dir;
  bool plot = false;
  auto* run = app.add_subcommand("run", "Run seeded trials and write traces plus a batch report");
  run->add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Base seed (overrides the config)");
  run->add_option("--trials", trials, "Trial count (overrides the config)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_flag("--plot", plot, "Also export plot data for trial 0");

  std::string kind = "circle";
  int robots = 4;
  double radius = 3.0, spacing = 1.0, travel = 12.0;
  std::string instance_out;
  auto* instance = app.add_subcommand("instance", "Write a generated scenario as a custom-instance config");
  instance->add_option("--kind", kind, "circle or formation")->check(CLI::IsMember({"circle", "formation"}));
  instance->add_option("--robots", robots, "Robot count")->check(CLI::PositiveNumber);
  instance->add_option("--radius", radius, "Circle radius [m]");
  instance->add_option("--spacing", spacing, "Formation grid spacing [m]");
  instance->add_option("--travel", travel, "Formation travel distance [m]");
  instance->add_option("--out", instance_out, "Output YAML file")->required();

  std::string check_path;
  auto* check = app.add_subcommand("check", "Validate a configuration file");
  check->add_option("config", check_path, "YAML run configuration")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      fovnav::RunConfig cfg = fovnav::load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (trials) cfg.trials = *trials;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const fs::path out = cfg.output_dir;
      const fovnav::BatchReport rep = fovnav::run_batch(cfg, out);
      for (const auto& t : rep.trials) {
        if (!t.completed) {
          std::fprintf(stderr, "trial %d (seed %llu) failed: %s\n", t.trial, static_cast<unsigned long long>(t.seed),
                       t.error.c_str());
          continue;
        }
        std::printf("trial %d seed %llu success=%d makespan=%s fov=%.2f%% collisions=%d plan=%.2fms\n", t.trial,
                    static_cast<unsigned long long>(t.seed), t.metrics.success ? 1 : 0,
                    t.metrics.makespan ? fovnav::format_double(*t.metrics.makespan).c_str() : "-",
                    t.metrics.pct_neighbors_in_fov, t.metrics.collision_count, t.metrics.mean_plan_time_ms);
      }
      std::printf("success %.3f  fov %.2f%% [%.2f, %.2f]  report %s\n", rep.success_rate.mean,
                  rep.pct_neighbors_in_fov.mean, rep.pct_neighbors_in_fov.low, rep.pct_neighbors_in_fov.high,
                  (out / "report.json").string().c_str());
      if (plot && !rep.trials.empty() && rep.trials.front().completed) {
        const fovnav::Scenario sc = cfg.build_scenario(cfg.seed);
        fovnav::export_plot_data(fovnav::run(sc, cfg.robot_config(sc)), cfg.planner.sensing, out / "plot");
      }
      return rep.all_completed() ? 0 : 1;
    }
    if (*instance) {
      fovnav::RunConfig cfg = fovnav::default_config();
      cfg.scenario.kind = fovnav::instance_kind_from_string(kind);
      cfg.scenario.robots = robots;
      cfg.scenario.radius = radius;
      cfg.scenario.spacing = spacing;
      cfg.scenario.travel = travel;
      const fovnav::Scenario sc = cfg.build_scenario(0);
      cfg.scenario.kind = fovnav::InstanceKind::custom;
      cfg.scenario.custom = sc.robots;
      cfg.validate();
      fovnav::save_config(instance_out, cfg);
      return 0;
    }
    if (*check) {
      const fovnav::RunConfig cfg = fovnav::load_config(check_path);
      std::printf("%s: ok (%s, %d robots, %d trials)\n", check_path.c_str(),
                  std::string(fovnav::to_string(cfg.scenario.kind)).c_str(), cfg.build_scenario(cfg.seed).size(),
                  cfg.trials);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
