#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fovnav/particle_filter.hpp"
#include "fovnav/planner.hpp"
#include "fovnav/simulation.hpp"

namespace fovnav {

/// Parse or validation failure, with "source:line: message" text.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct ScenarioSpec {
  InstanceKind kind = InstanceKind::circle;
  int robots = 4;
  double radius = 3.0;    // circle
  double spacing = 1.0;   // formation
  double travel = 12.0;   // formation
  std::vector<RobotSpec> custom;  // custom
};

struct RunConfig {
  ScenarioSpec scenario;
  PlannerParams planner;
  FilterParams filter;
  SimParams sim;
  int trials = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Scenario for one trial. The filter workspace is taken from the scenario.
  Scenario build_scenario(std::uint64_t trial_seed) const;
  RobotConfig robot_config(const Scenario& scenario) const;
};

/// Circle defaults with a narrow field of view.
RunConfig default_config();

RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace fovnav
