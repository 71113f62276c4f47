#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fovnav/particle_filter.hpp"
#include "fovnav/planner.hpp"
#include "fovnav/types.hpp"

namespace fovnav {

struct SimParams {
  double output_noise = 0.001;    // sigma_y [m, rad]
  double velocity_noise = 0.01;   // sigma_v [m/s, rad/s]
  bool measurement_noise = true;  // add N(0, R_m) to every detection
  double detection_noise = 0.0;   // extra isotropic detection noise std [m]
  double detection_delay = 0.0;   // [s]
  double replan_period = 0.1;     // [s]
  double max_time = 60.0;         // [s]
  /// The run stops early once every robot has stayed in its goal area this long.
  double settle_time = 2.0;
  double goal_area_radius = 0.3;  // [m]

  void validate() const;
};

enum class InstanceKind { circle, formation, custom };

std::string_view to_string(InstanceKind kind);
InstanceKind instance_kind_from_string(std::string_view name);

struct RobotSpec {
  RobotState start;
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();  // (x, y, yaw)
};

struct Scenario {
  InstanceKind kind = InstanceKind::custom;
  std::vector<RobotSpec> robots;
  Eigen::AlignedBox2d workspace{Eigen::Vector2d(-10.0, -10.0), Eigen::Vector2d(10.0, 10.0)};
  SimParams sim;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(robots.size()); }
  /// Throws std::invalid_argument when starts collide or parameters are invalid.
  void validate(const RobotShape& shape) const;
};

/// Robots evenly spaced on a circle, each heading for the antipodal point and
/// facing the center at both ends.
Scenario make_circle_instance(int count, double radius);

/// Robots on a grid with ceil(sqrt(N)) columns, all heading +x, with goals
/// shifted by (travel, 0).
Scenario make_formation_instance(int count, double spacing, double travel);

struct NeighborRecord {
  int neighbor_id = 0;
  bool detected = false;  // true neighbor inside the sensing sector
  Eigen::Vector2d estimate = Eigen::Vector2d::Zero();
  Eigen::Matrix2d ellipsoid = Eigen::Matrix2d::Identity();  // 95% shape matrix
  double b_sr_min = 0.0;  // |p|^2 - D_s^2
  double b_sr_max = 0.0;  // R_s^2 - |p|^2
  double b_fov_min = 0.0;  // +inf for an omnidirectional sensor
};

struct RobotRecord {
  int robot_id = 0;
  RobotState state;
  /// Id of the plan computed from this state, -1 on the final record.
  int plan_id = -1;
  std::vector<NeighborRecord> neighbors;
  /// Samples of the plan's position and yaw, empty on the final record.
  std::vector<Eigen::Vector3d> plan_polyline;
  double plan_time_ms = 0.0;
  bool plan_fallback = false;
};

struct StepRecord {
  double time = 0.0;
  std::vector<RobotRecord> robots;
};

struct SimTrace {
  double step = 0.1;
  std::vector<StepRecord> steps;
  int fallback_count = 0;
};

struct Metrics {
  bool success = false;
  std::optional<double> makespan;  // undefined on failure
  double pct_neighbors_in_fov = 100.0;
  int collision_count = 0;
  double mean_plan_time_ms = 0.0;
};

/// Everything a run needs besides the scenario.
struct RobotConfig {
  PlannerParams planner;
  FilterParams filter;
};

/// Closed-loop state of one robot.
struct RobotWorld {
  RobotState state;
  std::vector<std::optional<ParticleSet>> filters;  // indexed by neighbor id
  std::optional<Plan> last_plan;
  int plans = 0;

  struct Detection {
    double release_time = 0.0;
    RobotState observer;
    std::optional<Eigen::Vector2d> measurement;
  };
  std::vector<std::deque<Detection>> pending;  // indexed by neighbor id
  std::mt19937_64 rng;  // execution and detection noise
};

struct World {
  double time = 0.0;
  int step_index = 0;
  std::vector<RobotWorld> robots;
};

World initialize(const Scenario& scenario, const RobotConfig& config);

/// Advance every robot by one replan period. Robots act on the snapshot of the
/// world at the start of the step. The trace row for the start state is appended.
World step(const World& world, const Scenario& scenario, const RobotConfig& config, SimTrace& trace);

/// Full closed-loop run until every robot settles in its goal area or the
/// time limit is reached. The final state is recorded with plan_id -1.
SimTrace run(const Scenario& scenario, const RobotConfig& config);

Metrics evaluate(const SimTrace& trace, const Scenario& scenario, const RobotShape& shape);

}  // namespace fovnav
