#include "fovnav/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fovnav/cbf.hpp"
#include "fovnav/geometry.hpp"

namespace fovnav {

namespace {

constexpr double kTimeEps = 1e-9;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::Vector2d gaussian2(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = n(rng);
  const double b = n(rng);
  return sigma * Eigen::Vector2d(a, b);
}

bool in_goal(const RobotState& s, const Eigen::Vector3d& goal, double radius) {
  return (s.position - goal.head<2>()).norm() <= radius;
}

NeighborRecord neighbor_record(int id, const RobotState& self, const RobotState& other,
                               const std::optional<ParticleSet>& filter, const SensingModel& sensing) {
  NeighborRecord rec;
  rec.neighbor_id = id;
  rec.detected = in_sensing_sector(other.position, self, sensing);
  const Eigen::Vector2d rel = other.position - self.position;
  const Eigen::Vector2d sr = b_sr(rel, sensing);
  rec.b_sr_min = sr[0];
  rec.b_sr_max = sr[1];
  rec.b_fov_min = sensing.omnidirectional() ? std::numeric_limits<double>::infinity()
                                            : b_fov(body_frame(rel, self.yaw), sensing.fov).minCoeff();
  if (filter) {
    const ConfidenceEllipsoid ell = confidence_ellipsoid_95(*filter);
    rec.estimate = ell.center;
    rec.ellipsoid = ell.shape;
  }
  return rec;
}

}  // namespace

void SimParams::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(output_noise >= 0.0, "sim.output_noise must be nonnegative");
  require(velocity_noise >= 0.0, "sim.velocity_noise must be nonnegative");
  require(detection_noise >= 0.0, "sim.detection_noise must be nonnegative");
  require(detection_delay >= 0.0, "sim.detection_delay must be nonnegative");
  require(replan_period > 0.0, "sim.replan_period must be positive");
  require(max_time > 0.0, "sim.max_time must be positive");
  require(settle_time >= 0.0, "sim.settle_time must be nonnegative");
  require(goal_area_radius > 0.0, "sim.goal_area_radius must be positive");
}

std::string_view to_string(InstanceKind kind) {
  switch (kind) {
    case InstanceKind::circle: return "circle";
    case InstanceKind::formation: return "formation";
    case InstanceKind::custom: return "custom";
  }
  return "custom";
}

InstanceKind instance_kind_from_string(std::string_view name) {
  if (name == "circle") return InstanceKind::circle;
  if (name == "formation") return InstanceKind::formation;
  if (name == "custom") return InstanceKind::custom;
  throw std::invalid_argument("unknown instance kind '" + std::string(name) + "'");
}

void Scenario::validate(const RobotShape& shape) const {
  sim.validate();
  if (robots.empty()) throw std::invalid_argument("scenario has no robots");
  for (std::size_t i = 0; i < robots.size(); ++i) {
    if (!robots[i].start.finite() || !robots[i].goal.allFinite())
      throw std::invalid_argument("robot " + std::to_string(i) + " has a non-finite start or goal");
    for (std::size_t j = i + 1; j < robots.size(); ++j)
      if (boxes_overlap(robots[i].start.position, robots[j].start.position, shape))
        throw std::invalid_argument("robots " + std::to_string(i) + " and " + std::to_string(j) +
                                    " collide at their starts");
  }
}

Scenario make_circle_instance(int count, double radius) {
  if (count < 2) throw std::invalid_argument("circle instance needs at least 2 robots");
  if (!(radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
  Scenario sc;
  sc.kind = InstanceKind::circle;
  for (int n = 0; n < count; ++n) {
    const double a = 2.0 * std::numbers::pi * n / count;
    const Eigen::Vector2d p(radius * std::cos(a), radius * std::sin(a));
    RobotSpec spec;
    spec.start.position = p;
    spec.start.yaw = std::atan2(-p.y(), -p.x());
    spec.goal = Eigen::Vector3d(-p.x(), -p.y(), std::atan2(p.y(), p.x()));
    sc.robots.push_back(spec);
  }
  const double half = radius + 2.0;
  sc.workspace = Eigen::AlignedBox2d(Eigen::Vector2d::Constant(-half), Eigen::Vector2d::Constant(half));
  return sc;
}

Scenario make_formation_instance(int count, double spacing, double travel) {
  if (count < 1) throw std::invalid_argument("formation instance needs at least 1 robot");
  if (!(spacing > 0.0)) throw std::invalid_argument("formation spacing must be positive");
  Scenario sc;
  sc.kind = InstanceKind::formation;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  for (int n = 0; n < count; ++n) {
    RobotSpec spec;
    spec.start.position = Eigen::Vector2d((n % cols) * spacing, (n / cols) * spacing);
    spec.goal = Eigen::Vector3d(spec.start.position.x() + travel, spec.start.position.y(), 0.0);
    sc.robots.push_back(spec);
  }
  Eigen::AlignedBox2d box;
  for (const auto& r : sc.robots) {
    box.extend(r.start.position);
    box.extend(r.goal.head<2>());
  }
  sc.workspace = Eigen::AlignedBox2d(box.min() - Eigen::Vector2d::Constant(3.0), box.max() + Eigen::Vector2d::Constant(3.0));
  return sc;
}

World initialize(const Scenario& scenario, const RobotConfig& config) {
  config.planner.validate();
  config.filter.validate();
  scenario.validate(config.planner.shape);
  const int n = scenario.size();
  World world;
  for (int i = 0; i < n; ++i) {
    RobotWorld rw;
    rw.state = scenario.robots[i].start.normalized();
    rw.rng.seed(derive_seed(scenario.seed, static_cast<std::uint64_t>(i), 0xffffffffu));
    rw.filters.resize(n);
    rw.pending.resize(n);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      rw.filters[j] = ParticleSet::around(scenario.robots[j].start.position, config.filter.init_sigma,
                                          config.filter.num_particles,
                                          derive_seed(scenario.seed, static_cast<std::uint64_t>(i),
                                                      static_cast<std::uint64_t>(j)));
    }
    world.robots.push_back(std::move(rw));
  }
  return world;
}

World step(const World& world, const Scenario& scenario, const RobotConfig& config, SimTrace& trace) {
  const int n = static_cast<int>(world.robots.size());
  const SimParams& sim = scenario.sim;
  const SensingModel& sensing = config.planner.sensing;
  const double dt = sim.replan_period;
  World next = world;
  next.step_index = world.step_index + 1;
  next.time = next.step_index * dt;

  StepRecord record;
  record.time = world.time;

  for (int i = 0; i < n; ++i) {
    const RobotState& self = world.robots[i].state;
    RobotWorld& rw = next.robots[i];

    // detection and filtering
    std::vector<NeighborBelief> beliefs;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const RobotState& other = world.robots[j].state;
      RobotWorld::Detection det;
      det.release_time = world.time + sim.detection_delay;
      det.observer = self;
      if (in_sensing_sector(other.position, self, sensing)) {
        Eigen::Vector2d m = other.position - self.position;
        if (sim.measurement_noise) {
          const Eigen::Matrix2d L = Eigen::LLT<Eigen::Matrix2d>(config.filter.measurement_cov).matrixL();
          m += L * gaussian2(rw.rng, 1.0);
        }
        if (sim.detection_noise > 0.0) m += gaussian2(rw.rng, sim.detection_noise);
        det.measurement = m;
      }
      rw.pending[j].push_back(det);

      ParticleSet ps = pf_predict(*rw.filters[j], config.filter, dt);
      while (!rw.pending[j].empty() && rw.pending[j].front().release_time <= world.time + kTimeEps) {
        const auto& d = rw.pending[j].front();
        ps = pf_update(ps, d.measurement, d.observer, sensing, config.filter);
        rw.pending[j].pop_front();
      }
      rw.filters[j] = ps;

      const ConfidenceEllipsoid ell = confidence_ellipsoid_95(ps);
      beliefs.push_back({j, ell.center, distance_to_ellipsoid(self.position, ell)});
    }

    // planning
    std::optional<Eigen::MatrixXd> hint;
    const int order = config.planner.initial_condition_order;
    if (order >= 2 && world.robots[i].last_plan) {
      Eigen::MatrixXd h(3, order - 1);
      for (int k = 2; k <= order; ++k) h.col(k - 2) = world.robots[i].last_plan->spline.eval(dt, k);
      hint = h;
    }
    Plan p = plan(self, hint, beliefs, scenario.robots[i].goal, config.planner);

    RobotRecord rr;
    rr.robot_id = i;
    rr.state = self;
    rr.plan_id = rw.plans++;
    rr.plan_time_ms = p.diagnostics.wall_time_ms;
    rr.plan_fallback = p.diagnostics.fallback || p.diagnostics.braking;
    if (rr.plan_fallback) ++trace.fallback_count;
    for (int j = 0; j < n; ++j)
      if (j != i) rr.neighbors.push_back(neighbor_record(j, self, world.robots[j].state, rw.filters[j], sensing));
    const int K = config.planner.num_samples();
    for (int k = 0; k < K; ++k)
      rr.plan_polyline.push_back(p.output(std::min(k * config.planner.sample_interval, config.planner.horizon())));
    record.robots.push_back(std::move(rr));

    // execution
    const Eigen::Vector3d y = p.output(dt);
    const Eigen::Vector3d v = p.rates(dt);
    RobotState s;
    s.position = y.head<2>();
    s.yaw = y[2];
    s.velocity = v.head<2>();
    s.yaw_rate = v[2];
    if (sim.output_noise > 0.0) {
      s.position += gaussian2(rw.rng, sim.output_noise);
      s.yaw += gaussian2(rw.rng, sim.output_noise)[0];
    }
    if (sim.velocity_noise > 0.0) {
      s.velocity += gaussian2(rw.rng, sim.velocity_noise);
      s.yaw_rate += gaussian2(rw.rng, sim.velocity_noise)[0];
    }
    rw.state = s.normalized();
    rw.last_plan = std::move(p);
  }
  trace.steps.push_back(std::move(record));
  return next;
}

SimTrace run(const Scenario& scenario, const RobotConfig& config) {
  World world = initialize(scenario, config);
  SimTrace trace;
  trace.step = scenario.sim.replan_period;
  const int n = scenario.size();
  const int max_steps = static_cast<int>(std::llround(scenario.sim.max_time / scenario.sim.replan_period));
  const int settle_steps = static_cast<int>(std::llround(scenario.sim.settle_time / scenario.sim.replan_period));
  int settled = 0;
  for (int k = 0; k < max_steps; ++k) {
    world = step(world, scenario, config, trace);
    bool all_in = true;
    for (int i = 0; i < n; ++i)
      all_in = all_in && in_goal(world.robots[i].state, scenario.robots[i].goal, scenario.sim.goal_area_radius);
    settled = all_in ? settled + 1 : 0;
    if (all_in && settled >= settle_steps) break;
  }

  StepRecord last;
  last.time = world.step_index * scenario.sim.replan_period;
  for (int i = 0; i < n; ++i) {
    RobotRecord rr;
    rr.robot_id = i;
    rr.state = world.robots[i].state;
    for (int j = 0; j < n; ++j)
      if (j != i)
        rr.neighbors.push_back(neighbor_record(j, rr.state, world.robots[j].state, world.robots[i].filters[j],
                                               config.planner.sensing));
    last.robots.push_back(std::move(rr));
  }
  trace.steps.push_back(std::move(last));
  return trace;
}

Metrics evaluate(const SimTrace& trace, const Scenario& scenario, const RobotShape& shape) {
  Metrics m;
  const int n = scenario.size();
  if (trace.steps.empty()) return m;

  for (const auto& step : trace.steps)
    for (int a = 0; a < static_cast<int>(step.robots.size()); ++a)
      for (int b = a + 1; b < static_cast<int>(step.robots.size()); ++b)
        if (boxes_overlap(step.robots[a].state.position, step.robots[b].state.position, shape)) ++m.collision_count;

  // start of the final stretch inside the goal area, per robot
  bool all_reached = true;
  double makespan = 0.0;
  for (int i = 0; i < n; ++i) {
    std::optional<double> entry;
    for (const auto& step : trace.steps) {
      const bool inside = in_goal(step.robots[i].state, scenario.robots[i].goal, scenario.sim.goal_area_radius);
      if (inside && !entry) entry = step.time;
      if (!inside) entry.reset();
    }
    if (!entry) {
      all_reached = false;
    } else {
      makespan = std::max(makespan, *entry);
    }
  }
  m.success = all_reached && m.collision_count == 0;
  if (m.success) m.makespan = makespan;

  long in_view = 0, pairs = 0;
  for (const auto& step : trace.steps) {
    if (m.makespan && step.time > *m.makespan + kTimeEps) break;
    for (const auto& rr : step.robots)
      for (const auto& nb : rr.neighbors) {
        ++pairs;
        in_view += nb.detected ? 1 : 0;
      }
  }
  m.pct_neighbors_in_fov = pairs > 0 ? 100.0 * static_cast<double>(in_view) / static_cast<double>(pairs) : 100.0;

  double total = 0.0;
  long plans = 0;
  for (const auto& step : trace.steps)
    for (const auto& rr : step.robots)
      if (rr.plan_id >= 0) {
        total += rr.plan_time_ms;
        ++plans;
      }
  m.mean_plan_time_ms = plans > 0 ? total / static_cast<double>(plans) : 0.0;
  return m;
}

}  // namespace fovnav
