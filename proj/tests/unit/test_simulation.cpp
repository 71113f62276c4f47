#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fovnav/io.hpp"
#include "fovnav/simulation.hpp"

using namespace fovnav;

namespace {

constexpr double kPi = std::numbers::pi;

RobotConfig config_for(const Scenario& sc) {
  RobotConfig rc;
  rc.filter.workspace = sc.workspace;
  return rc;
}

Scenario quiet(Scenario sc) {
  sc.sim.output_noise = 0.0;
  sc.sim.velocity_noise = 0.0;
  sc.sim.measurement_noise = false;
  return sc;
}

}  // namespace

TEST_CASE("circle instance places antipodal goals facing the center") {
  const Scenario sc = make_circle_instance(4, 3.0);
  REQUIRE(sc.size() == 4);
  for (const auto& r : sc.robots) {
    CHECK(r.start.position.norm() == doctest::Approx(3.0));
    CHECK((r.goal.head<2>() + r.start.position).norm() <= 1e-12);
    const Eigen::Vector2d heading(std::cos(r.start.yaw), std::sin(r.start.yaw));
    CHECK((heading + r.start.position.normalized()).norm() <= 1e-12);
    const Eigen::Vector2d goal_heading(std::cos(r.goal[2]), std::sin(r.goal[2]));
    CHECK((goal_heading + r.goal.head<2>().normalized()).norm() <= 1e-12);
  }
  CHECK_THROWS_AS(make_circle_instance(1, 3.0), std::invalid_argument);
  const Scenario two = make_circle_instance(2, 4.0);
  CHECK((two.robots[0].start.position - Eigen::Vector2d(4.0, 0.0)).norm() <= 1e-12);
  CHECK((two.robots[1].start.position - Eigen::Vector2d(-4.0, 0.0)).norm() <= 1e-12);
  CHECK(std::abs(wrap_angle(two.robots[0].start.yaw) - kPi) <= 1e-12);
  CHECK(std::abs(two.robots[1].start.yaw) <= 1e-12);
}

TEST_CASE("formation instance is a shifted grid") {
  const Scenario sc = make_formation_instance(4, 1.0, 12.0);
  REQUIRE(sc.size() == 4);
  CHECK((sc.robots[0].start.position - Eigen::Vector2d(0.0, 0.0)).norm() == 0.0);
  CHECK((sc.robots[1].start.position - Eigen::Vector2d(1.0, 0.0)).norm() == 0.0);
  CHECK((sc.robots[2].start.position - Eigen::Vector2d(0.0, 1.0)).norm() == 0.0);
  CHECK((sc.robots[3].start.position - Eigen::Vector2d(1.0, 1.0)).norm() == 0.0);
  for (const auto& r : sc.robots) {
    CHECK(r.start.yaw == 0.0);
    CHECK((r.goal - Eigen::Vector3d(r.start.position.x() + 12.0, r.start.position.y(), 0.0)).norm() == 0.0);
  }
  const Scenario one = make_formation_instance(1, 1.0, 12.0);
  CHECK(one.size() == 1);
}

TEST_CASE("colliding starts are rejected") {
  Scenario sc;
  sc.robots.resize(2);
  sc.robots[1].start.position = {0.1, 0.0};
  CHECK_THROWS_AS(sc.validate(RobotShape{}), std::invalid_argument);
}

TEST_CASE("without noise a single robot executes its plan exactly") {
  Scenario sc;
  RobotSpec r;
  r.goal = {2.0, 1.0, 0.5};
  sc.robots = {r};
  sc = quiet(sc);
  const RobotConfig rc = config_for(sc);
  World w = initialize(sc, rc);
  SimTrace trace;
  for (int k = 0; k < 5; ++k) {
    w = step(w, sc, rc, trace);
    const RobotState expected = w.robots[0].last_plan->state_at(sc.sim.replan_period).normalized();
    CHECK((w.robots[0].state.position - expected.position).norm() == 0.0);
    CHECK((w.robots[0].state.velocity - expected.velocity).norm() == 0.0);
    CHECK(w.robots[0].state.yaw == expected.yaw);
  }
  CHECK(trace.steps.size() == 5);
}

TEST_CASE("neighbors outside the sector produce no detection") {
  Scenario sc;
  RobotSpec a, b;
  a.start.yaw = 0.0;
  a.goal = {0.0, 0.0, 0.0};
  b.start.position = {-3.0, 0.0};
  b.start.yaw = 0.0;
  b.goal = {-3.0, 0.0, 0.0};
  sc.robots = {a, b};
  sc = quiet(sc);
  const RobotConfig rc = config_for(sc);
  World w = initialize(sc, rc);
  SimTrace trace;
  w = step(w, sc, rc, trace);
  CHECK_FALSE(trace.steps[0].robots[0].neighbors[0].detected);
  CHECK(trace.steps[0].robots[1].neighbors[0].detected);
}

TEST_CASE("fixed seeds give identical traces") {
  Scenario sc = make_circle_instance(3, 2.5);
  sc.sim.max_time = 3.0;
  sc.seed = 42;
  const RobotConfig rc = config_for(sc);
  const std::string a = trace_csv(run(sc, rc));
  const std::string b = trace_csv(run(sc, rc));
  CHECK(a == b);
  sc.seed = 43;
  CHECK(trace_csv(run(sc, rc)) != a);
}

TEST_CASE("every robot and neighbor gets a barrier record on every step") {
  Scenario sc = make_circle_instance(3, 2.5);
  sc.sim.max_time = 2.0;
  const SimTrace t = run(sc, config_for(sc));
  for (const auto& s : t.steps) {
    REQUIRE(s.robots.size() == 3);
    for (const auto& r : s.robots) {
      CHECK(r.neighbors.size() == 2);
      for (const auto& n : r.neighbors) {
        CHECK(std::isfinite(n.b_sr_min));
        CHECK(std::isfinite(n.b_sr_max));
        CHECK(std::isfinite(n.b_fov_min));
      }
    }
  }
  CHECK(t.steps.back().robots[0].plan_id == -1);
}

TEST_CASE("metrics on a hand-built trace") {
  Scenario sc;
  RobotSpec a, b;
  a.goal = {1.0, 0.0, 0.0};
  b.start.position = {0.0, 3.0};
  b.goal = {0.0, 3.0, 0.0};
  sc.robots = {a, b};
  SimTrace t;
  for (int k = 0; k <= 10; ++k) {
    StepRecord s;
    s.time = 0.1 * k;
    RobotRecord ra, rb;
    ra.robot_id = 0;
    ra.state.position = {std::min(1.0, 0.2 * k), 0.0};
    ra.plan_id = k;
    ra.plan_time_ms = 2.0;
    rb.robot_id = 1;
    rb.state.position = {0.0, 3.0};
    rb.plan_id = k;
    rb.plan_time_ms = 4.0;
    NeighborRecord na, nb;
    na.neighbor_id = 1;
    na.detected = k % 2 == 0;
    nb.neighbor_id = 0;
    nb.detected = false;
    ra.neighbors = {na};
    rb.neighbors = {nb};
    s.robots = {ra, rb};
    t.steps.push_back(s);
  }
  const Metrics m = evaluate(t, sc, RobotShape{});
  CHECK(m.success);
  REQUIRE(m.makespan);
  CHECK(*m.makespan == doctest::Approx(0.4));  // first entry within 0.3 m
  // steps 0..4 count: robot 0 sees at k = 0, 2, 4
  CHECK(m.pct_neighbors_in_fov == doctest::Approx(100.0 * 3.0 / 10.0));
  CHECK(m.collision_count == 0);
  CHECK(m.mean_plan_time_ms == doctest::Approx(3.0));

  t.steps[10].robots[1].state.position = {1.0, 0.1};
  const Metrics bad = evaluate(t, sc, RobotShape{});
  CHECK_FALSE(bad.success);
  CHECK_FALSE(bad.makespan);
  CHECK(bad.collision_count == 1);
}

TEST_CASE("simulation parameter validation") {
  SimParams sp;
  sp.replan_period = 0.0;
  CHECK_THROWS_AS(sp.validate(), std::invalid_argument);
  CHECK(instance_kind_from_string("formation") == InstanceKind::formation);
  CHECK_THROWS_AS(instance_kind_from_string("spiral"), std::invalid_argument);
}
