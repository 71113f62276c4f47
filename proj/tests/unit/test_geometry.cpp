#include <doctest.h>

#include <numbers>

#include "fovnav/geometry.hpp"

using namespace fovnav;

TEST_CASE("voronoi half-space separates the two points through the midpoint") {
  const Eigen::Vector2d a(0.0, 0.0), b(2.0, 1.0);
  const HalfSpace hs = voronoi_halfspace(a, b);
  CHECK(hs.contains(a));
  CHECK_FALSE(hs.contains(b));
  CHECK(std::abs(hs.signed_value(0.5 * (a + b))) <= 1e-12);
  CHECK(hs.normal.norm() == doctest::Approx(1.0));
  CHECK_FALSE(hs.perturbed);
  const HalfSpace same = voronoi_halfspace(a, a);
  CHECK(same.perturbed);
  CHECK(same.contains(a));
}

TEST_CASE("buffered half-space keeps the whole box inside") {
  const RobotShape shape;
  const HalfSpace raw = voronoi_halfspace({0.0, 0.0}, {1.0, 1.0});
  const HalfSpace hs = buffer_halfspace(raw, shape);
  CHECK(shape.support(hs.normal) == doctest::Approx(0.2 * std::sqrt(2.0)));
  // centers on the buffered boundary and slightly inside it
  for (double shift : {0.0, 0.05, 0.5}) {
    const Eigen::Vector2d center = -(hs.offset + shift) * hs.normal + Eigen::Vector2d(-hs.normal.y(), hs.normal.x());
    CHECK(hs.contains(center));
    for (double sx : {-1.0, 1.0})
      for (double sy : {-1.0, 1.0})
        CHECK(raw.signed_value(center + Eigen::Vector2d(sx * 0.2, sy * 0.2)) <= 1e-12);
  }
}

TEST_CASE("sensing sector membership") {
  RobotState obs;
  const SensingModel sm{2.0 * std::numbers::pi / 3.0, 8.0, 0.6};
  CHECK(in_sensing_sector({2.0, 0.0}, obs, sm));
  CHECK(in_sensing_sector({1.0, 1.7}, obs, sm));
  CHECK_FALSE(in_sensing_sector({1.0, 1.8}, obs, sm));
  CHECK_FALSE(in_sensing_sector({-2.0, 0.0}, obs, sm));
  CHECK_FALSE(in_sensing_sector({0.3, 0.0}, obs, sm));
  CHECK_FALSE(in_sensing_sector({9.0, 0.0}, obs, sm));
  obs.yaw = std::numbers::pi;
  CHECK(in_sensing_sector({-2.0, 0.0}, obs, sm));
  const SensingModel omni{2.0 * std::numbers::pi, 8.0, 0.6};
  CHECK(in_sensing_sector({-2.0, 0.0}, RobotState{}, omni));
}

TEST_CASE("box overlap needs positive area") {
  const RobotShape shape;
  CHECK(boxes_overlap({0.0, 0.0}, {0.3, 0.3}, shape));
  CHECK_FALSE(boxes_overlap({0.0, 0.0}, {0.4, 0.0}, shape));
  CHECK_FALSE(boxes_overlap({0.0, 0.0}, {0.5, 0.1}, shape));
}
