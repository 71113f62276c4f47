#pragma once

#include <Eigen/Dense>

#include "fovnav/types.hpp"

namespace fovnav {

/// {r : normal . r + offset <= 0}, normal of unit length.
struct HalfSpace {
  Eigen::Vector2d normal = Eigen::Vector2d::UnitX();
  double offset = 0.0;
  /// Set when the generating points coincided and one was nudged apart.
  bool perturbed = false;

  double signed_value(const Eigen::Vector2d& r) const { return normal.dot(r) + offset; }
  bool contains(const Eigen::Vector2d& r) const { return signed_value(r) <= 0.0; }
};

/// Axis-aligned collision box centered on the robot position.
struct RobotShape {
  Eigen::Vector2d half_extents{0.2, 0.2};

  /// max over the box of normal . y
  double support(const Eigen::Vector2d& normal) const { return normal.cwiseAbs().dot(half_extents); }
  void validate() const;
};

/// Perpendicular-bisector half-space between r_i and r_j that contains r_i.
/// Coincident points are separated by nudging r_j 1e-6 m along +x.
HalfSpace voronoi_halfspace(const Eigen::Vector2d& r_i, const Eigen::Vector2d& r_j);

/// Shrink a half-space by the support function of the robot shape so that a
/// robot centered inside it keeps its whole box on the negative side.
HalfSpace buffer_halfspace(const HalfSpace& hs, const RobotShape& shape);

/// Closed planar sensing sector test for a world-frame target.
bool in_sensing_sector(const Eigen::Vector2d& target, const RobotState& observer, const SensingModel& sensing);

/// True when the two boxes centered at a and b overlap with positive area.
bool boxes_overlap(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const RobotShape& shape);

}  // namespace fovnav
