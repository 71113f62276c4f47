#pragma once

#include <numbers>

#include <Eigen/Dense>

namespace fovnav {

/// Wrap an angle to (-pi, pi].
double wrap_angle(double angle);

/// Planar double-integrator state. Altitude is a fixed configuration
/// parameter and does not take part in planning.
struct RobotState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double yaw_rate = 0.0;

  /// [x, y, yaw]
  Eigen::Vector3d output() const { return {position.x(), position.y(), yaw}; }
  /// [vx, vy, yaw_rate]
  Eigen::Vector3d rates() const { return {velocity.x(), velocity.y(), yaw_rate}; }

  bool finite() const;
  /// Copy with yaw wrapped to (-pi, pi].
  RobotState normalized() const;
};

/// Planar sensing sector: a wedge of angle fov around the body x axis,
/// truncated to [safety_distance, range].
struct SensingModel {
  double fov = 2.0 * std::numbers::pi / 3.0;  // beta_H [rad]
  double range = 8.0;                         // R_s [m]
  double safety_distance = 0.6;               // D_s [m]

  bool omnidirectional() const { return fov >= 2.0 * std::numbers::pi; }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

}  // namespace fovnav
