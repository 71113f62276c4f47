#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fovnav/types.hpp"

namespace fovnav {

/// Gains of the odd-power class-K functions alpha_k(s) = gamma_k s^(2 mu + 1).
struct CbfParams {
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  int mu = 0;

  void validate() const;
};

/// Extended class-K function gamma * s^(2 mu + 1).
double odd_power(double gamma, double s, int mu);

enum class BarrierKind { min_distance, max_range, fov_left, fov_right, fov_single };

std::string_view to_string(BarrierKind kind);

/// Barrier rows that apply for a sensing model, in the order
/// [min_distance, max_range, fov...]. An omnidirectional sensor has no fov rows.
std::vector<BarrierKind> barrier_rows(const SensingModel& sensing);

/// Linear-in-control HOCBF condition a_u . u + b_const >= 0 where
/// u = [u_x, u_y, u_yaw] is the commanded acceleration.
struct HocbfRow {
  Eigen::Vector3d a_u = Eigen::Vector3d::Zero();
  double b_const = 0.0;
  double barrier_value = 0.0;
  BarrierKind kind = BarrierKind::min_distance;

  double residual(const Eigen::Vector3d& u) const { return a_u.dot(u) + b_const; }
};

/// Relative world vector expressed in a body frame with heading yaw.
Eigen::Vector2d body_frame(const Eigen::Vector2d& rel_world, double yaw);

/// [|p|^2 - D_s^2, R_s^2 - |p|^2]
Eigen::Vector2d b_sr(const Eigen::Vector2d& rel_world, const SensingModel& sensing);

/// Field-of-view barrier entries for a body-frame relative position.
/// Two rows for fov < pi, one row for pi <= fov < 2 pi, none at 2 pi.
/// Throws std::domain_error for fov <= 0 or fov > 2 pi.
Eigen::VectorXd b_fov(const Eigen::Vector2d& rel_body, double fov);

/// Scalar barrier value for one row kind, as a function of the observer pose
/// and the neighbor position.
double barrier_value(BarrierKind kind, const Eigen::Vector2d& observer, double yaw,
                     const Eigen::Vector2d& neighbor, const SensingModel& sensing);

/// Value, gradient and Hessian of one barrier with respect to z = [x_i, y_i, yaw].
struct BarrierJet {
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
};

BarrierJet barrier_jet(BarrierKind kind, const Eigen::Vector2d& observer, double yaw,
                       const Eigen::Vector2d& neighbor, const SensingModel& sensing);

/// Second-order HOCBF row for a double integrator, with the neighbor held
/// static at its estimate:
///   L_f^2 b + L_g L_f b u + (2mu+1) g1 b^(2mu) L_f b + g2 (L_f b + g1 b^(2mu+1))^(2mu+1) >= 0.
/// Returns std::nullopt when a fov row is requested from an omnidirectional sensor.
std::optional<HocbfRow> hocbf_row(const RobotState& state, const Eigen::Vector2d& neighbor,
                                  const SensingModel& sensing, const CbfParams& params, BarrierKind kind);

/// All applicable rows for one neighbor, ordered as barrier_rows().
std::vector<HocbfRow> hocbf_rows(const RobotState& state, const Eigen::Vector2d& neighbor,
                                 const SensingModel& sensing, const CbfParams& params);

}  // namespace fovnav
