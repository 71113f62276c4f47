#pragma once

#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fovnav/cbf.hpp"
#include "fovnav/geometry.hpp"
#include "fovnav/qp.hpp"
#include "fovnav/spline.hpp"
#include "fovnav/types.hpp"

namespace fovnav {

/// Tuning of the spline MPC with sampled HOCBF constraints. Defaults are the
/// circle-instance settings; formation runs lower the translational velocity
/// limit and raise the goal weight.
struct PlannerParams {
  int pieces = 3;
  int degree = 3;
  double piece_duration = 0.5;  // tau_i [s], shared by all pieces
  int continuity = 3;           // C
  /// Highest derivative order pinned at t = 0. Orders above 1 come from the
  /// previous plan (zero on the first plan).
  int initial_condition_order = 1;
  double sample_interval = 0.1;  // delta [s]
  int hocbf_samples = 2;         // K_r
  int sqp_iterations = 2;        // V
  int goal_samples = 3;          // kappa
  double goal_weight = 10.0;     // omega_k, constant over the goal samples
  std::vector<double> effort_weights{1.0, 1.0, 1.0};  // theta_1..theta_C
  double slack_cost = 1000.0;    // Omega
  double slack_decay = 0.2;      // gamma_s
  Eigen::Vector3d velocity_max{3.0, 3.0, 5.0 * std::numbers::pi / 6.0};
  Eigen::Vector3d velocity_min{-3.0, -3.0, -5.0 * std::numbers::pi / 6.0};
  Eigen::Vector3d acceleration_max{10.0, 10.0, std::numbers::pi};
  Eigen::Vector3d acceleration_min{-10.0, -10.0, -std::numbers::pi};
  CbfParams cbf;
  SensingModel sensing;
  RobotShape shape;
  QpSettings qp;

  double horizon() const { return pieces * piece_duration; }
  /// K, with (K - 1) delta equal to the horizon.
  int num_samples() const;
  SplineShape spline_shape() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// What a robot knows about one neighbor when it plans.
struct NeighborBelief {
  int id = 0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();  // estimated position
  double distance = 0.0;                           // d_ij to the 95% ellipsoid
};

struct NeighborSlack {
  int id = 0;
  double weight = 0.0;  // xi_j
  double slack = 0.0;   // epsilon_j
};

/// One imposed HOCBF row: residual = a_u . u(k) + b_const, excluding slack.
struct HocbfResidual {
  int neighbor_id = 0;
  int sample = 0;
  BarrierKind kind = BarrierKind::min_distance;
  double residual = 0.0;
  double slack = 0.0;
};

struct PlanDiagnostics {
  int sqp_iterations = 0;
  std::vector<QpStatus> qp_statuses;
  double wall_time_ms = 0.0;
  /// Set when a QP failed and the plan came from an earlier iteration or the
  /// braking fallback.
  bool fallback = false;
  bool braking = false;
  std::string note;
};

struct Plan {
  PiecewiseSpline spline;
  std::vector<NeighborSlack> slacks;  // closest neighbor first
  std::vector<HocbfResidual> hocbf_residuals;
  PlanDiagnostics diagnostics;

  Eigen::Vector3d output(double t) const { return spline.eval(t, 0); }
  Eigen::Vector3d rates(double t) const { return spline.eval(t, 1); }
  Eigen::Vector3d control(double t) const { return spline.eval(t, 2); }
  /// Predicted state at time t along the plan.
  RobotState state_at(double t) const;
  double slack_for(int neighbor_id) const;
};

/// Quadratic form 0.5 z^T H z + g^T z + constant over vec(U).
struct QuadraticCost {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double constant = 0.0;

  double value(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + g.dot(z) + constant; }
};

/// sum over the last kappa samples of omega ||y(t_k) - goal||^2. The goal yaw
/// is unwrapped to lie within pi of reference_yaw.
QuadraticCost assemble_goal_cost(const SplineShape& shape, const Eigen::Vector3d& goal, double reference_yaw,
                                 const PlannerParams& params);

/// sum_j theta_j integral ||d^j f / dt^j||^2 over the horizon.
QuadraticCost assemble_effort_cost(const SplineShape& shape, const PlannerParams& params);

/// Linear HOCBF inequalities over [vec(U); epsilon] written as A x <= b.
struct LinearInequalities {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  /// (neighbor slot, sample, row) for each constraint row
  struct Tag {
    int neighbor = 0;
    int sample = 0;
    HocbfRow row;
  };
  std::vector<Tag> tags;
};

/// -(a_u . u(k) + b_const + eps_j) <= 0 for every neighbor slot j and every
/// linearization state k; one slack column per neighbor slot.
LinearInequalities sampled_hocbf_constraints(const SplineShape& shape, const std::vector<RobotState>& linearization,
                                             const std::vector<Eigen::Vector2d>& neighbor_means,
                                             const PlannerParams& params);

/// r_j(t0) - y_prev(k delta), k = 0..K_r-1.
std::vector<Eigen::Vector2d> predicted_relative_positions(const Plan& previous, const Eigen::Vector2d& neighbor_mean,
                                                          const PlannerParams& params);

/// One MPC step: SQP over spline control points with sampled HOCBF rows,
/// buffered Voronoi corridors, sampled limits and prioritized slacks.
/// `derivative_hint` holds the previous plan's derivatives at the replan
/// instant as columns for orders 2..initial_condition_order.
Plan plan(const RobotState& state, const std::optional<Eigen::MatrixXd>& derivative_hint,
          const std::vector<NeighborBelief>& neighbors, const Eigen::Vector3d& goal, const PlannerParams& params);

}  // namespace fovnav
