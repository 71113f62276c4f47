#pragma once

#include <algorithm>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace fovnav {

/// minimize 0.5 z^T H z + g^T z
/// subject to A_eq z = b_eq, A_in z <= b_in, lb <= z <= ub.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  std::optional<Eigen::VectorXd> lb;
  std::optional<Eigen::VectorXd> ub;

  /// Empty problem over n variables with no constraints.
  static QpProblem unconstrained(const Eigen::MatrixXd& H, const Eigen::VectorXd& g);

  int num_variables() const { return static_cast<int>(g.size()); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + g.dot(z); }
  /// Throws std::invalid_argument on inconsistent dimensions or asymmetric H.
  void validate() const;
};

enum class QpStatus { optimal, max_iter, infeasible };

std::string_view to_string(QpStatus status);

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;

  double max() const { return std::max({stationarity, primal, complementarity}); }
};

struct QpSolution {
  Eigen::VectorXd z;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iter;
  KktResiduals kkt;
  int iterations = 0;
  /// H was not PSD and got +1e-9 I added.
  bool regularized = false;
  /// For infeasible problems: the smallest uniform constraint relaxation that
  /// makes the problem feasible (a positive certificate residual).
  double infeasibility = 0.0;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;  // A_in rows first, then finite ub, then finite lb
};

struct QpSettings {
  double tolerance = 1e-6;
  int max_iterations = 4000;
};

/// Dense primal-dual interior-point solve. Equalities are eliminated through a
/// null-space basis; bounds are handled as inequality rows. Deterministic and
/// never throws on infeasible input; the status reports the outcome.
QpSolution solve(const QpProblem& qp, const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                 const QpSettings& settings = {});

/// Residuals of the KKT conditions at (z, multipliers) in the original space.
KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& eq_multipliers,
                           const Eigen::VectorXd& ineq_multipliers);

}  // namespace fovnav
