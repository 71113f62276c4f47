#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fovnav {

/// Bernstein basis polynomial C(h,v) (t/tau)^v (1 - t/tau)^(h-v).
/// Throws std::domain_error when t is outside [0, tau] or v outside [0, h].
double bernstein_basis(int degree, int v, double t, double tau);

/// A single Bezier curve parameterized over [0, duration].
///
/// Control points are stored one per row, so `control_points` is
/// (degree + 1) x dim.
class BezierCurve {
 public:
  BezierCurve(double duration, Eigen::MatrixXd control_points);

  int degree() const { return static_cast<int>(control_points_.rows()) - 1; }
  int dim() const { return static_cast<int>(control_points_.cols()); }
  double duration() const { return duration_; }
  const Eigen::MatrixXd& control_points() const { return control_points_; }

  /// order-th time derivative at local time t in [0, duration]. Orders above
  /// the degree evaluate to zero.
  Eigen::VectorXd eval(double t, int order = 0) const;

 private:
  double duration_;
  Eigen::MatrixXd control_points_;
};

/// Hodograph of a curve: degree h-1 with control points (h/tau)(u_{v+1} - u_v).
/// Throws std::domain_error for degree-0 curves.
BezierCurve derivative_curve(const BezierCurve& curve);

/// Shape of a piecewise spline, enough to build linear maps over vec(U)
/// without knowing the control-point values.
///
/// vec(U) is stacked piece-major, then control-point index, then dimension:
///   index(piece, v, dim) = (piece * (degree + 1) + v) * dim_count + dim
struct SplineShape {
  int degree = 3;
  int dim = 3;
  std::vector<double> durations;

  int pieces() const { return static_cast<int>(durations.size()); }
  int points_per_piece() const { return degree + 1; }
  int num_points() const { return pieces() * points_per_piece(); }
  int num_variables() const { return num_points() * dim; }
  double total_duration() const;
  int index(int piece, int v, int d) const { return (piece * (degree + 1) + v) * dim + d; }

  /// Piece containing global time t and the local time inside it. Interior
  /// junctions belong to the later piece; t == total belongs to the last one.
  std::pair<int, double> locate(double t) const;
};

class PiecewiseSpline {
 public:
  explicit PiecewiseSpline(std::vector<BezierCurve> pieces);

  /// Rebuild a spline from a stacked control-point vector.
  static PiecewiseSpline from_vector(const SplineShape& shape, const Eigen::VectorXd& stacked);

  const std::vector<BezierCurve>& pieces() const { return pieces_; }
  int degree() const { return pieces_.front().degree(); }
  int dim() const { return pieces_.front().dim(); }
  double duration() const { return duration_; }
  SplineShape shape() const;
  Eigen::VectorXd to_vector() const;

  /// order-th derivative at global time t in [0, duration()].
  Eigen::VectorXd eval(double t, int order = 0) const;

 private:
  std::vector<BezierCurve> pieces_;
  double duration_ = 0.0;
};

/// Weights over the control points of one curve such that
/// sum_m w[m] u_m equals the order-th derivative at local time t.
Eigen::VectorXd bezier_derivative_weights(int degree, double duration, double t, int order);

/// Row over vec(U) for one output dimension: row.dot(vec(U)) equals
/// eval(t, order)[dim]. Only the active piece's entries are nonzero.
Eigen::RowVectorXd evaluation_row(const SplineShape& shape, double t, int order, int dim);

/// Per-control-point weights (length num_points()); the same functional
/// applies to every dimension.
Eigen::RowVectorXd evaluation_weights(const SplineShape& shape, double t, int order);

/// dim x num_variables() matrix mapping vec(U) to eval(t, order).
Eigen::MatrixXd evaluation_matrix(const SplineShape& shape, double t, int order);

struct LinearEqualities {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// Junction equalities d^j f_i(tau_i) = d^j f_{i+1}(0), j = 0..max_order.
/// Throws std::domain_error when max_order > degree.
LinearEqualities continuity_system(const SplineShape& shape, int max_order);

/// Gram matrix G over one scalar channel of one piece's control points:
/// u^T G u = integral over [0, duration] of (d^order f / dt^order)^2.
/// Orders above the degree give the zero matrix.
Eigen::MatrixXd effort_gram(int degree, double duration, int order);

}  // namespace fovnav
