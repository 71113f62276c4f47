#include "fovnav/spline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fovnav {

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// h! / (h - k)!
double falling_factorial(int h, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= (h - i);
  return r;
}

// Bernstein basis without range checks, on the normalized parameter s.
double bernstein_unchecked(int degree, int v, double s) {
  return binomial(degree, v) * std::pow(s, v) * std::pow(1.0 - s, degree - v);
}

}  // namespace

double bernstein_basis(int degree, int v, double t, double tau) {
  if (degree < 0 || v < 0 || v > degree) {
    throw std::domain_error("bernstein_basis: index " + std::to_string(v) +
                            " outside [0, " + std::to_string(degree) + "]");
  }
  if (!(tau > 0.0) || t < 0.0 || t > tau) {
    throw std::domain_error("bernstein_basis: t outside [0, tau]");
  }
  return bernstein_unchecked(degree, v, t / tau);
}

Eigen::VectorXd bezier_derivative_weights(int degree, double duration, double t, int order) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(degree + 1);
  if (order > degree) return w;
  const int m = degree - order;
  const double s = std::clamp(t / duration, 0.0, 1.0);
  const double scale = falling_factorial(degree, order) / std::pow(duration, order);
  for (int v = 0; v <= m; ++v) {
    const double basis = scale * bernstein_unchecked(m, v, s);
    // forward difference of order `order` starting at control point v
    for (int i = 0; i <= order; ++i) {
      const double sign = ((order - i) % 2 == 0) ? 1.0 : -1.0;
      w[v + i] += basis * sign * binomial(order, i);
    }
  }
  return w;
}

BezierCurve::BezierCurve(double duration, Eigen::MatrixXd control_points)
    : duration_(duration), control_points_(std::move(control_points)) {
  if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
    throw std::domain_error("BezierCurve: duration must be positive");
  }
  if (control_points_.rows() < 1 || control_points_.cols() < 1) {
    throw std::domain_error("BezierCurve: needs at least one control point");
  }
  if (!control_points_.allFinite()) {
    throw std::domain_error("BezierCurve: control points must be finite");
  }
}

Eigen::VectorXd BezierCurve::eval(double t, int order) const {
  if (t < 0.0 || t > duration_) throw std::domain_error("BezierCurve::eval: t outside [0, duration]");
  if (order < 0) throw std::domain_error("BezierCurve::eval: negative derivative order");
  const Eigen::VectorXd w = bezier_derivative_weights(degree(), duration_, t, order);
  return control_points_.transpose() * w;
}

BezierCurve derivative_curve(const BezierCurve& curve) {
  const int h = curve.degree();
  if (h < 1) throw std::domain_error("derivative_curve: degree-0 curve has no hodograph");
  const Eigen::MatrixXd& u = curve.control_points();
  Eigen::MatrixXd d = (h / curve.duration()) * (u.bottomRows(h) - u.topRows(h));
  return BezierCurve(curve.duration(), std::move(d));
}

double SplineShape::total_duration() const {
  return std::accumulate(durations.begin(), durations.end(), 0.0);
}

std::pair<int, double> SplineShape::locate(double t) const {
  const double total = total_duration();
  if (t < 0.0 || t > total) throw std::domain_error("spline: t outside [0, duration]");
  double start = 0.0;
  const int last = pieces() - 1;
  for (int i = 0; i < last; ++i) {
    if (t < start + durations[i]) return {i, t - start};
    start += durations[i];
  }
  return {last, std::clamp(t - start, 0.0, durations[last])};
}

PiecewiseSpline::PiecewiseSpline(std::vector<BezierCurve> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw std::domain_error("PiecewiseSpline: needs at least one piece");
  for (const auto& p : pieces_) {
    if (p.degree() != pieces_.front().degree() || p.dim() != pieces_.front().dim()) {
      throw std::domain_error("PiecewiseSpline: pieces must share degree and dimension");
    }
    duration_ += p.duration();
  }
}

PiecewiseSpline PiecewiseSpline::from_vector(const SplineShape& shape, const Eigen::VectorXd& stacked) {
  if (stacked.size() != shape.num_variables()) {
    throw std::invalid_argument("PiecewiseSpline::from_vector: size mismatch");
  }
  std::vector<BezierCurve> pieces;
  pieces.reserve(shape.pieces());
  for (int i = 0; i < shape.pieces(); ++i) {
    Eigen::MatrixXd cp(shape.points_per_piece(), shape.dim);
    for (int v = 0; v <= shape.degree; ++v)
      for (int d = 0; d < shape.dim; ++d) cp(v, d) = stacked[shape.index(i, v, d)];
    pieces.emplace_back(shape.durations[i], std::move(cp));
  }
  return PiecewiseSpline(std::move(pieces));
}

SplineShape PiecewiseSpline::shape() const {
  SplineShape s;
  s.degree = degree();
  s.dim = dim();
  for (const auto& p : pieces_) s.durations.push_back(p.duration());
  return s;
}

Eigen::VectorXd PiecewiseSpline::to_vector() const {
  const SplineShape s = shape();
  Eigen::VectorXd out(s.num_variables());
  for (int i = 0; i < s.pieces(); ++i) {
    const auto& cp = pieces_[i].control_points();
    for (int v = 0; v <= s.degree; ++v)
      for (int d = 0; d < s.dim; ++d) out[s.index(i, v, d)] = cp(v, d);
  }
  return out;
}

Eigen::VectorXd PiecewiseSpline::eval(double t, int order) const {
  double start = 0.0;
  const std::size_t last = pieces_.size() - 1;
  if (t < 0.0 || t > duration_) throw std::domain_error("PiecewiseSpline::eval: t outside [0, duration]");
  for (std::size_t i = 0; i < last; ++i) {
    if (t < start + pieces_[i].duration()) return pieces_[i].eval(t - start, order);
    start += pieces_[i].duration();
  }
  const auto& p = pieces_[last];
  return p.eval(std::clamp(t - start, 0.0, p.duration()), order);
}

Eigen::RowVectorXd evaluation_weights(const SplineShape& shape, double t, int order) {
  const auto [piece, local] = shape.locate(t);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(shape.num_points());
  row.segment(piece * shape.points_per_piece(), shape.points_per_piece()) =
      bezier_derivative_weights(shape.degree, shape.durations[piece], local, order).transpose();
  return row;
}

Eigen::RowVectorXd evaluation_row(const SplineShape& shape, double t, int order, int dim) {
  const Eigen::RowVectorXd w = evaluation_weights(shape, t, order);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(shape.num_variables());
  for (int p = 0; p < shape.num_points(); ++p) row[p * shape.dim + dim] = w[p];
  return row;
}

Eigen::MatrixXd evaluation_matrix(const SplineShape& shape, double t, int order) {
  const Eigen::RowVectorXd w = evaluation_weights(shape, t, order);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(shape.dim, shape.num_variables());
  for (int p = 0; p < shape.num_points(); ++p)
    for (int d = 0; d < shape.dim; ++d) m(d, p * shape.dim + d) = w[p];
  return m;
}

LinearEqualities continuity_system(const SplineShape& shape, int max_order) {
  if (max_order > shape.degree) {
    throw std::domain_error("continuity_system: continuity order " + std::to_string(max_order) +
                            " exceeds degree " + std::to_string(shape.degree));
  }
  const int junctions = shape.pieces() - 1;
  const int rows = junctions * (max_order + 1) * shape.dim;
  LinearEqualities sys{Eigen::MatrixXd::Zero(rows, shape.num_variables()), Eigen::VectorXd::Zero(rows)};
  int r = 0;
  const int n = shape.points_per_piece();
  for (int i = 0; i < junctions; ++i) {
    for (int j = 0; j <= max_order; ++j) {
      const Eigen::VectorXd end = bezier_derivative_weights(shape.degree, shape.durations[i], shape.durations[i], j);
      const Eigen::VectorXd begin = bezier_derivative_weights(shape.degree, shape.durations[i + 1], 0.0, j);
      for (int d = 0; d < shape.dim; ++d, ++r) {
        for (int v = 0; v < n; ++v) {
          sys.A(r, shape.index(i, v, d)) += end[v];
          sys.A(r, shape.index(i + 1, v, d)) -= begin[v];
        }
      }
    }
  }
  return sys;
}

Eigen::MatrixXd effort_gram(int degree, double duration, int order) {
  const int n = degree + 1;
  if (order > degree) return Eigen::MatrixXd::Zero(n, n);
  if (order < 0) throw std::domain_error("effort_gram: negative derivative order");
  const int m = degree - order;

  // hodograph map: derived control points = D * u
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m + 1, n);
  const double scale = falling_factorial(degree, order) / std::pow(duration, order);
  for (int v = 0; v <= m; ++v)
    for (int i = 0; i <= order; ++i)
      D(v, v + i) = scale * (((order - i) % 2 == 0) ? 1.0 : -1.0) * binomial(order, i);

  // integral of B_a^m B_b^m over [0, duration]
  Eigen::MatrixXd M(m + 1, m + 1);
  for (int a = 0; a <= m; ++a)
    for (int b = 0; b <= m; ++b)
      M(a, b) = duration * binomial(m, a) * binomial(m, b) / ((2 * m + 1) * binomial(2 * m, a + b));

  Eigen::MatrixXd G = D.transpose() * M * D;
  return 0.5 * (G + G.transpose());
}

}  // namespace fovnav
