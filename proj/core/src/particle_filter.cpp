#include "fovnav/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fovnav/geometry.hpp"

namespace fovnav {

namespace {

bool spd(const Eigen::Matrix2d& m) {
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Eigen::Matrix2d> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void FilterParams::validate() const {
  if (!spd(process_cov)) throw std::invalid_argument("filter.process_cov must be symmetric positive definite");
  if (!spd(measurement_cov)) throw std::invalid_argument("filter.measurement_cov must be symmetric positive definite");
  if (!(penalty >= 0.0 && penalty < 1.0)) throw std::invalid_argument("filter.penalty must lie in [0, 1)");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) {
    throw std::invalid_argument("filter.resample_threshold must lie in (0, 1]");
  }
  if (num_particles < 1) throw std::invalid_argument("filter.particles must be at least 1");
  if (!(init_sigma >= 0.0)) throw std::invalid_argument("filter.init_sigma must be nonnegative");
  if (workspace.isEmpty()) throw std::invalid_argument("filter workspace is empty");
}

ParticleSet ParticleSet::uniform(const FilterParams& params, std::uint64_t seed) {
  ParticleSet ps;
  ps.seed_ = seed;
  ps.rng_.seed(seed);
  ps.positions_.resize(params.num_particles);
  ps.reset_uniform(params.workspace);
  ps.degenerate_ = false;
  return ps;
}

ParticleSet ParticleSet::around(const Eigen::Vector2d& center, double sigma, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("ParticleSet: needs at least one particle");
  ParticleSet ps;
  ps.seed_ = seed;
  ps.rng_.seed(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ps.positions_.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double dx = normal(ps.rng_), dy = normal(ps.rng_);
    ps.positions_.push_back(center + sigma * Eigen::Vector2d(dx, dy));
  }
  ps.weights_.assign(count, 1.0 / count);
  return ps;
}

ParticleSet::ParticleSet(std::vector<Eigen::Vector2d> positions, std::vector<double> weights, std::uint64_t seed)
    : positions_(std::move(positions)), weights_(std::move(weights)), seed_(seed), rng_(seed) {
  if (positions_.empty()) throw std::invalid_argument("ParticleSet: needs at least one particle");
  if (weights_.size() != positions_.size()) throw std::invalid_argument("ParticleSet: weight count mismatch");
  for (double w : weights_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("ParticleSet: weights must be finite and >= 0");
  normalize();
}

double ParticleSet::effective_sample_size() const {
  double sq = 0.0;
  for (double w : weights_) sq += w * w;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

bool ParticleSet::operator==(const ParticleSet& other) const {
  return positions_ == other.positions_ && weights_ == other.weights_ && seed_ == other.seed_ &&
         rng_ == other.rng_ && degenerate_ == other.degenerate_;
}

void ParticleSet::normalize() {
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    weights_.assign(weights_.size(), 1.0 / weights_.size());
    return;
  }
  for (double& w : weights_) w /= total;
}

void ParticleSet::systematic_resample() {
  const int n = size();
  std::uniform_real_distribution<double> uniform(0.0, 1.0 / n);
  const double start = uniform(rng_);
  std::vector<Eigen::Vector2d> picked;
  picked.reserve(n);
  double cumulative = weights_[0];
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double target = start + static_cast<double>(i) / n;
    while (target > cumulative && j < n - 1) cumulative += weights_[++j];
    picked.push_back(positions_[j]);
  }
  positions_ = std::move(picked);
  weights_.assign(n, 1.0 / n);
}

void ParticleSet::reset_uniform(const Eigen::AlignedBox2d& workspace) {
  std::uniform_real_distribution<double> ux(workspace.min().x(), workspace.max().x());
  std::uniform_real_distribution<double> uy(workspace.min().y(), workspace.max().y());
  for (auto& p : positions_) {
    const double x = ux(rng_);
    p = Eigen::Vector2d(x, uy(rng_));
  }
  weights_.assign(positions_.size(), 1.0 / positions_.size());
  degenerate_ = true;
}

ParticleSet pf_predict(const ParticleSet& ps, const FilterParams& params, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pf_predict: dt must be positive");
  ParticleSet out = ps;
  const Eigen::Matrix2d cov = params.process_cov * dt;
  if (cov.isZero(0.0)) return out;
  const Eigen::Matrix2d chol = Eigen::LLT<Eigen::Matrix2d>(cov).matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : out.positions_) {
    const double a = normal(out.rng_), b = normal(out.rng_);
    p += chol * Eigen::Vector2d(a, b);
  }
  return out;
}

ParticleSet pf_update(const ParticleSet& ps, const std::optional<Eigen::Vector2d>& measurement,
                      const RobotState& observer, const SensingModel& sensing, const FilterParams& params) {
  ParticleSet out = ps;
  out.degenerate_ = false;
  const int n = out.size();

  auto apply_measurement = [&](ParticleSet& set) {
    const Eigen::Matrix2d info = params.measurement_cov.inverse();
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d innovation = *measurement - (set.positions_[i] - observer.position);
      set.weights_[i] *= std::exp(-0.5 * innovation.dot(info * innovation));
    }
  };

  if (measurement) {
    apply_measurement(out);
  } else {
    for (int i = 0; i < n; ++i)
      if (in_sensing_sector(out.positions_[i], observer, sensing)) out.weights_[i] *= params.penalty;
  }

  const double total = std::accumulate(out.weights_.begin(), out.weights_.end(), 0.0);
  if (!(total > 0.0)) {
    out.reset_uniform(params.workspace);
    if (measurement) {
      apply_measurement(out);
      const double retry = std::accumulate(out.weights_.begin(), out.weights_.end(), 0.0);
      if (!(retry > 0.0)) out.weights_.assign(n, 1.0 / n);
    }
  }
  out.normalize();

  if (measurement && out.effective_sample_size() < params.resample_threshold * n) out.systematic_resample();
  return out;
}

Estimate estimate(const ParticleSet& ps) {
  Estimate e;
  const auto& pos = ps.positions();
  const auto& w = ps.weights();
  for (int i = 0; i < ps.size(); ++i) e.mean += w[i] * pos[i];
  for (int i = 0; i < ps.size(); ++i) {
    const Eigen::Vector2d d = pos[i] - e.mean;
    e.cov += w[i] * d * d.transpose();
  }
  return e;
}

std::pair<Eigen::Vector2d, Eigen::Matrix2d> ConfidenceEllipsoid::axes() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(shape);
  return {eig.eigenvalues().cwiseMax(0.0).cwiseSqrt(), eig.eigenvectors()};
}

ConfidenceEllipsoid confidence_ellipsoid_95(const ParticleSet& ps) {
  const Estimate e = estimate(ps);
  Eigen::Matrix2d cov = 0.5 * (e.cov + e.cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  if (eig.eigenvalues().minCoeff() < 1e-12) cov += 1e-6 * Eigen::Matrix2d::Identity();
  return {e.mean, kChiSquare2Dof95 * cov};
}

double distance_to_ellipsoid(const Eigen::Vector2d& point, const ConfidenceEllipsoid& ell) {
  const auto [semi, basis] = ell.axes();
  const Eigen::Vector2d q = basis.transpose() * (point - ell.center);
  const Eigen::Vector2d e2 = semi.cwiseProduct(semi);
  if (e2.minCoeff() <= 0.0) {
    // degenerate ellipse: fall back to the segment along the major axis
    const double t = std::clamp(q.y(), -semi.y(), semi.y());
    return (q - Eigen::Vector2d(0.0, t)).norm();
  }
  if ((q.array().square() / e2.array()).sum() <= 1.0) return 0.0;

  // Closest point x_k = e_k^2 q_k / (t + e_k^2) where t >= 0 solves
  // F(t) = sum_k (e_k q_k / (t + e_k^2))^2 - 1 = 0. F is decreasing on [0, inf).
  auto F = [&](double t) {
    double s = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double r = semi[k] * q[k] / (t + e2[k]);
      s += r * r;
    }
    return s - 1.0;
  };
  double lo = 0.0;
  double hi = semi.maxCoeff() * q.norm();
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = F(t);
    if (f > 0.0) lo = t; else hi = t;
    double df = 0.0;
    for (int k = 0; k < 2; ++k) df += -2.0 * e2[k] * q[k] * q[k] / std::pow(t + e2[k], 3);
    double next = t - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * std::max(1.0, t) || hi - lo <= 1e-15 * std::max(1.0, hi)) {
      t = next;
      break;
    }
    t = next;
  }
  const Eigen::Vector2d x(e2[0] * q[0] / (t + e2[0]), e2[1] * q[1] / (t + e2[1]));
  return (q - x).norm();
}

std::vector<NeighborPriority> priority_weights(std::vector<NeighborDistance> distances, double cost, double decay) {
  if (!(cost > 0.0)) throw std::invalid_argument("priority_weights: cost factor must be positive");
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("priority_weights: decay must lie in (0, 1)");
  std::sort(distances.begin(), distances.end(), [](const NeighborDistance& a, const NeighborDistance& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  std::vector<NeighborPriority> out;
  out.reserve(distances.size());
  double w = cost;
  for (const auto& d : distances) {
    out.push_back({d.id, w});
    w *= decay;
  }
  return out;
}

}  // namespace fovnav
