#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fovnav/particle_filter.hpp"

using namespace fovnav;

namespace {

constexpr double kPi = std::numbers::pi;

ParticleSet gaussian_set(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const Eigen::Matrix2d L = cov.llt().matrixL();
  std::vector<Eigen::Vector2d> pos;
  for (int i = 0; i < n; ++i) pos.push_back(mean + L * Eigen::Vector2d(N(rng), N(rng)));
  return ParticleSet(pos, std::vector<double>(n, 1.0), seed);
}

}  // namespace

TEST_CASE("prediction is an unbiased random walk") {
  FilterParams fp;
  const ParticleSet ps(std::vector<Eigen::Vector2d>(10000, Eigen::Vector2d(1.0, -2.0)), std::vector<double>(10000, 1.0), 4);
  const ParticleSet next = pf_predict(ps, fp, 0.1);
  const Estimate e = estimate(next);
  const double sigma = std::sqrt(0.25 * 0.1);
  CHECK((e.mean - Eigen::Vector2d(1.0, -2.0)).cwiseAbs().maxCoeff() <= 3.0 * sigma / std::sqrt(10000.0));
  CHECK(e.cov(0, 0) == doctest::Approx(0.025).epsilon(0.05));
}

TEST_CASE("weights stay normalized and identical seeds give identical sets") {
  FilterParams fp;
  const ParticleSet a = ParticleSet::uniform(fp, 17);
  const ParticleSet b = ParticleSet::uniform(fp, 17);
  CHECK(a == b);
  RobotState obs;
  const SensingModel sm;
  const ParticleSet ua = pf_update(pf_predict(a, fp, 0.1), Eigen::Vector2d(2.0, 0.1), obs, sm, fp);
  const ParticleSet ub = pf_update(pf_predict(b, fp, 0.1), Eigen::Vector2d(2.0, 0.1), obs, sm, fp);
  CHECK(ua == ub);
  double sum = 0.0;
  for (double w : ua.weights()) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("in-view measurements converge on a fixed neighbor") {
  const Eigen::Vector2d truth(2.0, 0.3);
  const SensingModel sm;
  RobotState obs;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    FilterParams fp;
    std::mt19937_64 rng(1000 + seed);
    std::normal_distribution<double> N(0.0, std::sqrt(0.05));
    ParticleSet ps = ParticleSet::uniform(fp, seed);
    for (int k = 0; k < 50; ++k) {
      ps = pf_predict(ps, fp, 0.1);
      ps = pf_update(ps, truth + Eigen::Vector2d(N(rng), N(rng)), obs, sm, fp);
    }
    INFO("seed " << seed);
    CHECK((estimate(ps).mean - truth).norm() < 0.1);
  }
}

TEST_CASE("missing detections push mass out of the sensing sector") {
  FilterParams fp;
  const ParticleSet ps = ParticleSet::uniform(fp, 3);
  RobotState obs;
  const SensingModel sm;
  const ParticleSet up = pf_update(ps, std::nullopt, obs, sm, fp);
  const Estimate before = estimate(ps), after = estimate(up);
  CHECK(after.mean.x() < before.mean.x());
}

TEST_CASE("estimate matches direct sums") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-2.0, 2.0), W(0.1, 1.0);
  std::vector<Eigen::Vector2d> pos;
  std::vector<double> w;
  for (int i = 0; i < 37; ++i) {
    pos.emplace_back(U(rng), U(rng));
    w.push_back(W(rng));
  }
  const ParticleSet ps(pos, w, 1);
  double total = 0.0;
  for (double v : w) total += v;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int i = 0; i < 37; ++i) mean += w[i] / total * pos[i];
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 37; ++i) cov += w[i] / total * (pos[i] - mean) * (pos[i] - mean).transpose();
  const Estimate e = estimate(ps);
  CHECK((e.mean - mean).norm() <= 1e-12);
  CHECK((e.cov - cov).norm() <= 1e-12);
}

TEST_CASE("the 95 percent ellipsoid covers about 95 percent of Gaussian draws") {
  Eigen::Matrix2d cov;
  cov << 0.5, 0.2, 0.2, 0.3;
  const ParticleSet ps = gaussian_set({1.0, 2.0}, cov, 10000, 5);
  const ConfidenceEllipsoid ell = confidence_ellipsoid_95(ps);
  const Eigen::Matrix2d inv = ell.shape.inverse();
  int inside = 0;
  for (const auto& p : ps.positions()) inside += (p - ell.center).dot(inv * (p - ell.center)) <= 1.0;
  CHECK(std::abs(inside / 10000.0 - 0.95) <= 0.02);
}

TEST_CASE("ellipsoid distance matches dense boundary sampling") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> A(0.1, 1.5), R(-kPi, kPi), P(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = A(rng), b = A(rng), th = R(rng);
    const Eigen::Matrix2d Rot = Eigen::Rotation2Dd(th).toRotationMatrix();
    ConfidenceEllipsoid ell;
    ell.center = {P(rng) / 5.0, P(rng) / 5.0};
    ell.shape = Rot * Eigen::Vector2d(a * a, b * b).asDiagonal() * Rot.transpose();
    const Eigen::Vector2d q(P(rng), P(rng));
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 100000; ++k) {
      const double t = 2.0 * kPi * k / 100000.0;
      const Eigen::Vector2d pt = ell.center + Rot * Eigen::Vector2d(a * std::cos(t), b * std::sin(t));
      best = std::min(best, (pt - q).norm());
    }
    const Eigen::Vector2d local = Rot.transpose() * (q - ell.center);
    if ((local.x() * local.x()) / (a * a) + (local.y() * local.y()) / (b * b) <= 1.0) best = 0.0;
    CHECK(std::abs(distance_to_ellipsoid(q, ell) - best) <= 1e-4);
  }
}

TEST_CASE("priority weights decay geometrically closest first") {
  const auto w = priority_weights({{3, 2.0}, {1, 0.5}, {2, 0.5}, {0, 4.0}}, 1000.0, 0.2);
  REQUIRE(w.size() == 4);
  CHECK(w[0].id == 1);
  CHECK(w[1].id == 2);
  CHECK(w[2].id == 3);
  CHECK(w[3].id == 0);
  CHECK(w[0].weight == doctest::Approx(1000.0));
  CHECK(w[1].weight == doctest::Approx(200.0));
  CHECK(w[3].weight == doctest::Approx(8.0));
}

TEST_CASE("filter parameter validation") {
  FilterParams fp;
  fp.num_particles = 0;
  CHECK_THROWS_AS(fp.validate(), std::invalid_argument);
}

TEST_CASE("isotropic covariance gives a circle of radius sigma sqrt(chi2)") {
  std::vector<Eigen::Vector2d> pos{{0.3, 0.0}, {-0.3, 0.0}, {0.0, 0.3}, {0.0, -0.3}};
  const ParticleSet ps(pos, std::vector<double>(4, 1.0), 1);
  const auto [radii, axes] = confidence_ellipsoid_95(ps).axes();
  const double sigma = std::sqrt(0.045);
  CHECK(radii[0] == doctest::Approx(sigma * std::sqrt(kChiSquare2Dof95)));
  CHECK(radii[1] == doctest::Approx(sigma * std::sqrt(kChiSquare2Dof95)));
}

TEST_CASE("absent measurements with no particle in view leave weights alone") {
  FilterParams fp;
  const ParticleSet ps({{-3.0, 0.0}, {-4.0, 1.0}}, {0.25, 0.75}, 2);
  const ParticleSet up = pf_update(ps, std::nullopt, RobotState{}, SensingModel{}, fp);
  CHECK(up.weights()[0] == doctest::Approx(0.25));
  const ParticleSet all({{2.0, 0.0}, {3.0, 0.2}}, {0.25, 0.75}, 2);
  const ParticleSet up2 = pf_update(all, std::nullopt, RobotState{}, SensingModel{}, fp);
  CHECK(up2.weights()[1] == doctest::Approx(0.75));
}
