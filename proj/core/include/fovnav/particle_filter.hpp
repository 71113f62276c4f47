#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fovnav/types.hpp"

namespace fovnav {

struct FilterParams {
  Eigen::Matrix2d process_cov = 0.25 * Eigen::Matrix2d::Identity();      // per second
  Eigen::Matrix2d measurement_cov = 0.05 * Eigen::Matrix2d::Identity();  // R_m
  double penalty = 0.1;                                                  // epsilon
  double resample_threshold = 0.5;                                       // fraction of N_p
  int num_particles = 100;
  double init_sigma = 0.05;  // spread around a known initial position
  Eigen::AlignedBox2d workspace{Eigen::Vector2d(-10.0, -10.0), Eigen::Vector2d(10.0, 10.0)};

  void validate() const;
};

/// Weighted position hypotheses for one neighbor. The set owns its random
/// stream, so identical seeds and inputs give bit-identical results.
class ParticleSet {
 public:
  /// Uniform over the workspace box.
  static ParticleSet uniform(const FilterParams& params, std::uint64_t seed);
  /// Tight Gaussian cloud around a position known before the mission.
  static ParticleSet around(const Eigen::Vector2d& center, double sigma, int count, std::uint64_t seed);
  /// Explicit particles; weights are normalized on construction.
  ParticleSet(std::vector<Eigen::Vector2d> positions, std::vector<double> weights, std::uint64_t seed);

  int size() const { return static_cast<int>(positions_.size()); }
  const std::vector<Eigen::Vector2d>& positions() const { return positions_; }
  const std::vector<double>& weights() const { return weights_; }
  std::uint64_t seed() const { return seed_; }
  /// True when the last update collapsed every weight and the set was reset.
  bool degenerate() const { return degenerate_; }
  double effective_sample_size() const;

  bool operator==(const ParticleSet& other) const;

 private:
  friend ParticleSet pf_predict(const ParticleSet&, const FilterParams&, double);
  friend ParticleSet pf_update(const ParticleSet&, const std::optional<Eigen::Vector2d>&, const RobotState&,
                               const SensingModel&, const FilterParams&);

  ParticleSet() = default;
  void normalize();
  void systematic_resample();
  void reset_uniform(const Eigen::AlignedBox2d& workspace);

  std::vector<Eigen::Vector2d> positions_;
  std::vector<double> weights_;
  std::uint64_t seed_ = 0;
  std::mt19937_64 rng_;
  bool degenerate_ = false;
};

/// Random-walk transition: every particle moves by N(0, process_cov * dt).
ParticleSet pf_predict(const ParticleSet& ps, const FilterParams& params, double dt);

/// Measurement update. `measurement` is the observed relative position
/// (neighbor minus observer) in world axes. Without a measurement, particles
/// inside the observer's sensing sector are down-weighted by the penalty.
ParticleSet pf_update(const ParticleSet& ps, const std::optional<Eigen::Vector2d>& measurement,
                      const RobotState& observer, const SensingModel& sensing, const FilterParams& params);

struct Estimate {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

Estimate estimate(const ParticleSet& ps);

/// 95% quantile of the chi-square distribution with two degrees of freedom.
inline constexpr double kChiSquare2Dof95 = 5.991464547107979;

/// {r : (r - center)^T shape^{-1} (r - center) <= 1}
struct ConfidenceEllipsoid {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d shape = Eigen::Matrix2d::Identity();

  /// Semi-axis lengths (ascending) and the matching unit axes as columns.
  std::pair<Eigen::Vector2d, Eigen::Matrix2d> axes() const;
};

ConfidenceEllipsoid confidence_ellipsoid_95(const ParticleSet& ps);

/// Euclidean distance from a point to an ellipsoid (0 inside).
double distance_to_ellipsoid(const Eigen::Vector2d& point, const ConfidenceEllipsoid& ell);

struct NeighborDistance {
  int id = 0;
  double distance = 0.0;
};

struct NeighborPriority {
  int id = 0;
  double weight = 0.0;  // xi_j
};

/// Closest-first ordering (ties broken by id) with weights cost * decay^rank.
std::vector<NeighborPriority> priority_weights(std::vector<NeighborDistance> distances, double cost, double decay);

}  // namespace fovnav
