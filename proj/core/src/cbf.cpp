#include "fovnav/cbf.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fovnav {

namespace {

constexpr double kPi = std::numbers::pi;

// Coefficients (cx, cy) of a fov row b = cx * ix + cy * iy.
Eigen::Vector2d fov_coefficients(BarrierKind kind, double fov, double iy) {
  switch (kind) {
    case BarrierKind::fov_left: return {std::tan(fov / 2.0), 1.0};
    case BarrierKind::fov_right: return {std::tan(fov / 2.0), -1.0};
    case BarrierKind::fov_single:
      if (fov == kPi) return {1.0, 0.0};
      return {std::tan(kPi - fov / 2.0), iy >= 0.0 ? 1.0 : -1.0};
    default: break;
  }
  throw std::logic_error("fov_coefficients: not a fov row");
}

bool is_fov(BarrierKind kind) {
  return kind == BarrierKind::fov_left || kind == BarrierKind::fov_right || kind == BarrierKind::fov_single;
}

void check_fov(double fov) {
  if (!(fov > 0.0) || fov > 2.0 * kPi) throw std::domain_error("field of view must lie in (0, 2 pi]");
}

}  // namespace

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

bool RobotState::finite() const {
  return position.allFinite() && velocity.allFinite() && std::isfinite(yaw) && std::isfinite(yaw_rate);
}

RobotState RobotState::normalized() const {
  RobotState s = *this;
  s.yaw = wrap_angle(yaw);
  return s;
}

void SensingModel::validate() const {
  if (!(fov > 0.0) || fov > 2.0 * kPi + 1e-12) throw std::invalid_argument("sensing.fov must lie in (0, 2 pi]");
  if (!(range > 0.0)) throw std::invalid_argument("sensing.range must be positive");
  if (!(safety_distance >= 0.0)) throw std::invalid_argument("sensing.safety_distance must be nonnegative");
  if (!(safety_distance < range)) throw std::invalid_argument("sensing.safety_distance must be below sensing.range");
}

void CbfParams::validate() const {
  if (!(gamma1 > 0.0)) throw std::invalid_argument("cbf.gamma1 must be positive");
  if (!(gamma2 > 0.0)) throw std::invalid_argument("cbf.gamma2 must be positive");
  if (mu < 0) throw std::invalid_argument("cbf.mu must be nonnegative");
}

double odd_power(double gamma, double s, int mu) {
  return gamma * std::pow(s, 2 * mu + 1);
}

std::string_view to_string(BarrierKind kind) {
  switch (kind) {
    case BarrierKind::min_distance: return "min_distance";
    case BarrierKind::max_range: return "max_range";
    case BarrierKind::fov_left: return "fov_left";
    case BarrierKind::fov_right: return "fov_right";
    case BarrierKind::fov_single: return "fov_single";
  }
  return "unknown";
}

std::vector<BarrierKind> barrier_rows(const SensingModel& sensing) {
  std::vector<BarrierKind> rows{BarrierKind::min_distance, BarrierKind::max_range};
  if (sensing.fov < kPi) {
    rows.push_back(BarrierKind::fov_left);
    rows.push_back(BarrierKind::fov_right);
  } else if (!sensing.omnidirectional()) {
    rows.push_back(BarrierKind::fov_single);
  }
  return rows;
}

Eigen::Vector2d body_frame(const Eigen::Vector2d& rel_world, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * rel_world.x() + s * rel_world.y(), -s * rel_world.x() + c * rel_world.y()};
}

Eigen::Vector2d b_sr(const Eigen::Vector2d& rel_world, const SensingModel& sensing) {
  const double sq = rel_world.squaredNorm();
  return {sq - sensing.safety_distance * sensing.safety_distance, sensing.range * sensing.range - sq};
}

Eigen::VectorXd b_fov(const Eigen::Vector2d& rel_body, double fov) {
  check_fov(fov);
  const double ix = rel_body.x(), iy = rel_body.y();
  if (fov < kPi) {
    const double t = std::tan(fov / 2.0);
    return Eigen::Vector2d(t * ix + iy, t * ix - iy);
  }
  if (fov == kPi) return Eigen::VectorXd::Constant(1, ix);
  if (fov < 2.0 * kPi) {
    const double sign = iy >= 0.0 ? 1.0 : -1.0;
    return Eigen::VectorXd::Constant(1, std::tan(kPi - fov / 2.0) * ix + sign * iy);
  }
  return Eigen::VectorXd(0);
}

double barrier_value(BarrierKind kind, const Eigen::Vector2d& observer, double yaw,
                     const Eigen::Vector2d& neighbor, const SensingModel& sensing) {
  const Eigen::Vector2d p = neighbor - observer;
  switch (kind) {
    case BarrierKind::min_distance: return b_sr(p, sensing)[0];
    case BarrierKind::max_range: return b_sr(p, sensing)[1];
    default: break;
  }
  const Eigen::Vector2d body = body_frame(p, yaw);
  const Eigen::Vector2d c = fov_coefficients(kind, sensing.fov, body.y());
  return c.dot(body);
}

BarrierJet barrier_jet(BarrierKind kind, const Eigen::Vector2d& observer, double yaw,
                       const Eigen::Vector2d& neighbor, const SensingModel& sensing) {
  BarrierJet jet;
  const Eigen::Vector2d p = neighbor - observer;
  if (kind == BarrierKind::min_distance || kind == BarrierKind::max_range) {
    const double sign = kind == BarrierKind::min_distance ? 1.0 : -1.0;
    jet.value = kind == BarrierKind::min_distance ? b_sr(p, sensing)[0] : b_sr(p, sensing)[1];
    jet.gradient.head<2>() = -2.0 * sign * p;
    jet.hessian.topLeftCorner<2, 2>() = 2.0 * sign * Eigen::Matrix2d::Identity();
    return jet;
  }
  if (sensing.omnidirectional()) throw std::domain_error("barrier_jet: no fov rows for an omnidirectional sensor");

  Eigen::Vector2d body = body_frame(p, yaw);
  if (kind == BarrierKind::fov_single && sensing.fov > kPi && body.y() == 0.0) {
    // sign(iy) is discontinuous on the body x axis; step off it
    body = body_frame(p + Eigen::Vector2d(-std::sin(yaw), std::cos(yaw)) * 1e-9, yaw);
  }
  const double ix = body.x(), iy = body.y();
  const double c = std::cos(yaw), s = std::sin(yaw);
  const Eigen::Vector2d coef = fov_coefficients(kind, sensing.fov, iy);

  const Eigen::Vector3d grad_ix(-c, -s, iy);
  const Eigen::Vector3d grad_iy(s, -c, -ix);
  Eigen::Matrix3d hess_ix = Eigen::Matrix3d::Zero();
  hess_ix(0, 2) = hess_ix(2, 0) = s;
  hess_ix(1, 2) = hess_ix(2, 1) = -c;
  hess_ix(2, 2) = -ix;
  Eigen::Matrix3d hess_iy = Eigen::Matrix3d::Zero();
  hess_iy(0, 2) = hess_iy(2, 0) = c;
  hess_iy(1, 2) = hess_iy(2, 1) = s;
  hess_iy(2, 2) = -iy;

  jet.value = coef.x() * ix + coef.y() * iy;
  jet.gradient = coef.x() * grad_ix + coef.y() * grad_iy;
  jet.hessian = coef.x() * hess_ix + coef.y() * hess_iy;
  return jet;
}

std::optional<HocbfRow> hocbf_row(const RobotState& state, const Eigen::Vector2d& neighbor,
                                  const SensingModel& sensing, const CbfParams& params, BarrierKind kind) {
  if (is_fov(kind) && sensing.omnidirectional()) return std::nullopt;
  const BarrierJet jet = barrier_jet(kind, state.position, state.yaw, neighbor, sensing);
  const Eigen::Vector3d w = state.rates();

  const int power = 2 * params.mu + 1;
  const double b = jet.value;
  const double lf = jet.gradient.dot(w);
  const double lf2 = w.dot(jet.hessian * w);
  const double psi1 = lf + odd_power(params.gamma1, b, params.mu);

  HocbfRow row;
  row.kind = kind;
  row.barrier_value = b;
  row.a_u = jet.gradient;
  row.b_const = lf2 + power * params.gamma1 * std::pow(b, 2 * params.mu) * lf + odd_power(params.gamma2, psi1, params.mu);
  return row;
}

std::vector<HocbfRow> hocbf_rows(const RobotState& state, const Eigen::Vector2d& neighbor,
                                 const SensingModel& sensing, const CbfParams& params) {
  std::vector<HocbfRow> rows;
  for (BarrierKind kind : barrier_rows(sensing)) {
    if (auto row = hocbf_row(state, neighbor, sensing, params, kind)) rows.push_back(*row);
  }
  return rows;
}

}  // namespace fovnav
