#include "fovnav/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "fovnav/cbf.hpp"

namespace fovnav {

void RobotShape::validate() const {
  if (!(half_extents.x() > 0.0) || !(half_extents.y() > 0.0)) {
    throw std::invalid_argument("shape.half_extents must be positive");
  }
}

HalfSpace voronoi_halfspace(const Eigen::Vector2d& r_i, const Eigen::Vector2d& r_j) {
  HalfSpace hs;
  Eigen::Vector2d other = r_j;
  if ((other - r_i).norm() == 0.0) {
    other.x() += 1e-6;
    hs.perturbed = true;
  }
  hs.normal = (other - r_i).normalized();
  hs.offset = -hs.normal.dot(0.5 * (r_i + other));
  return hs;
}

HalfSpace buffer_halfspace(const HalfSpace& hs, const RobotShape& shape) {
  HalfSpace out = hs;
  out.offset += shape.support(hs.normal);
  return out;
}

bool in_sensing_sector(const Eigen::Vector2d& target, const RobotState& observer, const SensingModel& sensing) {
  const Eigen::Vector2d p = target - observer.position;
  const double dist = p.norm();
  if (dist < sensing.safety_distance || dist > sensing.range) return false;
  if (sensing.omnidirectional()) return true;
  const Eigen::Vector2d body = body_frame(p, observer.yaw);
  return std::abs(std::atan2(body.y(), body.x())) <= sensing.fov / 2.0;
}

bool boxes_overlap(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const RobotShape& shape) {
  const Eigen::Vector2d gap = (a - b).cwiseAbs();
  return gap.x() < 2.0 * shape.half_extents.x() && gap.y() < 2.0 * shape.half_extents.y();
}

}  // namespace fovnav
