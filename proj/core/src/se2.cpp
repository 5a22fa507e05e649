#include "slotbench/se2.hpp"

namespace slotbench {

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

std::pair<double, double> Pose2::rotate(double vx, double vz) const {
  const double c = std::cos(theta_);
  const double s = std::sin(theta_);
  return {c * vx - s * vz, s * vx + c * vz};
}

std::pair<double, double> Pose2::apply(double px, double pz) const {
  auto [rx, rz] = rotate(px, pz);
  return {x_ + rx, z_ + rz};
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  auto [x, z] = a.apply(b.x(), b.z());
  return {x, z, a.theta() + b.theta()};
}

Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.theta());
  const double s = std::sin(p.theta());
  return {-(c * p.x() + s * p.z()), s * p.x() - c * p.z(), -p.theta()};
}

Pose2 relative_pose(const Pose2& ref, const Pose2& p) { return compose(inverse(ref), p); }

Wrench2 transform_wrench(const Pose2& frame, const Wrench2& w) {
  auto [fx, fz] = frame.rotate(w.fx, w.fz);
  return {fx, fz, w.tau + frame.x() * fz - frame.z() * fx};
}

PoseErrorNorms pose_error_norms(const Pose2& p) {
  return {std::hypot(p.x(), p.z()), std::abs(p.theta())};
}

}  // namespace slotbench
