#pragma once

#include <cmath>
#include <numbers>
#include <utility>

namespace slotbench {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// Rigid planar transform in the x-z plane. Positive theta rotates +x toward +z.
/// The angle is wrapped on construction, so every Pose2 holds theta in (-pi, pi].
class Pose2 {
 public:
  constexpr Pose2() = default;
  Pose2(double x, double z, double theta) : x_(x), z_(z), theta_(wrap_angle(theta)) {}

  static Pose2 identity() { return {}; }

  double x() const { return x_; }
  double z() const { return z_; }
  double theta() const { return theta_; }

  /// Maps a point given in this frame into the parent frame.
  std::pair<double, double> apply(double px, double pz) const;
  /// Rotates a free vector from this frame into the parent frame.
  std::pair<double, double> rotate(double vx, double vz) const;

  friend bool operator==(const Pose2&, const Pose2&) = default;

 private:
  double x_ = 0.0;
  double z_ = 0.0;
  double theta_ = 0.0;
};

struct Twist2 {
  double vx = 0.0;
  double vz = 0.0;
  double omega = 0.0;

  friend bool operator==(const Twist2&, const Twist2&) = default;
};

struct Wrench2 {
  double fx = 0.0;
  double fz = 0.0;
  double tau = 0.0;

  Wrench2& operator+=(const Wrench2& o) {
    fx += o.fx;
    fz += o.fz;
    tau += o.tau;
    return *this;
  }
  friend Wrench2 operator+(Wrench2 a, const Wrench2& b) { return a += b; }
  friend Wrench2 operator-(const Wrench2& w) { return {-w.fx, -w.fz, -w.tau}; }
  friend bool operator==(const Wrench2&, const Wrench2&) = default;

  double force_norm() const { return std::hypot(fx, fz); }
};

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& p);

/// Pose of `p` expressed in the frame `ref`, i.e. compose(inverse(ref), p).
Pose2 relative_pose(const Pose2& ref, const Pose2& p);

/// Re-expresses a wrench given at the origin of `frame` (with frame's axes) in the
/// parent frame: force rotated, torque picks up the moment of the rotated force
/// about the parent origin.
Wrench2 transform_wrench(const Pose2& frame, const Wrench2& w);

struct PoseErrorNorms {
  double trans_m = 0.0;
  double rot_rad = 0.0;
};

PoseErrorNorms pose_error_norms(const Pose2& p);

inline bool is_finite(const Twist2& t) {
  return std::isfinite(t.vx) && std::isfinite(t.vz) && std::isfinite(t.omega);
}
inline bool is_finite(const Wrench2& w) {
  return std::isfinite(w.fx) && std::isfinite(w.fz) && std::isfinite(w.tau);
}

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace slotbench
