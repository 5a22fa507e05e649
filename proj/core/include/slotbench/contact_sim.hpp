#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "slotbench/se2.hpp"

namespace slotbench {

/// The grasped plate, modelled as a rectangle fused with the gripper.
struct PlateShape {
  double half_width = 0.005;   // half thickness, along x
  double half_height = 0.115;  // half diameter, along z
  double mass = 0.5;
  double inertia = 0.5 * (0.01 * 0.01 + 0.23 * 0.23) / 12.0;  // about the plate center
  Pose2 grasp_offset{0.0, 0.09, 0.0};  // end-effector frame in the plate frame

  /// Throws std::invalid_argument when a field is non-positive or the inertia is
  /// more than 10x away from that of a uniform rectangle.
  void validate() const;
  double rectangle_inertia() const;
};

/// Axis-aligned box, used for every piece of static geometry.
struct Box {
  double cx = 0.0;
  double cz = 0.0;
  double hx = 0.0;
  double hz = 0.0;

  double min_x() const { return cx - hx; }
  double max_x() const { return cx + hx; }
  double min_z() const { return cz - hz; }
  double max_z() const { return cz + hz; }
};

struct Segment {
  double ax, az, bx, bz;
};

struct WorldGeometry {
  std::vector<Box> boxes;  // table and walls
  std::vector<double> slot_centers_x;
  double slot_floor_z = 0.0;
  double slot_top_z = 0.0;
  std::optional<Box> blocker;

  /// Outline of every obstacle, for plotting.
  std::vector<Segment> segments() const;
  double nearest_slot_offset(double x) const;
  std::size_t nearest_slot(double x) const;
};

struct LayoutConfig {
  int num_slots = 3;
  double slot_pitch = 0.10;
  double wall_thickness = 0.01;
  double wall_height = 0.06;
  double outer_wall_height = 0.15;  // end walls; values below wall_height are raised to it
  double table_half_width = 0.5;
  double table_thickness = 0.05;
  double blocker_half_width = 0.04;
  double blocker_height = 0.09;

  double slot_opening() const { return slot_pitch - wall_thickness; }
};

/// Builds the table, num_slots + 1 walls, and an optional blocker centered in
/// `blocker_slot`. Throws std::invalid_argument when the slot opening cannot take
/// the plate or a parameter is non-positive.
WorldGeometry spawn_world(const LayoutConfig& layout, const PlateShape& plate,
                          std::optional<int> blocker_slot = std::nullopt);

struct SimConfig {
  double dt = 0.001;
  double kp = 150.0;
  double damping_ratio = 1.0;
  double err_scale_trans = 0.05;
  double err_scale_rot = 0.5;
  double contact_stiffness = 1e5;
  double contact_damping = 300.0;
  double friction_mu = 0.4;
  double gravity = -9.81;
  bool gravity_compensation = true;
  int contact_substeps = 4;
  double max_speed = 20.0;
  double max_omega = 200.0;

  void validate() const;
};

/// State of the fused gripper+plate body: end-effector pose in the base frame and
/// the velocity of the end-effector origin.
struct BodyState {
  Pose2 pose;
  Twist2 twist;
};

struct ContactPoint {
  double px = 0.0;
  double pz = 0.0;
  double nx = 0.0;  // unit direction in which the contact pushes the plate
  double nz = 0.0;
  double penetration = 0.0;
  double normal_force = 0.0;
  Wrench2 force;  // on the plate, about the end-effector origin, base axes
};

struct StepOutput {
  BodyState state;
  std::vector<ContactPoint> contacts;
};

/// Pose of the plate center for a given end-effector pose.
Pose2 plate_pose(const Pose2& ee, const PlateShape& plate);
/// Plate corners in the base frame, counter-clockwise from bottom-left.
std::array<std::pair<double, double>, 4> plate_corners(const Pose2& ee, const PlateShape& plate);
/// Lowest z over the plate corners.
double plate_bottom_z(const Pose2& ee, const PlateShape& plate);

Wrench2 impedance_force(const BodyState& state, const Pose2& target, const SimConfig& cfg,
                        const PlateShape& plate);

std::vector<ContactPoint> detect_contacts(const Pose2& ee, const PlateShape& plate,
                                          const WorldGeometry& world);

/// Fills normal and friction forces of each contact (penalty spring-damper plus a
/// regularized Coulomb clamp) and expresses them as wrenches about the end effector.
void contact_forces(std::span<ContactPoint> contacts, const BodyState& state,
                    const SimConfig& cfg);

/// Wrench exerted by the end effector on the environment: minus the summed
/// contact wrench on the plate. Contains no gravity or inertial terms.
Wrench2 end_effector_wrench(std::span<const ContactPoint> contacts);

/// One control tick: impedance force computed once and held, then
/// `contact_substeps` semi-implicit Euler substeps. Deterministic.
StepOutput step_lowlevel(const BodyState& state, const Pose2& target, const PlateShape& plate,
                         const WorldGeometry& world, const SimConfig& cfg);

/// Kinetic energy plus impedance spring energy, for dissipation checks.
double mechanical_energy(const BodyState& state, const Pose2& target, const PlateShape& plate,
                         const SimConfig& cfg);

}  // namespace slotbench
