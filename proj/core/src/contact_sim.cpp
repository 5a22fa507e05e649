#include "slotbench/contact_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slotbench {

namespace {

struct ComState {
  double x, z, theta;
  double vx, vz, omega;
};

// Vector from the end-effector origin to the plate center, base axes.
std::pair<double, double> ee_to_com(const Pose2& ee, const PlateShape& plate) {
  Pose2 com = plate_pose(ee, plate);
  return {com.x() - ee.x(), com.z() - ee.z()};
}

ComState to_com(const BodyState& s, const PlateShape& plate) {
  auto [rx, rz] = ee_to_com(s.pose, plate);
  const double w = s.twist.omega;
  return {s.pose.x() + rx, s.pose.z() + rz, s.pose.theta(),
          s.twist.vx - w * rz, s.twist.vz + w * rx, w};
}

BodyState from_com(const ComState& c, const PlateShape& plate) {
  Pose2 ee = compose(Pose2{c.x, c.z, c.theta}, plate.grasp_offset);
  const double rx = c.x - ee.x();
  const double rz = c.z - ee.z();
  return {ee, {c.vx + c.omega * rz, c.vz - c.omega * rx, c.omega}};
}

void clamp_twist(Twist2& t, const SimConfig& cfg) {
  const double speed = std::hypot(t.vx, t.vz);
  if (speed > cfg.max_speed) {
    const double k = cfg.max_speed / speed;
    t.vx *= k;
    t.vz *= k;
  }
  t.omega = std::clamp(t.omega, -cfg.max_omega, cfg.max_omega);
}

bool inside(const Box& b, double x, double z) {
  return x > b.min_x() && x < b.max_x() && z > b.min_z() && z < b.max_z();
}

void collide_box(const Pose2& ee, const Pose2& plate_frame, const PlateShape& plate,
                 const Box& box, std::vector<ContactPoint>& out) {
  // Plate corners inside the box: push out through the nearest box face.
  for (auto [px, pz] : plate_corners(ee, plate)) {
    if (!inside(box, px, pz)) continue;
    const std::array<double, 4> depth = {px - box.min_x(), box.max_x() - px, pz - box.min_z(),
                                         box.max_z() - pz};
    const std::array<std::pair<double, double>, 4> normal = {
        {{-1.0, 0.0}, {1.0, 0.0}, {0.0, -1.0}, {0.0, 1.0}}};
    const auto k = static_cast<std::size_t>(std::min_element(depth.begin(), depth.end()) -
                                            depth.begin());
    ContactPoint c;
    c.px = px;
    c.pz = pz;
    c.nx = normal[k].first;
    c.nz = normal[k].second;
    c.penetration = depth[k];
    out.push_back(c);
  }

  // Box corners inside the plate: push the plate away through its nearest face.
  const std::array<std::pair<double, double>, 4> box_corners = {
      {{box.min_x(), box.min_z()},
       {box.max_x(), box.min_z()},
       {box.max_x(), box.max_z()},
       {box.min_x(), box.max_z()}}};
  const Pose2 to_plate = inverse(plate_frame);
  for (auto [bx, bz] : box_corners) {
    auto [qx, qz] = to_plate.apply(bx, bz);
    const double dx = plate.half_width - std::abs(qx);
    const double dz = plate.half_height - std::abs(qz);
    if (dx <= 0.0 || dz <= 0.0) continue;
    ContactPoint c;
    c.px = bx;
    c.pz = bz;
    double fnx = 0.0;
    double fnz = 0.0;
    if (dx <= dz) {
      c.penetration = dx;
      fnx = qx >= 0.0 ? -1.0 : 1.0;
    } else {
      c.penetration = dz;
      fnz = qz >= 0.0 ? -1.0 : 1.0;
    }
    auto [nx, nz] = plate_frame.rotate(fnx, fnz);
    c.nx = nx;
    c.nz = nz;
    out.push_back(c);
  }
}

}  // namespace

void PlateShape::validate() const {
  if (!(half_width > 0.0 && half_height > 0.0 && mass > 0.0 && inertia > 0.0)) {
    throw std::invalid_argument("plate dimensions, mass and inertia must be positive");
  }
  const double ref = rectangle_inertia();
  if (inertia > 10.0 * ref || inertia < ref / 10.0) {
    throw std::invalid_argument("plate inertia " + std::to_string(inertia) +
                                " inconsistent with rectangle inertia " + std::to_string(ref));
  }
}

double PlateShape::rectangle_inertia() const {
  const double w = 2.0 * half_width;
  const double h = 2.0 * half_height;
  return mass * (w * w + h * h) / 12.0;
}

std::vector<Segment> WorldGeometry::segments() const {
  std::vector<Segment> out;
  auto outline = [&out](const Box& b) {
    out.push_back({b.min_x(), b.min_z(), b.max_x(), b.min_z()});
    out.push_back({b.max_x(), b.min_z(), b.max_x(), b.max_z()});
    out.push_back({b.max_x(), b.max_z(), b.min_x(), b.max_z()});
    out.push_back({b.min_x(), b.max_z(), b.min_x(), b.min_z()});
  };
  for (const Box& b : boxes) outline(b);
  if (blocker) outline(*blocker);
  return out;
}

std::size_t WorldGeometry::nearest_slot(double x) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < slot_centers_x.size(); ++i) {
    if (std::abs(x - slot_centers_x[i]) < std::abs(x - slot_centers_x[best])) best = i;
  }
  return best;
}

double WorldGeometry::nearest_slot_offset(double x) const {
  return x - slot_centers_x.at(nearest_slot(x));
}

WorldGeometry spawn_world(const LayoutConfig& layout, const PlateShape& plate,
                          std::optional<int> blocker_slot) {
  if (layout.num_slots < 1 || !(layout.slot_pitch > 0.0) || !(layout.wall_thickness > 0.0) ||
      !(layout.wall_height > 0.0) || !(layout.table_half_width > 0.0) ||
      !(layout.table_thickness > 0.0)) {
    throw std::invalid_argument("layout parameters must be positive");
  }
  if (layout.slot_opening() <= 2.0 * plate.half_width) {
    throw std::invalid_argument("slot opening " + std::to_string(layout.slot_opening()) +
                                " m does not exceed plate thickness " +
                                std::to_string(2.0 * plate.half_width) + " m");
  }

  WorldGeometry world;
  world.slot_floor_z = 0.0;
  world.slot_top_z = layout.wall_height;
  world.boxes.push_back({0.0, -layout.table_thickness / 2.0, layout.table_half_width,
                         layout.table_thickness / 2.0});
  const double first = -0.5 * (layout.num_slots - 1) * layout.slot_pitch;
  for (int i = 0; i < layout.num_slots; ++i) {
    world.slot_centers_x.push_back(first + i * layout.slot_pitch);
  }
  for (int i = 0; i <= layout.num_slots; ++i) {
    const double wx = first + (i - 0.5) * layout.slot_pitch;
    const bool outer = i == 0 || i == layout.num_slots;
    const double h = outer ? std::max(layout.wall_height, layout.outer_wall_height)
                           : layout.wall_height;
    world.boxes.push_back({wx, h / 2.0, layout.wall_thickness / 2.0, h / 2.0});
  }
  if (blocker_slot) {
    if (*blocker_slot < 0 || *blocker_slot >= layout.num_slots) {
      throw std::invalid_argument("blocker slot " + std::to_string(*blocker_slot) +
                                  " out of range");
    }
    const double half = std::min(layout.blocker_half_width, 0.5 * layout.slot_opening() - 1e-4);
    world.blocker = Box{world.slot_centers_x[static_cast<std::size_t>(*blocker_slot)],
                        layout.blocker_height / 2.0, half, layout.blocker_height / 2.0};
  }
  return world;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(kp >= 0.0)) throw std::invalid_argument("kp must be non-negative");
  if (!(damping_ratio > 0.0)) throw std::invalid_argument("damping_ratio must be positive");
  if (!(contact_stiffness > 0.0)) throw std::invalid_argument("contact_stiffness must be positive");
  if (contact_substeps < 1) throw std::invalid_argument("contact_substeps must be >= 1");
  if (contact_damping < 0.0 || friction_mu < 0.0) {
    throw std::invalid_argument("contact damping and friction must be non-negative");
  }
}

Pose2 plate_pose(const Pose2& ee, const PlateShape& plate) {
  return compose(ee, inverse(plate.grasp_offset));
}

std::array<std::pair<double, double>, 4> plate_corners(const Pose2& ee, const PlateShape& plate) {
  const Pose2 p = plate_pose(ee, plate);
  const double w = plate.half_width;
  const double h = plate.half_height;
  return {p.apply(-w, -h), p.apply(w, -h), p.apply(w, h), p.apply(-w, h)};
}

double plate_bottom_z(const Pose2& ee, const PlateShape& plate) {
  double z = std::numeric_limits<double>::infinity();
  for (auto [cx, cz] : plate_corners(ee, plate)) z = std::min(z, cz);
  return z;
}

Wrench2 impedance_force(const BodyState& state, const Pose2& target, const SimConfig& cfg,
                        const PlateShape& plate) {
  const double ex = (target.x() - state.pose.x()) * cfg.err_scale_trans;
  const double ez = (target.z() - state.pose.z()) * cfg.err_scale_trans;
  const double eth = wrap_angle(target.theta() - state.pose.theta()) * cfg.err_scale_rot;
  const double kd_trans = 2.0 * cfg.damping_ratio * std::sqrt(cfg.kp * plate.mass);
  const double kd_rot = 2.0 * cfg.damping_ratio * std::sqrt(cfg.kp * plate.inertia);
  return {cfg.kp * ex - kd_trans * state.twist.vx, cfg.kp * ez - kd_trans * state.twist.vz,
          cfg.kp * eth - kd_rot * state.twist.omega};
}

std::vector<ContactPoint> detect_contacts(const Pose2& ee, const PlateShape& plate,
                                          const WorldGeometry& world) {
  std::vector<ContactPoint> out;
  const Pose2 frame = plate_pose(ee, plate);
  for (const Box& b : world.boxes) collide_box(ee, frame, plate, b, out);
  if (world.blocker) collide_box(ee, frame, plate, *world.blocker, out);
  return out;
}

void contact_forces(std::span<ContactPoint> contacts, const BodyState& state,
                    const SimConfig& cfg) {
  const Pose2& ee = state.pose;
  const Twist2& v = state.twist;
  for (ContactPoint& c : contacts) {
    const double rx = c.px - ee.x();
    const double rz = c.pz - ee.z();
    const double vpx = v.vx - v.omega * rz;
    const double vpz = v.vz + v.omega * rx;
    const double approach = -(vpx * c.nx + vpz * c.nz);
    const double fn =
        std::max(0.0, cfg.contact_stiffness * c.penetration + cfg.contact_damping * approach);
    const double tx = -c.nz;
    const double tz = c.nx;
    const double slip = vpx * tx + vpz * tz;
    const double ft = -std::copysign(std::min(cfg.friction_mu * fn, cfg.contact_damping *
                                                                       std::abs(slip)),
                                     slip);
    c.normal_force = fn;
    c.force = transform_wrench(Pose2{rx, rz, 0.0},
                               {fn * c.nx + ft * tx, fn * c.nz + ft * tz, 0.0});
  }
}

Wrench2 end_effector_wrench(std::span<const ContactPoint> contacts) {
  Wrench2 sum;
  for (const ContactPoint& c : contacts) sum += c.force;
  return -sum;
}

StepOutput step_lowlevel(const BodyState& state, const Pose2& target, const PlateShape& plate,
                         const WorldGeometry& world, const SimConfig& cfg) {
  const Wrench2 control = impedance_force(state, target, cfg, plate);
  const double h = cfg.dt / cfg.contact_substeps;
  const double gravity_force =
      cfg.gravity_compensation ? 0.0 : plate.mass * cfg.gravity;

  StepOutput out{state, {}};
  for (int sub = 0; sub < cfg.contact_substeps; ++sub) {
    out.contacts = detect_contacts(out.state.pose, plate, world);
    contact_forces(out.contacts, out.state, cfg);

    // Net wrench about the end-effector origin; gravity acts at the plate center.
    Wrench2 net = control;
    for (const ContactPoint& c : out.contacts) net += c.force;
    auto [rx, rz] = ee_to_com(out.state.pose, plate);
    net.fz += gravity_force;
    net.tau += rx * gravity_force;
    const double tau_com = net.tau - (rx * net.fz - rz * net.fx);

    ComState com = to_com(out.state, plate);
    com.vx += h * net.fx / plate.mass;
    com.vz += h * net.fz / plate.mass;
    com.omega += h * tau_com / plate.inertia;
    com.x += h * com.vx;
    com.z += h * com.vz;
    com.theta += h * com.omega;
    out.state = from_com(com, plate);
    clamp_twist(out.state.twist, cfg);
  }
  return out;
}

double mechanical_energy(const BodyState& state, const Pose2& target, const PlateShape& plate,
                         const SimConfig& cfg) {
  const ComState c = to_com(state, plate);
  const double kinetic =
      0.5 * plate.mass * (c.vx * c.vx + c.vz * c.vz) + 0.5 * plate.inertia * c.omega * c.omega;
  const double ex = target.x() - state.pose.x();
  const double ez = target.z() - state.pose.z();
  const double eth = wrap_angle(target.theta() - state.pose.theta());
  return kinetic + 0.5 * cfg.kp * cfg.err_scale_trans * (ex * ex + ez * ez) +
         0.5 * cfg.kp * cfg.err_scale_rot * eth * eth;
}

}  // namespace slotbench
