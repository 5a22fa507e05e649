#include "slotbench/insertion_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slotbench {

namespace {

constexpr double kStartWallGap = 0.002;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

void EnvConfig::validate() const {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (history < 1) throw std::invalid_argument("history length must be >= 1");
  if (lowlevel_per_policy < 1) throw std::invalid_argument("lowlevel_per_policy must be >= 1");
  if (delay_min < 0 || delay_max < delay_min || delay_max > lowlevel_per_policy) {
    throw std::invalid_argument("delay range must lie inside [0, lowlevel_per_policy]");
  }
  if (eps_trans_max < 0.0 || eps_rot_max < 0.0) {
    throw std::invalid_argument("noise magnitudes must be non-negative");
  }
  if (!(action_scale_trans > 0.0 && action_scale_rot > 0.0 && success_dx > 0.0 &&
        jam_force > 0.0)) {
    throw std::invalid_argument("scales must be positive");
  }
  if (success_hold < 1 || jam_hold < 1) throw std::invalid_argument("hold counts must be >= 1");
  if (partial_insert_prob < 0.0 || partial_insert_prob > 1.0 || blocker_prob < 0.0 ||
      blocker_prob > 1.0) {
    throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  if (start_dx_max < 0.0 || start_height_max < start_height_min) {
    throw std::invalid_argument("invalid start region");
  }
}

Curriculum Curriculum::ramp(long total_iterations) {
  const double total = static_cast<double>(std::max(total_iterations, 10L));
  return {{{0.0, 0.0}, {0.1 * total, 0.0}, {0.5 * total, 1.0}}};
}

Curriculum Curriculum::constant(double fraction) { return {{{0.0, fraction}}}; }

void Curriculum::validate() const {
  if (breakpoints.empty()) throw std::invalid_argument("curriculum needs a breakpoint");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    const auto [it, frac] = breakpoints[i];
    if (frac < 0.0 || frac > 1.0) throw std::invalid_argument("curriculum fraction outside [0,1]");
    if (i > 0 && !(it > breakpoints[i - 1].first)) {
      throw std::invalid_argument("curriculum iterations must be strictly increasing");
    }
  }
}

double Curriculum::fraction(double iteration) const {
  if (iteration <= breakpoints.front().first) return breakpoints.front().second;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    const auto [x1, y1] = breakpoints[i];
    if (iteration <= x1) {
      const auto [x0, y0] = breakpoints[i - 1];
      return std::clamp(y0 + (y1 - y0) * (iteration - x0) / (x1 - x0), 0.0, 1.0);
    }
  }
  return breakpoints.back().second;
}

NoiseLevel curriculum_epsilon(double iteration, const Curriculum& curriculum,
                              const EnvConfig& cfg) {
  if (iteration < 0.0) throw std::invalid_argument("iteration must be non-negative");
  const double f = curriculum.fraction(iteration);
  return {f * cfg.eps_trans_max, f * cfg.eps_rot_max};
}

std::vector<double> build_observation(const std::deque<ObservationFrame>& history, int h,
                                      bool include_velocity) {
  if (history.empty()) throw std::invalid_argument("observation history is empty");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(h) * (include_velocity ? 9 : 6));
  for (int i = 0; i < h; ++i) {
    const auto idx = std::min(static_cast<std::size_t>(i), history.size() - 1);
    const ObservationFrame& f = history[idx];
    out.insert(out.end(), {f.rel_pose.x(), f.rel_pose.z(), f.rel_pose.theta(), f.wrench.fx,
                           f.wrench.fz, f.wrench.tau});
    if (include_velocity) {
      out.insert(out.end(), {f.rel_twist.vx, f.rel_twist.vz, f.rel_twist.omega});
    }
  }
  return out;
}

Action base_action(const Pose2& current, const Pose2& noisy_goal, const EnvConfig& cfg) {
  const Pose2 err = relative_pose(current, noisy_goal);
  return {std::clamp(err.x() / cfg.action_scale_trans, -1.0, 1.0),
          std::clamp(err.z() / cfg.action_scale_trans, -1.0, 1.0),
          std::clamp(err.theta() / cfg.action_scale_rot, -1.0, 1.0)};
}

Pose2 compose_target(const Pose2& current, const Pose2& noisy_goal, const Action& action,
                     const EnvConfig& cfg) {
  const Action base = base_action(current, noisy_goal, cfg);
  Action composite{};
  for (std::size_t i = 0; i < 3; ++i) {
    composite[i] = std::clamp(std::clamp(action[i], -1.0, 1.0) + base[i], -1.0, 1.0);
  }
  return compose(current, Pose2{composite[0] * cfg.action_scale_trans,
                                composite[1] * cfg.action_scale_trans,
                                composite[2] * cfg.action_scale_rot});
}

double reward(const Pose2& rel_true, const Action& action, const Action& prev_action,
              RewardEvents events, const EnvConfig& cfg) {
  const RewardConfig& r = cfg.reward;
  double total = -1.0 / cfg.horizon;
  if (events.jam) total += r.r_drop;
  if (events.success) total += r.r_success;

  const PoseErrorNorms dist = pose_error_norms(rel_true);
  total -= r.k_dist_trans * std::min(r.lambda_dist_trans, dist.trans_m);
  total -= r.k_dist_rot * std::min(r.lambda_dist_rot, dist.rot_rad);

  const double da_trans =
      std::hypot(action[0] - prev_action[0], action[1] - prev_action[1]) * cfg.action_scale_trans;
  const double da_rot = std::abs(action[2] - prev_action[2]) * cfg.action_scale_rot;
  total -= r.k_da_trans * std::min(r.lambda_da_trans, da_trans);
  total -= r.k_da_rot * std::min(r.lambda_da_rot, da_rot);
  return total;
}

SuccessCheck check_success(const Pose2& ee, const PlateShape& plate, const WorldGeometry& world,
                           int counter, const EnvConfig& cfg) {
  const Pose2 center = plate_pose(ee, plate);
  const auto [bx, bz] = center.apply(0.0, -plate.half_height);
  (void)bz;
  SuccessCheck out;
  out.in_region = plate_bottom_z(ee, plate) < world.slot_top_z - cfg.success_depth &&
                  std::abs(world.nearest_slot_offset(bx)) < cfg.success_dx;
  out.counter = out.in_region ? counter + 1 : 0;
  out.success = out.counter >= cfg.success_hold;
  return out;
}

Failure check_failure(std::span<const Wrench2> lowlevel_wrenches, int step_count,
                      const EnvConfig& cfg) {
  int run = 0;
  for (const Wrench2& w : lowlevel_wrenches) {
    run = w.force_norm() > cfg.jam_force ? run + 1 : 0;
    if (run >= cfg.jam_hold) return Failure::kJam;
  }
  return step_count >= cfg.horizon ? Failure::kHorizon : Failure::kNone;
}

InsertionEnv::InsertionEnv(EnvConfig env, SimConfig sim, LayoutConfig layout, PlateShape plate)
    : env_(std::move(env)), sim_(sim), layout_(layout), plate_(plate) {
  env_.validate();
  sim_.validate();
  plate_.validate();
  spawn_world(layout_, plate_);  // validates the layout
}

Pose2 InsertionEnv::seated_pose(double slot_x) const {
  return compose(Pose2{slot_x, plate_.half_height, 0.0}, plate_.grasp_offset);
}

std::vector<double> InsertionEnv::reset(std::uint64_t seed, const EpisodeSpec& spec) {
  rng_.seed(seed);
  const int n = layout_.num_slots;

  // Every draw happens unconditionally so overrides never shift the stream.
  const int sampled_slot = std::uniform_int_distribution<int>(0, n - 1)(rng_);
  const bool sampled_blocker = uniform(rng_, 0.0, 1.0) < env_.blocker_prob;
  const double et = spec.noise_fraction * env_.eps_trans_max;
  const double er = spec.noise_fraction * env_.eps_rot_max;
  const double dx = uniform(rng_, -1.0, 1.0) * et;
  const double dz = uniform(rng_, -1.0, 1.0) * et;
  const double dth = uniform(rng_, -1.0, 1.0) * er;
  const bool sampled_partial = uniform(rng_, 0.0, 1.0) < env_.partial_insert_prob;
  const double sampled_depth = uniform(rng_, 0.0, 1.0);
  const double start_dx = uniform(rng_, -1.0, 1.0) * env_.start_dx_max;
  const double start_h = uniform(rng_, env_.start_height_min, env_.start_height_max);
  const double free_pick = uniform(rng_, 0.0, 1.0);

  EpisodeStart start;
  start.target_slot = spec.target_slot.value_or(sampled_slot);
  if (start.target_slot < 0 || start.target_slot >= n) {
    throw std::invalid_argument("target slot " + std::to_string(start.target_slot) +
                                " out of range");
  }
  switch (spec.blocker) {
    case BlockerMode::kSampled:
      if (sampled_blocker) start.blocker_slot = start.target_slot;
      break;
    case BlockerMode::kNone:
      break;
    case BlockerMode::kTargetSlot:
      start.blocker_slot = start.target_slot;
      break;
    case BlockerMode::kFixedSlot:
      start.blocker_slot = spec.blocker_slot;
      break;
  }
  const WorldGeometry world = spawn_world(layout_, plate_, start.blocker_slot);
  start.true_goal = seated_pose(world.slot_centers_x[static_cast<std::size_t>(start.target_slot)]);
  start.noisy_goal = compose(start.true_goal, Pose2{dx, dz, dth});

  if (spec.partial_insert.value_or(sampled_partial)) {
    // Partially inserted in the true slot, or a free neighbour when it is blocked.
    int slot = start.target_slot;
    if (start.blocker_slot == slot) {
      std::vector<int> free;
      for (int s = 0; s < n; ++s) {
        if (s != slot && std::abs(s - slot) == 1) free.push_back(s);
      }
      if (free.empty()) {
        for (int s = 0; s < n; ++s) {
          if (s != slot) free.push_back(s);
        }
      }
      if (!free.empty()) {
        slot = free[std::min(free.size() - 1, static_cast<std::size_t>(free_pick * free.size()))];
      }
    }
    const double u = std::clamp(spec.partial_depth.value_or(sampled_depth), 0.0, 1.0);
    const Pose2 seated = seated_pose(world.slot_centers_x[static_cast<std::size_t>(slot)]);
    const double lift = (1.0 - u) * (world.slot_top_z - world.slot_floor_z);
    start.body.pose = Pose2{seated.x(), seated.z() + lift, seated.theta()};
  } else {
    const double sdx = spec.start_dx.value_or(start_dx);
    start.body.pose = Pose2{start.noisy_goal.x() + sdx,
                            start.noisy_goal.z() + (world.slot_top_z - world.slot_floor_z) +
                                spec.start_height.value_or(start_h),
                            start.noisy_goal.theta()};
    // Keep the plate between the end walls, which rise above the start region.
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& [cx, cz] : plate_corners(start.body.pose, plate_)) {
      lo = std::min(lo, cx - start.body.pose.x());
      hi = std::max(hi, cx - start.body.pose.x());
    }
    const double half_pitch = 0.5 * layout_.slot_pitch;
    const double inner = 0.5 * layout_.wall_thickness + kStartWallGap;
    const double left = world.slot_centers_x.front() - half_pitch + inner - lo;
    const double right = world.slot_centers_x.back() + half_pitch - inner - hi;
    start.body.pose = Pose2{std::clamp(start.body.pose.x(), left, right), start.body.pose.z(),
                            start.body.pose.theta()};
  }
  return restore(start, rng_());
}

std::vector<double> InsertionEnv::restore(const EpisodeStart& start, std::uint64_t seed) {
  rng_.seed(seed);
  state_ = EpisodeState{};
  state_.start = start;
  state_.world = spawn_world(layout_, plate_, start.blocker_slot);
  state_.body = start.body;
  state_.active_target = start.body.pose;
  std::vector<ContactPoint> contacts = detect_contacts(state_.body.pose, plate_, state_.world);
  contact_forces(contacts, state_.body, sim_);
  state_.last_wrench = end_effector_wrench(contacts);
  state_.history.push_front(capture_frame());
  started_ = true;
  return observation();
}

ObservationFrame InsertionEnv::capture_frame() const {
  const Pose2& goal = state_.start.noisy_goal;
  const Pose2 g_inv = inverse(Pose2{0.0, 0.0, goal.theta()});
  auto [vx, vz] = g_inv.rotate(state_.body.twist.vx, state_.body.twist.vz);
  return {relative_pose(goal, state_.body.pose), state_.last_wrench,
          {vx, vz, state_.body.twist.omega}};
}

std::vector<double> InsertionEnv::observation() const {
  return build_observation(state_.history, env_.history, env_.include_velocity);
}

StepResult InsertionEnv::step(const Action& action) {
  const int delay = std::uniform_int_distribution<int>(env_.delay_min, env_.delay_max)(rng_);
  return step_with_delay(action, delay);
}

StepResult InsertionEnv::step_with_delay(const Action& raw_action, int delay) {
  if (!started_) throw std::logic_error("step called before reset");
  if (state_.terminal) throw std::logic_error("step called on a terminated episode");
  if (delay < 0 || delay > env_.lowlevel_per_policy) {
    throw std::invalid_argument("delay outside [0, lowlevel_per_policy]");
  }
  Action action{};
  for (std::size_t i = 0; i < 3; ++i) action[i] = std::clamp(raw_action[i], -1.0, 1.0);

  StepResult result;
  StepInfo& info = result.info;
  info.delay = delay;
  bool jam = false;

  for (int tick = 0; tick < env_.lowlevel_per_policy && !jam; ++tick) {
    if (tick == delay) {
      state_.active_target =
          compose_target(state_.body.pose, state_.start.noisy_goal, action, env_);
    }
    StepOutput out =
        step_lowlevel(state_.body, state_.active_target, plate_, state_.world, sim_);
    state_.body = out.state;
    state_.last_wrench = end_effector_wrench(out.contacts);
    const double force = state_.last_wrench.force_norm();
    info.peak_force = std::max(info.peak_force, force);
    for (const ContactPoint& c : out.contacts) {
      info.max_penetration = std::max(info.max_penetration, c.penetration);
    }
    info.contact_count = static_cast<int>(out.contacts.size());
    state_.jam_counter = force > env_.jam_force ? state_.jam_counter + 1 : 0;
    jam = state_.jam_counter >= env_.jam_hold;
  }
  if (delay == env_.lowlevel_per_policy) {
    state_.active_target =
        compose_target(state_.body.pose, state_.start.noisy_goal, action, env_);
  }

  state_.history.push_front(capture_frame());
  while (state_.history.size() > static_cast<std::size_t>(env_.history)) {
    state_.history.pop_back();
  }
  ++state_.step_count;

  const SuccessCheck sc =
      check_success(state_.body.pose, plate_, state_.world, state_.success_counter, env_);
  state_.success_counter = sc.counter;
  const bool success = sc.success && !jam;

  const Pose2 rel_true = relative_pose(state_.start.true_goal, state_.body.pose);
  result.reward = reward(rel_true, action, state_.prev_action, {success, jam}, env_);
  state_.prev_action = action;

  if (jam) {
    result.terminated = Termination::kJam;
  } else if (success) {
    result.terminated = Termination::kSuccess;
  }
  result.truncated = result.terminated == Termination::kNone && state_.step_count >= env_.horizon;
  state_.terminal = result.done();

  const PoseErrorNorms d = pose_error_norms(rel_true);
  info.composed_target = state_.active_target;
  info.body = state_.body;
  info.wrench = state_.last_wrench;
  info.dist_trans = d.trans_m;
  info.dist_rot = d.rot_rad;
  info.in_success_region = sc.in_region;
  info.strict_success =
      d.trans_m <= env_.strict_success_trans && d.rot_rad <= env_.strict_success_rot;
  info.success_counter = state_.success_counter;
  info.jam_counter = state_.jam_counter;
  result.observation = observation();
  return result;
}

}  // namespace slotbench
