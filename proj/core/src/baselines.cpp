#include <algorithm>
#include <cmath>

#include "slotbench/policy.hpp"

namespace slotbench {

LearnedPolicy::LearnedPolicy(Mlp actor, ObservationScaler scaler)
    : actor_(std::move(actor)), scaler_(std::move(scaler)) {
  if (static_cast<std::size_t>(actor_.spec().input_dim) != scaler_.scale.size()) {
    throw std::invalid_argument("actor input width does not match the observation scaler");
  }
}

Action LearnedPolicy::act(const InsertionEnv& env, std::span<const double> observation) {
  (void)env;
  return policy_mean_action(actor_, scaler_, observation);
}

Action action_for_displacement(const Pose2& current, const Pose2& noisy_goal, double dx,
                               double dz, double dtheta, const EnvConfig& cfg) {
  // compose_target applies the composite in the current end-effector frame.
  const auto [lx, lz] = inverse(Pose2{0.0, 0.0, current.theta()}).rotate(dx, dz);
  const Action base = base_action(current, noisy_goal, cfg);
  return {std::clamp(lx / cfg.action_scale_trans - base[0], -1.0, 1.0),
          std::clamp(lz / cfg.action_scale_trans - base[1], -1.0, 1.0),
          std::clamp(dtheta / cfg.action_scale_rot - base[2], -1.0, 1.0)};
}

Action straight_down_action(const InsertionEnv& env) {
  return action_for_displacement(env.state().body.pose, env.state().start.noisy_goal, 0.0,
                                 -kStraightDownStep, 0.0, env.config());
}

Action StraightDownPolicy::act(const InsertionEnv& env, std::span<const double> observation) {
  (void)observation;
  return straight_down_action(env);
}

Action random_search_action(const InsertionEnv& env, RandomSearchState& state,
                            std::mt19937_64& rng, const RandomSearchConfig& cfg) {
  using Phase = RandomSearchState::Phase;
  const EpisodeState& es = env.state();
  const Pose2& pose = es.body.pose;
  const Pose2& goal = es.start.noisy_goal;
  const EnvConfig& ecfg = env.config();

  if (state.phase == Phase::kDescend && es.last_wrench.force_norm() >= cfg.contact_force &&
      es.success_counter == 0) {
    state.phase = Phase::kRetreat;
    state.retreat_z = goal.z() + (es.world.slot_top_z - es.world.slot_floor_z) +
                      cfg.retreat_clearance;
  }
  if (state.phase == Phase::kRetreat && pose.z() >= state.retreat_z - cfg.reposition_tolerance) {
    state.phase = Phase::kReposition;
    const double half = 0.5 * cfg.square_side;
    state.x_offset = std::uniform_real_distribution<double>(-half, half)(rng);
  }
  if (state.phase == Phase::kReposition &&
      std::abs(goal.x() + state.x_offset - pose.x()) <= cfg.reposition_tolerance) {
    state.phase = Phase::kDescend;
  }

  switch (state.phase) {
    case Phase::kRetreat:
      return action_for_displacement(pose, goal, 0.0, state.retreat_z - pose.z(), 0.0, ecfg);
    case Phase::kReposition:
      return action_for_displacement(pose, goal, goal.x() + state.x_offset - pose.x(),
                                     state.retreat_z - pose.z(), 0.0, ecfg);
    case Phase::kDescend:
      break;
  }
  return action_for_displacement(pose, goal, 0.0, -cfg.descend_step, 0.0, ecfg);
}

void RandomSearchPolicy::begin_episode(const InsertionEnv& env, std::uint64_t seed) {
  (void)env;
  state_ = RandomSearchState{};
  rng_.seed(seed);
}

Action RandomSearchPolicy::act(const InsertionEnv& env, std::span<const double> observation) {
  (void)observation;
  return random_search_action(env, state_, rng_, cfg_);
}

}  // namespace slotbench
