#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>

#include "slotbench/insertion_env.hpp"
#include "slotbench/neural.hpp"
#include "slotbench/sac.hpp"

namespace slotbench {

/// A controller that can drive InsertionEnv episodes. Scripted policies may read the
/// robot-side state (end-effector pose, noisy goal, measured wrench) from the env.
class EpisodePolicy {
 public:
  virtual ~EpisodePolicy() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(const InsertionEnv& env, std::uint64_t seed) {
    (void)env;
    (void)seed;
  }
  virtual Action act(const InsertionEnv& env, std::span<const double> observation) = 0;
};

/// Deterministic tanh(mean) of a trained actor.
class LearnedPolicy final : public EpisodePolicy {
 public:
  LearnedPolicy(Mlp actor, ObservationScaler scaler);
  std::string name() const override { return "checkpoint"; }
  Action act(const InsertionEnv& env, std::span<const double> observation) override;
  const Mlp& actor() const { return actor_; }

 private:
  Mlp actor_;
  ObservationScaler scaler_;
};

/// Action whose composed target is `current` displaced by (dx, dz, dtheta) in the base
/// frame, subject to the action bounds.
Action action_for_displacement(const Pose2& current, const Pose2& noisy_goal, double dx,
                               double dz, double dtheta, const EnvConfig& cfg);

inline constexpr double kStraightDownStep = 0.05;

Action straight_down_action(const InsertionEnv& env);

class StraightDownPolicy final : public EpisodePolicy {
 public:
  std::string name() const override { return "straight-down"; }
  Action act(const InsertionEnv& env, std::span<const double> observation) override;
};

struct RandomSearchConfig {
  double square_side = 0.05;
  double contact_force = 3.0;
  double descend_step = 0.45;  // downward target offset while descending
  double retreat_clearance = 0.05;  // plate bottom above the slot top
  double reposition_tolerance = 0.005;
};

struct RandomSearchState {
  enum class Phase { kDescend, kRetreat, kReposition };
  Phase phase = Phase::kDescend;
  double x_offset = 0.0;
  double retreat_z = 0.0;  // end-effector height to retreat to
};

/// One step of the random-search baseline. Advances `state` and returns the action.
Action random_search_action(const InsertionEnv& env, RandomSearchState& state,
                            std::mt19937_64& rng, const RandomSearchConfig& cfg = {});

class RandomSearchPolicy final : public EpisodePolicy {
 public:
  explicit RandomSearchPolicy(RandomSearchConfig cfg = {}) : cfg_(cfg) {}
  std::string name() const override { return "random-search"; }
  void begin_episode(const InsertionEnv& env, std::uint64_t seed) override;
  Action act(const InsertionEnv& env, std::span<const double> observation) override;
  const RandomSearchState& state() const { return state_; }

 private:
  RandomSearchConfig cfg_;
  RandomSearchState state_;
  std::mt19937_64 rng_;
};

}  // namespace slotbench
