#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "slotbench/contact_sim.hpp"
#include "slotbench/se2.hpp"

namespace slotbench {

using Action = std::array<double, 3>;

struct RewardConfig {
  double r_drop = -1.1;
  double r_success = 0.5;
  double k_dist_trans = 8.59e-3;
  double k_dist_rot = 8.21e-3;
  double k_da_trans = 8.59e-3;
  double k_da_rot = 8.21e-3;
  double lambda_dist_trans = 0.5;
  double lambda_dist_rot = deg_to_rad(30.0);
  double lambda_da_trans = 0.5;
  double lambda_da_rot = deg_to_rad(30.0);
};

struct EnvConfig {
  int horizon = 128;
  int history = 8;
  int lowlevel_per_policy = 50;
  int delay_min = 7;
  int delay_max = 13;
  double eps_trans_max = 0.05;
  double eps_rot_max = deg_to_rad(5.0);
  double action_scale_trans = 0.45;
  double action_scale_rot = deg_to_rad(50.0);
  int success_hold = 10;
  double success_dx = 0.045;
  double success_depth = 0.02;  // plate bottom must be this far below the slot top
  double strict_success_trans = 0.02;
  double strict_success_rot = deg_to_rad(10.0);
  double jam_force = 50.0;
  int jam_hold = 200;
  double partial_insert_prob = 0.5;
  double start_dx_max = 0.10;
  double start_height_min = 0.10;  // plate bottom above slot top, relative to the noisy goal
  double start_height_max = 0.25;
  double blocker_prob = 0.5;
  bool include_velocity = false;
  RewardConfig reward;

  void validate() const;
  int frame_width() const { return include_velocity ? 9 : 6; }
  int observation_size() const { return frame_width() * history; }
};

/// Piecewise-linear noise multiplier over training iterations.
struct Curriculum {
  std::vector<std::pair<double, double>> breakpoints{{0.0, 1.0}};

  /// (0, 0) -> (10% of total, 0) -> (50% of total, 1).
  static Curriculum ramp(long total_iterations);
  static Curriculum constant(double fraction);
  void validate() const;
  double fraction(double iteration) const;
};

struct NoiseLevel {
  double trans = 0.0;
  double rot = 0.0;
};

NoiseLevel curriculum_epsilon(double iteration, const Curriculum& curriculum,
                              const EnvConfig& cfg);

struct ObservationFrame {
  Pose2 rel_pose;    // end effector w.r.t. the noisy goal
  Wrench2 wrench;    // contact wrench exerted by the end effector, base frame
  Twist2 rel_twist;  // end-effector twist in the noisy-goal frame
};

/// Newest frame first; missing older frames repeat the oldest available frame.
std::vector<double> build_observation(const std::deque<ObservationFrame>& history, int h,
                                      bool include_velocity);

/// Residual target: the normalized action is added to a base motion toward the
/// noisy goal, clamped to [-1, 1] per axis, scaled, and applied in the current frame.
Pose2 compose_target(const Pose2& current, const Pose2& noisy_goal, const Action& action,
                     const EnvConfig& cfg);
/// Per-axis base term of compose_target, in normalized action units.
Action base_action(const Pose2& current, const Pose2& noisy_goal, const EnvConfig& cfg);

struct RewardEvents {
  bool success = false;
  bool jam = false;
};

double reward(const Pose2& rel_true, const Action& action, const Action& prev_action,
              RewardEvents events, const EnvConfig& cfg);

struct SuccessCheck {
  bool in_region = false;
  bool success = false;
  int counter = 0;
};

SuccessCheck check_success(const Pose2& ee, const PlateShape& plate, const WorldGeometry& world,
                           int counter, const EnvConfig& cfg);

enum class Failure { kNone, kJam, kHorizon };

/// Jam when the force norm exceeds jam_force for jam_hold consecutive low-level
/// steps; horizon when step_count has reached the horizon.
Failure check_failure(std::span<const Wrench2> lowlevel_wrenches, int step_count,
                      const EnvConfig& cfg);

enum class Termination { kNone, kSuccess, kJam };

enum class BlockerMode { kSampled, kNone, kTargetSlot, kFixedSlot };

/// Per-episode overrides for reset; unset fields are sampled from the config.
struct EpisodeSpec {
  double noise_fraction = 1.0;
  std::optional<int> target_slot;
  BlockerMode blocker = BlockerMode::kSampled;
  int blocker_slot = 0;  // for kFixedSlot
  std::optional<bool> partial_insert;
  std::optional<double> partial_depth;  // 1 = fully seated
  std::optional<double> start_dx;       // overrides the sampled start offset
  std::optional<double> start_height;   // overrides the sampled start height
};

struct StepInfo {
  int delay = 0;
  Pose2 composed_target;
  BodyState body;
  Wrench2 wrench;
  int contact_count = 0;
  double max_penetration = 0.0;
  double peak_force = 0.0;
  double dist_trans = 0.0;  // to the true goal
  double dist_rot = 0.0;
  bool in_success_region = false;
  bool strict_success = false;
  int success_counter = 0;
  int jam_counter = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  Termination terminated = Termination::kNone;
  bool truncated = false;
  StepInfo info;

  bool done() const { return truncated || terminated != Termination::kNone; }
};

/// Everything needed to restart an episode deterministically.
struct EpisodeStart {
  int target_slot = 0;
  std::optional<int> blocker_slot;
  Pose2 true_goal;
  Pose2 noisy_goal;
  BodyState body;
};

struct EpisodeState {
  EpisodeStart start;
  WorldGeometry world;
  BodyState body;
  int step_count = 0;
  int success_counter = 0;
  int jam_counter = 0;
  Action prev_action{};
  std::deque<ObservationFrame> history;
  Pose2 active_target;
  bool terminal = false;
  Wrench2 last_wrench;
};

/// What the trainer needs from an environment.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  virtual std::vector<double> reset_episode(std::uint64_t seed, double noise_fraction) = 0;
  virtual StepResult step(const Action& action) = 0;
};

class InsertionEnv final : public Environment {
 public:
  InsertionEnv(EnvConfig env, SimConfig sim, LayoutConfig layout, PlateShape plate);

  std::vector<double> reset(std::uint64_t seed, const EpisodeSpec& spec = {});
  /// Starts from a recorded episode start; the delay stream is seeded by `seed`.
  std::vector<double> restore(const EpisodeStart& start, std::uint64_t seed);

  /// Samples the inference delay from the configured range and advances one policy step.
  StepResult step(const Action& action) override;
  /// Advances one policy step with an explicit delay (open-loop replay).
  StepResult step_with_delay(const Action& action, int delay);

  std::vector<double> reset_episode(std::uint64_t seed, double noise_fraction) override {
    EpisodeSpec spec;
    spec.noise_fraction = noise_fraction;
    return reset(seed, spec);
  }

  std::vector<double> observation() const;

  const EpisodeState& state() const { return state_; }
  const EnvConfig& config() const { return env_; }
  const SimConfig& sim_config() const { return sim_; }
  const LayoutConfig& layout() const { return layout_; }
  const PlateShape& plate() const { return plate_; }
  int observation_size() const override { return env_.observation_size(); }
  bool episode_active() const { return started_ && !state_.terminal; }

 private:
  ObservationFrame capture_frame() const;
  Pose2 seated_pose(double slot_x) const;

  EnvConfig env_;
  SimConfig sim_;
  LayoutConfig layout_;
  PlateShape plate_;
  std::mt19937_64 rng_;
  EpisodeState state_;
  bool started_ = false;
};

}  // namespace slotbench
