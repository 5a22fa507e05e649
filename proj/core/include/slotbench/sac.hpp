#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "slotbench/checkpoint.hpp"
#include "slotbench/insertion_env.hpp"
#include "slotbench/neural.hpp"

namespace slotbench {

inline constexpr int kActionDim = 3;

enum class DoneKind : std::uint8_t { kNone = 0, kTerminal = 1, kTruncated = 2 };

struct Transition {
  std::vector<double> observation;
  Action action{};
  double reward = 0.0;
  std::vector<double> next_observation;
  DoneKind done = DoneKind::kNone;
};

/// Columns are samples. `terminal` is 1 only for true terminations.
struct Batch {
  Matrix obs;
  Matrix action;
  RowVector reward;
  Matrix next_obs;
  RowVector terminal;
};

/// Fixed-capacity FIFO ring over flat storage.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim);

  void push(const Transition& t);
  /// i.i.d. uniform with replacement. Throws std::logic_error when empty or n == 0.
  Batch sample(std::size_t n, std::mt19937_64& rng) const;
  Transition at(std::size_t i) const;  // i-th oldest stored item

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }

 private:
  std::size_t capacity_;
  int obs_dim_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::vector<double> obs_;
  std::vector<double> next_obs_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<DoneKind> done_;
};

/// Fixed per-component rescaling of raw observations before they reach the networks.
struct ObservationScaler {
  std::vector<double> scale;
  double clip = 20.0;

  static ObservationScaler for_frames(int history, bool include_velocity);
  static ObservationScaler identity(int dim);
  void apply(std::span<double> obs) const;
  Matrix apply(const Matrix& obs) const;
};

struct SacConfig {
  int batch = 256;
  double gamma = 0.99;
  double lr = 3e-4;
  double initial_alpha = 2.718281828459045;
  std::optional<double> target_entropy;  // -action_dim when unset
  bool learn_alpha = true;
  bool twin_critics = true;
  double polyak_tau = 0.005;
  int updates_per_iteration = 50;
  int env_steps_per_iteration = 140;
  long iterations = 5000;
  long prefill_steps = 5000;
  int workers = 4;
  std::size_t buffer_capacity = 262144;
  std::vector<int> hidden{256, 256};
  double actor_output_init = 3e-3;

  void validate() const;
  double resolved_target_entropy() const { return target_entropy.value_or(-kActionDim); }
};

struct TrainState {
  Mlp actor;
  Mlp critic1;
  Mlp critic2;
  Mlp target1;
  Mlp target2;
  double log_alpha = 1.0;
  AdamState alpha_adam{{0.0}, {0.0}, 0};
  long iteration = 0;
  long env_steps = 0;
  long updates = 0;
  std::mt19937_64 rng;

  double alpha() const { return std::exp(log_alpha); }
};

TrainState make_train_state(int obs_dim, const SacConfig& cfg, std::uint64_t seed);

double critic_update(TrainState& state, const Batch& batch, const SacConfig& cfg);

struct ActorUpdateResult {
  double loss = 0.0;
  double entropy = 0.0;       // -mean log pi
  double mean_log_prob = 0.0;
};

ActorUpdateResult actor_update(TrainState& state, const Batch& batch, const SacConfig& cfg);

/// One Adam step on log_alpha with loss -log_alpha * (mean log pi + target entropy).
void alpha_update(TrainState& state, double mean_log_prob, const SacConfig& cfg);
/// Same, drawing fresh actions for the batch.
void alpha_update(TrainState& state, const Batch& batch, const SacConfig& cfg);

void target_polyak(TrainState& state, double tau);

/// Actor loss and its analytic gradient for fixed noise, without updating anything.
/// Used by the gradient checks.
double actor_loss_and_grad(const TrainState& state, const Matrix& obs, const Matrix& noise,
                           ParamVector* grad);
double alpha_loss(double log_alpha, double mean_log_prob, double target_entropy);

/// Deterministic action tanh(mean) for a single raw observation.
Action policy_mean_action(const Mlp& actor, const ObservationScaler& scaler,
                          std::span<const double> obs);

struct IterationMetrics {
  long iteration = 0;
  long env_steps = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double epsilon_frac = 0.0;
  long episodes = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const IterationMetrics& m);

using EnvFactory = std::function<std::unique_ptr<Environment>(int worker)>;

struct TrainHooks {
  std::function<void(const IterationMetrics&, const TrainState&)> on_iteration;
};

struct TrainResult {
  TrainState state;
  std::vector<IterationMetrics> metrics;
  long prefill_episodes = 0;
};

/// Random-action prefill, then per iteration: collect with the stochastic policy
/// under the curriculum noise, push, and run updates_per_iteration rounds of
/// critic/actor/alpha/polyak updates. Workers own private environments and RNG
/// streams; their transitions are merged in worker order, so results are
/// reproducible for a fixed worker count.
TrainResult train_loop(const EnvFactory& factory, const SacConfig& cfg,
                       const Curriculum& curriculum, const ObservationScaler& scaler,
                       std::uint64_t seed, const TrainHooks& hooks = {});

Checkpoint make_checkpoint(const TrainState& state);
/// Restores networks and log_alpha (optimizer moments are not stored).
void load_networks(TrainState& state, const Checkpoint& ckpt);

}  // namespace slotbench
