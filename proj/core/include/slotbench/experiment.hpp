#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "slotbench/checkpoint.hpp"
#include "slotbench/config.hpp"
#include "slotbench/eval.hpp"
#include "slotbench/insertion_env.hpp"
#include "slotbench/policy.hpp"
#include "slotbench/sac.hpp"

namespace slotbench {

std::unique_ptr<InsertionEnv> make_env(const RunConfig& cfg);
EvalProtocol make_protocol(const RunConfig& cfg, std::uint64_t seed);

TrainResult train_policy(const RunConfig& cfg, std::uint64_t seed, const TrainHooks& hooks = {});

/// Training checkpoint plus the observation layout needed to rebuild the policy.
Checkpoint policy_checkpoint(const TrainState& state, const RunConfig& cfg);

/// Loads the actor from `path`. Throws std::runtime_error when the file is missing or
/// its observation width does not match `cfg`.
std::unique_ptr<LearnedPolicy> load_learned_policy(const std::filesystem::path& path,
                                                   const RunConfig& cfg);

/// "straight-down", "random-search", or a checkpoint path.
std::unique_ptr<EpisodePolicy> make_policy(const std::string& spec, const RunConfig& cfg);

/// Training-time and evaluation-time configs of one ablation variant.
struct AblationVariant {
  std::string name;
  RunConfig train;
  RunConfig eval;
};

/// Throws ConfigError for an unknown name.
AblationVariant make_variant(const RunConfig& base, const std::string& name);

struct AblationRow {
  std::string variant;
  std::vector<std::uint64_t> seeds;
  std::vector<double> success;  // per seed
  double mean = 0.0;
  double std = 0.0;  // sample std over seeds
  std::string error;  // non-empty when a seed failed
};

/// Seed of (variant, repetition); depends only on the base seed and the name.
std::uint64_t variant_seed(std::uint64_t base, const std::string& variant, int repetition);

struct AblationHooks {
  std::function<void(const std::string& variant, int repetition, const IterationMetrics&)>
      on_iteration;
  std::function<void(const AblationRow&)> on_row;
};

/// Trains and evaluates every variant in cfg.ablation. Failures are recorded in the
/// row and the grid continues.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::uint64_t seed,
                                      const AblationHooks& hooks = {});

std::string ablation_to_json(const std::vector<AblationRow>& rows, std::uint64_t seed,
                             const std::string& config_json);

}  // namespace slotbench
