#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "slotbench/episode_log.hpp"
#include "slotbench/insertion_env.hpp"
#include "slotbench/policy.hpp"

namespace slotbench {

struct EvalProtocol {
  std::vector<int> slots{0, 1, 2};
  int trials_per_slot = 4;
  BlockerMode blocker = BlockerMode::kTargetSlot;
  int blocker_slot = 0;  // for BlockerMode::kFixedSlot
  double noise_fraction = 1.0;
  bool partial_insert = false;
  double start_dx = 0.0;
  double start_height = 0.10;
  std::uint64_t seed = 0;
  std::string config_json;  // copied into episode log headers

  /// Throws std::invalid_argument.
  void validate(int num_slots) const;
};

struct EpisodeRecord {
  int slot = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  Termination outcome = Termination::kNone;
  bool truncated = false;
  int steps = 0;
  double peak_force = 0.0;
  double episode_return = 0.0;
  bool strict_success = false;  // final pose within the strict tolerance
};

struct SuccessSummary {
  std::vector<double> per_trial;  // success rate across slots, one per trial index
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over trial indices
};

/// Mean and sample standard deviation of per-trial success rates.
SuccessSummary summarize_rates(std::span<const double> per_trial);
/// Per-trial success rates from episode records, then summarize_rates.
SuccessSummary aggregate_success(std::span<const EpisodeRecord> episodes, int trials_per_slot);

struct EvalReport {
  std::string policy;
  EvalProtocol protocol;
  std::vector<EpisodeRecord> episodes;
  SuccessSummary success;
};

/// Seed of the episode for (slot, trial); stable across protocol sizes.
std::uint64_t episode_seed(std::uint64_t base, int slot, int trial);

using EpisodeSink = std::function<void(const EpisodeLog&)>;

/// Runs one episode with the given overrides and returns its record and log.
EpisodeLog run_episode(InsertionEnv& env, EpisodePolicy& policy, const EpisodeSpec& spec,
                       std::uint64_t seed, EpisodeRecord* record = nullptr);

/// Trial-major loop over slots. Learned policies act deterministically; scripted
/// policies are seeded per episode.
EvalReport run_evaluation(const EvalProtocol& protocol, InsertionEnv& env, EpisodePolicy& policy,
                          const EpisodeSink& sink = {});

std::string report_to_json(const EvalReport& report, const std::string& config_json);

}  // namespace slotbench
