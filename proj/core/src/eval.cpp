#include "slotbench/eval.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "slotbench/config.hpp"

namespace slotbench {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const char* blocker_name(BlockerMode m) {
  switch (m) {
    case BlockerMode::kSampled:
      return "sampled";
    case BlockerMode::kNone:
      return "none";
    case BlockerMode::kTargetSlot:
      return "target";
    case BlockerMode::kFixedSlot:
      break;
  }
  return "fixed";
}

}  // namespace

void EvalProtocol::validate(int num_slots) const {
  if (trials_per_slot < 1) throw std::invalid_argument("trials_per_slot must be >= 1");
  if (slots.empty()) throw std::invalid_argument("protocol needs at least one slot");
  for (int s : slots) {
    if (s < 0 || s >= num_slots) throw std::invalid_argument("protocol slot out of range");
  }
  if (noise_fraction < 0.0 || noise_fraction > 1.0) {
    throw std::invalid_argument("noise_fraction must lie in [0, 1]");
  }
}

SuccessSummary summarize_rates(std::span<const double> per_trial) {
  SuccessSummary s;
  s.per_trial.assign(per_trial.begin(), per_trial.end());
  if (per_trial.empty()) return s;
  const double n = static_cast<double>(per_trial.size());
  s.mean = std::accumulate(per_trial.begin(), per_trial.end(), 0.0) / n;
  if (per_trial.size() > 1) {
    double ss = 0.0;
    for (double r : per_trial) ss += (r - s.mean) * (r - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

SuccessSummary aggregate_success(std::span<const EpisodeRecord> episodes, int trials_per_slot) {
  if (trials_per_slot < 1) throw std::invalid_argument("trials_per_slot must be >= 1");
  std::vector<double> hits(static_cast<std::size_t>(trials_per_slot), 0.0);
  std::vector<double> counts(hits.size(), 0.0);
  for (const EpisodeRecord& e : episodes) {
    if (e.trial < 0 || e.trial >= trials_per_slot) {
      throw std::invalid_argument("episode trial index out of range");
    }
    const auto t = static_cast<std::size_t>(e.trial);
    counts[t] += 1.0;
    if (e.outcome == Termination::kSuccess) hits[t] += 1.0;
  }
  std::vector<double> rates;
  for (std::size_t t = 0; t < hits.size(); ++t) {
    if (counts[t] > 0.0) rates.push_back(hits[t] / counts[t]);
  }
  return summarize_rates(rates);
}

std::uint64_t episode_seed(std::uint64_t base, int slot, int trial) {
  return splitmix64(splitmix64(base ^ 0x51a7be9c4f3d2e1bULL) + static_cast<std::uint64_t>(slot) * 1000003ULL +
                    static_cast<std::uint64_t>(trial));
}

EpisodeLog run_episode(InsertionEnv& env, EpisodePolicy& policy, const EpisodeSpec& spec,
                       std::uint64_t seed, EpisodeRecord* record) {
  EpisodeLog log;
  std::vector<double> obs = env.reset(seed, spec);
  log.header.seed = seed;
  log.header.policy = policy.name();
  log.header.start = env.state().start;
  log.header.slot = env.state().start.target_slot;
  log.header.build = build_id();
  policy.begin_episode(env, splitmix64(seed));

  EpisodeRecord rec;
  rec.slot = log.header.slot;
  rec.seed = seed;
  for (int t = 0; env.episode_active(); ++t) {
    const Action action = policy.act(env, obs);
    StepResult r = env.step(action);
    log.steps.push_back(make_step_log(t, action, r));
    rec.episode_return += r.reward;
    rec.peak_force = std::max(rec.peak_force, r.info.peak_force);
    rec.steps = t + 1;
    rec.outcome = r.terminated;
    rec.truncated = r.truncated;
    rec.strict_success = r.info.strict_success;
    obs = std::move(r.observation);
  }
  if (record) *record = rec;
  return log;
}

EvalReport run_evaluation(const EvalProtocol& protocol, InsertionEnv& env, EpisodePolicy& policy,
                          const EpisodeSink& sink) {
  protocol.validate(env.layout().num_slots);
  EvalReport report;
  report.policy = policy.name();
  report.protocol = protocol;
  long index = 0;
  for (int trial = 0; trial < protocol.trials_per_slot; ++trial) {
    for (int slot : protocol.slots) {
      EpisodeSpec spec;
      spec.noise_fraction = protocol.noise_fraction;
      spec.target_slot = slot;
      spec.blocker = protocol.blocker;
      spec.blocker_slot = protocol.blocker_slot;
      spec.partial_insert = protocol.partial_insert;
      spec.start_dx = protocol.start_dx;
      spec.start_height = protocol.start_height;
      EpisodeRecord rec;
      EpisodeLog log = run_episode(env, policy, spec, episode_seed(protocol.seed, slot, trial), &rec);
      rec.trial = trial;
      log.header.trial = trial;
      log.header.episode = index++;
      log.header.config_json = protocol.config_json;
      report.episodes.push_back(rec);
      if (sink) sink(log);
    }
  }
  report.success = aggregate_success(report.episodes, protocol.trials_per_slot);
  return report;
}

std::string report_to_json(const EvalReport& report, const std::string& config_json) {
  using nlohmann::json;
  const EvalProtocol& p = report.protocol;
  json j;
  j["policy"] = report.policy;
  j["build"] = build_id();
  j["seed"] = p.seed;
  j["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  j["protocol"] = {{"slots", p.slots},
                   {"trials_per_slot", p.trials_per_slot},
                   {"blocker", blocker_name(p.blocker)},
                   {"blocker_slot", p.blocker_slot},
                   {"noise_fraction", p.noise_fraction},
                   {"partial_insert", p.partial_insert},
                   {"start_dx_m", p.start_dx},
                   {"start_height_m", p.start_height}};
  j["success"] = {{"per_trial", report.success.per_trial},
                  {"mean", report.success.mean},
                  {"std", report.success.std},
                  {"episodes", report.episodes.size()}};
  json eps = json::array();
  for (const EpisodeRecord& e : report.episodes) {
    eps.push_back({{"slot", e.slot},
                   {"trial", e.trial},
                   {"seed", e.seed},
                   {"outcome", termination_name(e.outcome)},
                   {"truncated", e.truncated},
                   {"steps", e.steps},
                   {"peak_force_n", e.peak_force},
                   {"return", e.episode_return},
                   {"strict_success", e.strict_success}});
  }
  j["episodes"] = eps;
  return j.dump(2);
}

}  // namespace slotbench
