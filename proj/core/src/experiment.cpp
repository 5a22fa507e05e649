#include "slotbench/experiment.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace slotbench {

namespace {

BlockerMode blocker_mode(const std::string& s) {
  if (s == "target") return BlockerMode::kTargetSlot;
  if (s == "none") return BlockerMode::kNone;
  if (s == "fixed") return BlockerMode::kFixedSlot;
  if (s == "sampled") return BlockerMode::kSampled;
  throw ConfigError("unknown blocker mode '" + s + "'");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::unique_ptr<InsertionEnv> make_env(const RunConfig& cfg) {
  return std::make_unique<InsertionEnv>(cfg.env, cfg.sim, cfg.layout, cfg.plate);
}

EvalProtocol make_protocol(const RunConfig& cfg, std::uint64_t seed) {
  EvalProtocol p;
  p.slots = cfg.eval.slots;
  p.trials_per_slot = cfg.eval.trials_per_slot;
  p.blocker = blocker_mode(cfg.eval.blocker);
  p.blocker_slot = cfg.eval.blocker_slot;
  p.noise_fraction = cfg.eval.noise_fraction;
  p.partial_insert = cfg.eval.partial_insert;
  p.start_dx = cfg.eval.start_dx;
  p.start_height = cfg.eval.start_height;
  p.seed = seed;
  p.config_json = config_to_json(cfg);
  return p;
}

TrainResult train_policy(const RunConfig& cfg, std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate();
  const EnvFactory factory = [&cfg](int) -> std::unique_ptr<Environment> { return make_env(cfg); };
  return train_loop(factory, cfg.sac, cfg.curriculum.build(cfg.sac.iterations),
                    ObservationScaler::for_frames(cfg.env.history, cfg.env.include_velocity), seed,
                    hooks);
}

Checkpoint policy_checkpoint(const TrainState& state, const RunConfig& cfg) {
  Checkpoint c = make_checkpoint(state);
  c.scalars.emplace_back("history", cfg.env.history);
  c.scalars.emplace_back("include_velocity", cfg.env.include_velocity ? 1.0 : 0.0);
  return c;
}

std::unique_ptr<LearnedPolicy> load_learned_policy(const std::filesystem::path& path,
                                                   const RunConfig& cfg) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("checkpoint not found: " + path.string());
  }
  const Checkpoint c = read_checkpoint(path);
  const NamedNetwork& actor = c.network("actor");
  const int width = cfg.env.observation_size();
  if (actor.spec.input_dim != width ||
      (c.has_scalar("obs_dim") && static_cast<int>(c.scalar("obs_dim")) != width)) {
    throw std::runtime_error("checkpoint " + path.string() + " expects observations of width " +
                             std::to_string(actor.spec.input_dim) + " but the config produces " +
                             std::to_string(width));
  }
  if (c.has_scalar("history") && static_cast<int>(c.scalar("history")) != cfg.env.history) {
    throw std::runtime_error("checkpoint history length does not match the config");
  }
  if (c.has_scalar("include_velocity") &&
      (c.scalar("include_velocity") != 0.0) != cfg.env.include_velocity) {
    throw std::runtime_error("checkpoint velocity setting does not match the config");
  }
  Mlp net(actor.spec);
  net.params().values.assign(actor.values.begin(), actor.values.end());
  return std::make_unique<LearnedPolicy>(
      std::move(net), ObservationScaler::for_frames(cfg.env.history, cfg.env.include_velocity));
}

std::unique_ptr<EpisodePolicy> make_policy(const std::string& spec, const RunConfig& cfg) {
  if (spec == "straight-down") return std::make_unique<StraightDownPolicy>();
  if (spec == "random-search") return std::make_unique<RandomSearchPolicy>(cfg.random_search);
  return load_learned_policy(spec, cfg);
}

AblationVariant make_variant(const RunConfig& base, const std::string& name) {
  AblationVariant v{name, base, base};
  if (name == "h1" || name == "h8" || name == "h16") {
    const int h = std::stoi(name.substr(1));
    v.train.env.history = h;
    v.eval.env.history = h;
  } else if (name == "velocity") {
    v.train.env.include_velocity = true;
    v.eval.env.include_velocity = true;
  } else if (name == "no_delay") {
    v.train.env.delay_min = 0;
    v.train.env.delay_max = 0;
  } else if (name == "no_noise") {
    v.train.curriculum.mode = "constant";
    v.train.curriculum.constant_level = 0.0;
  } else if (name != "baseline") {
    throw ConfigError("unknown ablation variant '" + name + "'");
  }
  // Each side describes a single run, not the grid.
  v.train.ablation.variants = {name};
  v.eval.ablation.variants = {name};
  v.train.validate();
  v.eval.validate();
  return v;
}

std::uint64_t variant_seed(std::uint64_t base, const std::string& variant, int repetition) {
  return episode_seed(base ^ fnv1a(variant), 7919, repetition);
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::uint64_t seed,
                                      const AblationHooks& hooks) {
  std::vector<AblationRow> rows;
  for (const std::string& name : cfg.ablation.variants) {
    AblationRow row;
    row.variant = name;
    try {
      const AblationVariant v = make_variant(cfg, name);
      for (int rep = 0; rep < cfg.ablation.seeds; ++rep) {
        const std::uint64_t s = variant_seed(seed, name, rep);
        row.seeds.push_back(s);
        TrainHooks th;
        if (hooks.on_iteration) {
          th.on_iteration = [&](const IterationMetrics& m, const TrainState&) {
            hooks.on_iteration(name, rep, m);
          };
        }
        const TrainResult trained = train_policy(v.train, s, th);
        auto env = make_env(v.eval);
        LearnedPolicy policy(trained.state.actor, ObservationScaler::for_frames(
                                                      v.eval.env.history, v.eval.env.include_velocity));
        const EvalReport report = run_evaluation(make_protocol(v.eval, s), *env, policy);
        row.success.push_back(report.success.mean);
      }
      const SuccessSummary summary = summarize_rates(row.success);
      row.mean = summary.mean;
      row.std = summary.std;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (hooks.on_row) hooks.on_row(row);
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_to_json(const std::vector<AblationRow>& rows, std::uint64_t seed,
                             const std::string& config_json) {
  using nlohmann::json;
  json j;
  j["seed"] = seed;
  j["build"] = build_id();
  j["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  json table = json::array();
  for (const AblationRow& r : rows) {
    json row = {{"variant", r.variant}, {"seeds", r.seeds}, {"success", r.success},
                {"mean", r.mean},       {"std", r.std}};
    if (!r.error.empty()) row["error"] = r.error;
    table.push_back(row);
  }
  j["rows"] = table;
  return j.dump(2);
}

}  // namespace slotbench
