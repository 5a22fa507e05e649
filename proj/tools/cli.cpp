#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "slotbench/checkpoint.hpp"
#include "slotbench/config.hpp"
#include "slotbench/episode_log.hpp"
#include "slotbench/eval.hpp"
#include "slotbench/experiment.hpp"
#include "slotbench/plot.hpp"

namespace slotbench {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string policy = "straight-down";
  long iterations = -1;
  int trials = -1;
  std::string log;
  long episode = 0;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

RunConfig resolve_config(const Options& o) {
  if (o.config.empty()) return RunConfig{};
  if (!fs::exists(o.config)) throw ConfigError("config file not found: " + o.config);
  return load_config(o.config);
}

std::uint64_t resolve_seed(const Options& o) {
  const char* env = std::getenv("SLOTBENCH_SEED");
  if (!env || !*env) return o.seed;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("SLOTBENCH_SEED is not an unsigned integer: ") + env);
  }
}

fs::path prepare_out(const Options& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  if (o.iterations >= 0) cfg.sac.iterations = o.iterations;
  cfg.validate();
  const std::uint64_t seed = resolve_seed(o);
  const fs::path dir = prepare_out(o);

  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
  csv << metrics_csv_header() << '\n';
  const auto t0 = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationMetrics& m, const TrainState& st) {
    csv << metrics_csv_row(m) << '\n';
    if ((m.iteration + 1) % 100 == 0 || m.iteration + 1 == cfg.sac.iterations) {
      csv.flush();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "iter " << m.iteration + 1 << '/' << cfg.sac.iterations << "  success "
          << m.success_rate << "  return " << m.mean_return << "  alpha " << m.alpha << "  eps "
          << m.epsilon_frac << "  " << static_cast<long>(secs) << " s" << std::endl;
      write_checkpoint(dir / "policy.ckpt", policy_checkpoint(st, cfg));
    }
  };
  const TrainResult result = train_policy(cfg, seed, hooks);
  if (!csv) throw std::runtime_error("failed writing metrics.csv");
  write_checkpoint(dir / "policy.ckpt", policy_checkpoint(result.state, cfg));
  write_file(dir / "metrics.svg", metrics_svg(result.metrics));
  write_file(dir / "config.ini", config_to_ini(cfg));
  out << "prefill episodes " << result.prefill_episodes << "\nwrote " << (dir / "policy.ckpt").string()
      << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  if (o.trials > 0) cfg.eval.trials_per_slot = o.trials;
  cfg.validate();
  const std::uint64_t seed = resolve_seed(o);
  auto policy = make_policy(o.policy, cfg);
  auto env = make_env(cfg);
  const fs::path dir = prepare_out(o);

  std::ofstream log(dir / "episodes.jsonl", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (dir / "episodes.jsonl").string());
  EpisodeLogWriter writer(log);
  const auto t0 = std::chrono::steady_clock::now();
  const EvalReport report = run_evaluation(make_protocol(cfg, seed), *env, *policy,
                                           [&](const EpisodeLog& e) { writer.write(e); });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(dir / "report.json", report_to_json(report, config_to_json(cfg)) + "\n");
  out << policy->name() << ": success " << 100.0 * report.success.mean << " +- "
      << 100.0 * report.success.std << " % over " << report.episodes.size() << " episodes ("
      << secs << " s)\n";
  return 0;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  if (o.iterations >= 0) cfg.sac.iterations = o.iterations;
  if (o.trials > 0) cfg.eval.trials_per_slot = o.trials;
  cfg.validate();
  const std::uint64_t seed = resolve_seed(o);
  const fs::path dir = prepare_out(o);
  AblationHooks hooks;
  hooks.on_row = [&](const AblationRow& r) {
    out << r.variant << ": " << 100.0 * r.mean << " +- " << 100.0 * r.std << " %"
        << (r.error.empty() ? "" : "  error: " + r.error) << std::endl;
  };
  const auto rows = run_ablation(cfg, seed, hooks);
  write_file(dir / "ablation.json", ablation_to_json(rows, seed, config_to_json(cfg)) + "\n");
  for (const AblationRow& r : rows) {
    if (!r.error.empty()) return 2;
  }
  return 0;
}

int cmd_replay(const Options& o, std::ostream& out) {
  if (o.log.empty()) throw UsageError("replay needs --log PATH");
  std::ifstream in(o.log);
  if (!in) throw UsageError("cannot open episode log " + o.log);
  const auto logs = read_episode_log(in);
  const auto it = std::find_if(logs.begin(), logs.end(),
                               [&](const EpisodeLog& l) { return l.header.episode == o.episode; });
  if (it == logs.end()) {
    throw UsageError("episode " + std::to_string(o.episode) + " not found in " + o.log);
  }
  const RunConfig cfg = config_from_json(it->header.config_json);
  auto env = make_env(cfg);
  const ReplayResult r = replay_episode(*it, *env);
  const fs::path dir = prepare_out(o);
  const fs::path svg = dir / ("episode_" + std::to_string(o.episode) + ".svg");
  write_file(svg, trajectory_svg(env->state().world, cfg.plate, r.states, it->header.start));
  out << "replayed " << r.steps << " steps, max pose deviation " << r.max_pose_error << "\nwrote "
      << svg.string() << '\n';
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Planar plate-insertion benchmark: train, evaluate, ablate and replay"};
  app.name("slotbench");
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Configuration file (INI, unit-suffixed keys)");
  app.add_option("--seed", o.seed, "Base seed (SLOTBENCH_SEED overrides)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--policy", o.policy, "checkpoint path | straight-down | random-search");

  auto* train = app.add_subcommand("train", "Train a policy with SAC");
  train->add_option("--iterations", o.iterations, "Override sac.iterations");
  auto* eval = app.add_subcommand("eval", "Evaluate a policy with the slot/trial protocol");
  eval->add_option("--trials", o.trials, "Override eval.trials_per_slot");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation grid");
  ablate->add_option("--iterations", o.iterations, "Override sac.iterations");
  ablate->add_option("--trials", o.trials, "Override eval.trials_per_slot");
  auto* replay = app.add_subcommand("replay", "Replay a logged episode and plot it as SVG");
  replay->add_option("--log", o.log, "episodes.jsonl written by eval")->required();
  replay->add_option("--episode", o.episode, "Episode index within the log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (ablate->parsed()) return cmd_ablate(o, out);
    return cmd_replay(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace slotbench
