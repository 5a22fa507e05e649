#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slotbench/insertion_env.hpp"

namespace slotbench {

/// Per-episode metadata; the first record of each episode in a JSONL log.
struct EpisodeHeader {
  long episode = 0;
  std::uint64_t seed = 0;
  std::string policy;
  int slot = 0;
  int trial = 0;
  std::string build;
  std::string config_json;  // resolved RunConfig, SI keys
  EpisodeStart start;
};

struct StepLog {
  int t = 0;
  Pose2 pose;
  Twist2 twist;
  Pose2 target;
  Action action{};
  Wrench2 wrench;
  double reward = 0.0;
  int delay = 0;
  int success_counter = 0;
  int jam_counter = 0;
  Termination terminated = Termination::kNone;
  bool truncated = false;
};

struct EpisodeLog {
  EpisodeHeader header;
  std::vector<StepLog> steps;
};

StepLog make_step_log(int t, const Action& action, const StepResult& r);

/// Serializes one record per line. Throws std::runtime_error when the stream fails.
class EpisodeLogWriter {
 public:
  explicit EpisodeLogWriter(std::ostream& out) : out_(out) {}
  void write_header(const EpisodeHeader& h);
  void write_step(const StepLog& s);
  void write(const EpisodeLog& log);

 private:
  std::ostream& out_;
};

std::string header_to_json_line(const EpisodeHeader& h);
std::string step_to_json_line(const StepLog& s);

/// Groups records into episodes. Throws std::runtime_error on malformed input or a
/// step record that precedes any header.
std::vector<EpisodeLog> read_episode_log(std::istream& in);

struct ReplayResult {
  std::size_t steps = 0;
  double max_pose_error = 0.0;  // max abs over x, z, theta
  std::vector<BodyState> states;
};

/// Restarts the logged episode and replays its actions open loop with the logged
/// delays. `env` must be built from the logged config.
ReplayResult replay_episode(const EpisodeLog& log, InsertionEnv& env);

const char* termination_name(Termination t);

}  // namespace slotbench
