#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "slotbench/contact_sim.hpp"
#include "slotbench/insertion_env.hpp"
#include "slotbench/policy.hpp"
#include "slotbench/sac.hpp"

namespace slotbench {

/// Raised for unreadable files, unknown keys and invalid values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurriculumSettings {
  std::string mode = "ramp";  // ramp | constant
  double warmup_fraction = 0.1;
  double full_fraction = 0.5;
  double constant_level = 1.0;

  Curriculum build(long total_iterations) const;
};

struct EvalSettings {
  std::vector<int> slots{0, 1, 2};
  int trials_per_slot = 4;
  std::string blocker = "target";  // target | none | fixed | sampled
  int blocker_slot = 0;
  double noise_fraction = 1.0;
  bool partial_insert = false;
  double start_dx = 0.0;
  double start_height = 0.10;
};

struct AblationSettings {
  std::vector<std::string> variants{"h1", "h8", "h16", "velocity", "no_delay", "no_noise"};
  int seeds = 3;
};

/// Everything a run depends on. Values are SI internally.
struct RunConfig {
  EnvConfig env;
  SimConfig sim;
  LayoutConfig layout;
  PlateShape plate;
  SacConfig sac;
  CurriculumSettings curriculum;
  EvalSettings eval;
  RandomSearchConfig random_search;
  AblationSettings ablation;

  /// Throws ConfigError when any section is inconsistent.
  void validate() const;
};

/// Parses the INI-style format documented in docs/config.md. Keys carry unit
/// suffixes (_cm, _deg, _m, ...); values are converted to SI on load. Keys that are
/// absent keep their defaults.
RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical INI rendering of every key, in the file's own units.
std::string config_to_ini(const RunConfig& cfg);
/// Compact JSON object with SI-suffixed keys. Round-trips exactly.
std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& json);

/// Build identifier captured at configure time.
const char* build_id();

}  // namespace slotbench
