#include "slotbench/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <variant>

#include "json.hpp"

#ifndef SLOTBENCH_BUILD_ID
#define SLOTBENCH_BUILD_ID "unknown"
#endif

namespace slotbench {

namespace {

using nlohmann::json;

struct Unit {
  const char* file;  // suffix in config files
  const char* si;    // suffix in JSON
  double factor;     // si = file * factor
};

constexpr Unit kPlain{"", "", 1.0};
constexpr Unit kCm{"cm", "m", 0.01};
constexpr Unit kDeg{"deg", "rad", std::numbers::pi / 180.0};
constexpr Unit kMs{"ms", "s", 1e-3};
constexpr Unit kNewton{"n", "n", 1.0};
constexpr Unit kKg{"kg", "kg", 1.0};
constexpr Unit kKgM2{"kg_m2", "kg_m2", 1.0};
constexpr Unit kStiff{"n_per_m", "n_per_m", 1.0};
constexpr Unit kDamp{"ns_per_m", "ns_per_m", 1.0};
constexpr Unit kAccel{"m_s2", "m_s2", 1.0};
constexpr Unit kSpeed{"m_s", "m_s", 1.0};
constexpr Unit kOmega{"rad_s", "rad_s", 1.0};

using Value = std::variant<double, long long, bool, std::string, std::vector<int>,
                           std::vector<std::string>, std::optional<double>>;

struct Binding {
  std::string section;
  std::string name;
  Unit unit = kPlain;
  std::function<Value()> get;
  std::function<void(const Value&)> set;

  std::string file_key() const { return *unit.file ? name + "_" + unit.file : name; }
  std::string json_key() const { return *unit.si ? name + "_" + unit.si : name; }
};

template <typename T>
Binding field(std::string section, std::string name, T& ref, Unit unit = kPlain) {
  Binding b{std::move(section), std::move(name), unit, {}, {}};
  if constexpr (std::is_same_v<T, double>) {
    b.get = [&ref] { return Value{ref}; };
    b.set = [&ref](const Value& v) { ref = std::get<double>(v); };
  } else if constexpr (std::is_same_v<T, bool>) {
    b.get = [&ref] { return Value{ref}; };
    b.set = [&ref](const Value& v) { ref = std::get<bool>(v); };
  } else if constexpr (std::is_integral_v<T>) {
    b.get = [&ref] { return Value{static_cast<long long>(ref)}; };
    b.set = [&ref](const Value& v) { ref = static_cast<T>(std::get<long long>(v)); };
  } else {
    b.get = [&ref] { return Value{ref}; };
    b.set = [&ref](const Value& v) { ref = std::get<T>(v); };
  }
  return b;
}

Binding bind_pose(std::string section, std::string name, Pose2& pose, int component) {
  Unit unit = component == 2 ? kDeg : kCm;
  Binding b{std::move(section), std::move(name), unit, {}, {}};
  b.get = [&pose, component] {
    return Value{component == 0 ? pose.x() : component == 1 ? pose.z() : pose.theta()};
  };
  b.set = [&pose, component](const Value& v) {
    const double d = std::get<double>(v);
    pose = Pose2{component == 0 ? d : pose.x(), component == 1 ? d : pose.z(),
                 component == 2 ? d : pose.theta()};
  };
  return b;
}

std::vector<Binding> bindings(RunConfig& c) {
  EnvConfig& e = c.env;
  RewardConfig& r = c.env.reward;
  SimConfig& s = c.sim;
  LayoutConfig& l = c.layout;
  PlateShape& p = c.plate;
  SacConfig& a = c.sac;
  return {
      field("env", "horizon", e.horizon),
      field("env", "history", e.history),
      field("env", "lowlevel_per_policy", e.lowlevel_per_policy),
      field("env", "delay_min", e.delay_min),
      field("env", "delay_max", e.delay_max),
      field("env", "eps_trans", e.eps_trans_max, kCm),
      field("env", "eps_rot", e.eps_rot_max, kDeg),
      field("env", "action_scale_trans", e.action_scale_trans, kCm),
      field("env", "action_scale_rot", e.action_scale_rot, kDeg),
      field("env", "success_hold", e.success_hold),
      field("env", "success_dx", e.success_dx, kCm),
      field("env", "success_depth", e.success_depth, kCm),
      field("env", "strict_success_trans", e.strict_success_trans, kCm),
      field("env", "strict_success_rot", e.strict_success_rot, kDeg),
      field("env", "jam_force", e.jam_force, kNewton),
      field("env", "jam_hold", e.jam_hold),
      field("env", "partial_insert_prob", e.partial_insert_prob),
      field("env", "start_dx_max", e.start_dx_max, kCm),
      field("env", "start_height_min", e.start_height_min, kCm),
      field("env", "start_height_max", e.start_height_max, kCm),
      field("env", "blocker_prob", e.blocker_prob),
      field("env", "include_velocity", e.include_velocity),

      field("reward", "r_drop", r.r_drop),
      field("reward", "r_success", r.r_success),
      field("reward", "k_dist_trans", r.k_dist_trans),
      field("reward", "k_dist_rot", r.k_dist_rot),
      field("reward", "k_da_trans", r.k_da_trans),
      field("reward", "k_da_rot", r.k_da_rot),
      field("reward", "lambda_dist_trans", r.lambda_dist_trans, kCm),
      field("reward", "lambda_dist_rot", r.lambda_dist_rot, kDeg),
      field("reward", "lambda_da_trans", r.lambda_da_trans, kCm),
      field("reward", "lambda_da_rot", r.lambda_da_rot, kDeg),

      field("sim", "dt", s.dt, kMs),
      field("sim", "kp", s.kp),
      field("sim", "damping_ratio", s.damping_ratio),
      field("sim", "err_scale_trans", s.err_scale_trans),
      field("sim", "err_scale_rot", s.err_scale_rot),
      field("sim", "contact_stiffness", s.contact_stiffness, kStiff),
      field("sim", "contact_damping", s.contact_damping, kDamp),
      field("sim", "friction_mu", s.friction_mu),
      field("sim", "gravity", s.gravity, kAccel),
      field("sim", "gravity_compensation", s.gravity_compensation),
      field("sim", "contact_substeps", s.contact_substeps),
      field("sim", "max_speed", s.max_speed, kSpeed),
      field("sim", "max_omega", s.max_omega, kOmega),

      field("layout", "num_slots", l.num_slots),
      field("layout", "slot_pitch", l.slot_pitch, kCm),
      field("layout", "wall_thickness", l.wall_thickness, kCm),
      field("layout", "wall_height", l.wall_height, kCm),
      field("layout", "outer_wall_height", l.outer_wall_height, kCm),
      field("layout", "table_half_width", l.table_half_width, kCm),
      field("layout", "table_thickness", l.table_thickness, kCm),
      field("layout", "blocker_half_width", l.blocker_half_width, kCm),
      field("layout", "blocker_height", l.blocker_height, kCm),

      field("plate", "half_width", p.half_width, kCm),
      field("plate", "half_height", p.half_height, kCm),
      field("plate", "mass", p.mass, kKg),
      field("plate", "inertia", p.inertia, kKgM2),
      bind_pose("plate", "grasp_x", p.grasp_offset, 0),
      bind_pose("plate", "grasp_z", p.grasp_offset, 1),
      bind_pose("plate", "grasp_theta", p.grasp_offset, 2),

      field("sac", "batch", a.batch),
      field("sac", "gamma", a.gamma),
      field("sac", "lr", a.lr),
      field("sac", "initial_alpha", a.initial_alpha),
      field("sac", "target_entropy", a.target_entropy),
      field("sac", "learn_alpha", a.learn_alpha),
      field("sac", "twin_critics", a.twin_critics),
      field("sac", "polyak_tau", a.polyak_tau),
      field("sac", "updates_per_iteration", a.updates_per_iteration),
      field("sac", "env_steps_per_iteration", a.env_steps_per_iteration),
      field("sac", "iterations", a.iterations),
      field("sac", "prefill_steps", a.prefill_steps),
      field("sac", "workers", a.workers),
      field("sac", "buffer_capacity", a.buffer_capacity),
      field("sac", "hidden", a.hidden),
      field("sac", "actor_output_init", a.actor_output_init),

      field("curriculum", "mode", c.curriculum.mode),
      field("curriculum", "warmup_fraction", c.curriculum.warmup_fraction),
      field("curriculum", "full_fraction", c.curriculum.full_fraction),
      field("curriculum", "constant_level", c.curriculum.constant_level),

      field("eval", "slots", c.eval.slots),
      field("eval", "trials_per_slot", c.eval.trials_per_slot),
      field("eval", "blocker", c.eval.blocker),
      field("eval", "blocker_slot", c.eval.blocker_slot),
      field("eval", "noise_fraction", c.eval.noise_fraction),
      field("eval", "partial_insert", c.eval.partial_insert),
      field("eval", "start_dx", c.eval.start_dx, kCm),
      field("eval", "start_height", c.eval.start_height, kCm),

      field("random_search", "square_side", c.random_search.square_side, kCm),
      field("random_search", "contact_force", c.random_search.contact_force, kNewton),
      field("random_search", "descend_step", c.random_search.descend_step, kCm),
      field("random_search", "retreat_clearance", c.random_search.retreat_clearance, kCm),
      field("random_search", "reposition_tolerance", c.random_search.reposition_tolerance, kCm),

      field("ablation", "variants", c.ablation.variants),
      field("ablation", "seeds", c.ablation.seeds),
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ConfigError(where + ": expected a number, got '" + text + "'");
  }
  return v;
}

long long parse_integer(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ConfigError(where + ": expected an integer, got '" + text + "'");
  }
  return v;
}

Value parse_value(const Value& like, const std::string& raw, const Binding& b,
                  const std::string& where) {
  const std::string text = trim(raw);
  return std::visit(
      [&](const auto& current) -> Value {
        using T = std::decay_t<decltype(current)>;
        if constexpr (std::is_same_v<T, double>) {
          return parse_real(text, where) * b.unit.factor;
        } else if constexpr (std::is_same_v<T, long long>) {
          return parse_integer(text, where);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (text == "true" || text == "on" || text == "yes" || text == "1") return true;
          if (text == "false" || text == "off" || text == "no" || text == "0") return false;
          throw ConfigError(where + ": expected true/false, got '" + text + "'");
        } else if constexpr (std::is_same_v<T, std::string>) {
          return text;
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          std::vector<int> out;
          for (const std::string& item : split_list(text)) {
            out.push_back(static_cast<int>(parse_integer(item, where)));
          }
          return out;
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
          return split_list(text);
        } else {
          if (text == "auto") return std::optional<double>{};
          return std::optional<double>{parse_real(text, where) * b.unit.factor};
        }
      },
      like);
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

std::string render_value(const Value& v, const Binding& b) {
  return std::visit(
      [&](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) {
          return format_real(x / b.unit.factor);
        } else if constexpr (std::is_same_v<T, long long>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else if constexpr (std::is_same_v<T, std::optional<double>>) {
          return x ? format_real(*x / b.unit.factor) : "auto";
        } else {
          std::string out;
          for (const auto& item : x) {
            if (!out.empty()) out += ", ";
            if constexpr (std::is_same_v<std::decay_t<decltype(item)>, int>) {
              out += std::to_string(item);
            } else {
              out += item;
            }
          }
          return out;
        }
      },
      v);
}

json to_json_value(const Value& v) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::optional<double>>) {
          return x ? json(*x) : json(nullptr);
        } else {
          return json(x);
        }
      },
      v);
}

Value from_json_value(const Value& like, const json& j, const std::string& where) {
  try {
    return std::visit(
        [&](const auto& current) -> Value {
          using T = std::decay_t<decltype(current)>;
          if constexpr (std::is_same_v<T, std::optional<double>>) {
            if (j.is_null()) return std::optional<double>{};
            return std::optional<double>{j.get<double>()};
          } else if constexpr (std::is_same_v<T, double>) {
            if (!j.is_number()) throw ConfigError(where + ": expected a number");
            return j.get<double>();
          } else if constexpr (std::is_same_v<T, long long>) {
            if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
            return j.get<long long>();
          } else {
            return j.get<T>();
          }
        },
        like);
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

Curriculum CurriculumSettings::build(long total_iterations) const {
  if (mode == "constant") return Curriculum::constant(constant_level);
  if (mode != "ramp") throw ConfigError("curriculum.mode must be ramp or constant");
  const double total = static_cast<double>(std::max(total_iterations, 1L));
  if (warmup_fraction <= 0.0) {
    return {{{0.0, 0.0}, {std::max(full_fraction, 1e-9) * total, 1.0}}};
  }
  return {{{0.0, 0.0}, {warmup_fraction * total, 0.0}, {full_fraction * total, 1.0}}};
}

void RunConfig::validate() const {
  try {
    env.validate();
    sim.validate();
    plate.validate();
    spawn_world(layout, plate);
    sac.validate();
    curriculum.build(sac.iterations).validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(curriculum.warmup_fraction >= 0.0 && curriculum.full_fraction > curriculum.warmup_fraction)) {
    throw ConfigError("curriculum fractions must satisfy 0 <= warmup < full");
  }
  if (eval.trials_per_slot < 1) throw ConfigError("eval.trials_per_slot must be >= 1");
  if (eval.slots.empty()) throw ConfigError("eval.slots must not be empty");
  for (int s : eval.slots) {
    if (s < 0 || s >= layout.num_slots) {
      throw ConfigError("eval.slots entry " + std::to_string(s) + " is out of range");
    }
  }
  static const std::set<std::string> kBlockers{"target", "none", "fixed", "sampled"};
  if (!kBlockers.count(eval.blocker)) {
    throw ConfigError("eval.blocker must be one of target, none, fixed, sampled");
  }
  if (eval.blocker == "fixed" && (eval.blocker_slot < 0 || eval.blocker_slot >= layout.num_slots)) {
    throw ConfigError("eval.blocker_slot is out of range");
  }
  if (eval.noise_fraction < 0.0 || eval.noise_fraction > 1.0) {
    throw ConfigError("eval.noise_fraction must lie in [0, 1]");
  }
  if (!(random_search.square_side >= 0.0 && random_search.contact_force > 0.0 &&
        random_search.descend_step > 0.0 && random_search.reposition_tolerance > 0.0)) {
    throw ConfigError("random_search parameters must be positive");
  }
  static const std::set<std::string> kVariants{"h1",       "h8",       "h16",     "velocity",
                                               "no_delay", "no_noise", "baseline"};
  for (const std::string& v : ablation.variants) {
    if (!kVariants.count(v)) throw ConfigError("unknown ablation variant '" + v + "'");
  }
  if (ablation.seeds < 1) throw ConfigError("ablation.seeds must be >= 1");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  RunConfig cfg;
  auto table = bindings(cfg);
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw ConfigError(source + ": key '" + section + "' must be inside a [section]");
    }
    for (const auto& [key, node] : keys) {
      const std::string where = source + ": [" + section + "] " + key;
      auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) {
        return b.section == section && b.file_key() == key;
      });
      if (it == table.end()) throw ConfigError(where + ": unknown key");
      it->set(parse_value(it->get(), node.data(), *it, where));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string config_to_ini(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  std::string section;
  for (const Binding& b : bindings(copy)) {
    if (b.section != section) {
      if (!section.empty()) out += "\n";
      section = b.section;
      out += "[" + section + "]\n";
    }
    out += b.file_key() + " = " + render_value(b.get(), b) + "\n";
  }
  return out;
}

std::string config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  json j = json::object();
  for (const Binding& b : bindings(copy)) j[b.section][b.json_key()] = to_json_value(b.get());
  return j.dump();
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  RunConfig cfg;
  auto table = bindings(cfg);
  for (const auto& [section, keys] : j.items()) {
    if (!keys.is_object()) throw ConfigError("config JSON section '" + section + "' is not an object");
    for (const auto& [key, value] : keys.items()) {
      auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) {
        return b.section == section && b.json_key() == key;
      });
      const std::string where = "config JSON " + section + "." + key;
      if (it == table.end()) throw ConfigError(where + ": unknown key");
      it->set(from_json_value(it->get(), value, where));
    }
  }
  cfg.validate();
  return cfg;
}

const char* build_id() { return SLOTBENCH_BUILD_ID; }

}  // namespace slotbench
