#include "slotbench/episode_log.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace slotbench {

namespace {

using nlohmann::json;

json pose_json(const Pose2& p) { return json::array({p.x(), p.z(), p.theta()}); }

Pose2 pose_from(const json& j) {
  return Pose2{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

Termination termination_from(const std::string& s) {
  if (s == "none") return Termination::kNone;
  if (s == "success") return Termination::kSuccess;
  if (s == "jam") return Termination::kJam;
  throw std::runtime_error("unknown termination '" + s + "'");
}

void put_line(std::ostream& out, const std::string& line) {
  out << line << '\n';
  if (!out) throw std::runtime_error("failed to write episode log");
}

}  // namespace

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::kSuccess:
      return "success";
    case Termination::kJam:
      return "jam";
    case Termination::kNone:
      break;
  }
  return "none";
}

StepLog make_step_log(int t, const Action& action, const StepResult& r) {
  StepLog s;
  s.t = t;
  s.pose = r.info.body.pose;
  s.twist = r.info.body.twist;
  s.target = r.info.composed_target;
  s.action = action;
  s.wrench = r.info.wrench;
  s.reward = r.reward;
  s.delay = r.info.delay;
  s.success_counter = r.info.success_counter;
  s.jam_counter = r.info.jam_counter;
  s.terminated = r.terminated;
  s.truncated = r.truncated;
  return s;
}

std::string header_to_json_line(const EpisodeHeader& h) {
  json j;
  j["type"] = "header";
  j["episode"] = h.episode;
  j["seed"] = h.seed;
  j["policy"] = h.policy;
  j["slot"] = h.slot;
  j["trial"] = h.trial;
  j["build"] = h.build;
  j["config"] = h.config_json.empty() ? json::object() : json::parse(h.config_json);
  json start;
  start["target_slot"] = h.start.target_slot;
  start["blocker_slot"] = h.start.blocker_slot ? json(*h.start.blocker_slot) : json(nullptr);
  start["true_goal"] = pose_json(h.start.true_goal);
  start["noisy_goal"] = pose_json(h.start.noisy_goal);
  start["pose"] = pose_json(h.start.body.pose);
  const Twist2& v = h.start.body.twist;
  start["twist"] = json::array({v.vx, v.vz, v.omega});
  j["start"] = start;
  return j.dump();
}

std::string step_to_json_line(const StepLog& s) {
  json j;
  j["type"] = "step";
  j["t"] = s.t;
  j["pose"] = pose_json(s.pose);
  j["twist"] = json::array({s.twist.vx, s.twist.vz, s.twist.omega});
  j["target"] = pose_json(s.target);
  j["action"] = json::array({s.action[0], s.action[1], s.action[2]});
  j["wrench"] = json::array({s.wrench.fx, s.wrench.fz, s.wrench.tau});
  j["reward"] = s.reward;
  j["delay"] = s.delay;
  j["success_counter"] = s.success_counter;
  j["jam_counter"] = s.jam_counter;
  j["terminated"] = termination_name(s.terminated);
  j["truncated"] = s.truncated;
  return j.dump();
}

void EpisodeLogWriter::write_header(const EpisodeHeader& h) { put_line(out_, header_to_json_line(h)); }

void EpisodeLogWriter::write_step(const StepLog& s) { put_line(out_, step_to_json_line(s)); }

void EpisodeLogWriter::write(const EpisodeLog& log) {
  write_header(log.header);
  for (const StepLog& s : log.steps) write_step(s);
}

std::vector<EpisodeLog> read_episode_log(std::istream& in) {
  std::vector<EpisodeLog> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        EpisodeLog log;
        EpisodeHeader& h = log.header;
        h.episode = j.at("episode").get<long>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.policy = j.at("policy").get<std::string>();
        h.slot = j.at("slot").get<int>();
        h.trial = j.at("trial").get<int>();
        h.build = j.at("build").get<std::string>();
        h.config_json = j.at("config").dump();
        const json& s = j.at("start");
        h.start.target_slot = s.at("target_slot").get<int>();
        if (!s.at("blocker_slot").is_null()) h.start.blocker_slot = s.at("blocker_slot").get<int>();
        h.start.true_goal = pose_from(s.at("true_goal"));
        h.start.noisy_goal = pose_from(s.at("noisy_goal"));
        h.start.body.pose = pose_from(s.at("pose"));
        const json& tw = s.at("twist");
        h.start.body.twist = {tw.at(0).get<double>(), tw.at(1).get<double>(), tw.at(2).get<double>()};
        out.push_back(std::move(log));
      } else if (type == "step") {
        if (out.empty()) throw std::runtime_error("step record before any header");
        StepLog st;
        st.t = j.at("t").get<int>();
        st.pose = pose_from(j.at("pose"));
        const json& tw = j.at("twist");
        st.twist = {tw.at(0).get<double>(), tw.at(1).get<double>(), tw.at(2).get<double>()};
        st.target = pose_from(j.at("target"));
        for (std::size_t i = 0; i < 3; ++i) st.action[i] = j.at("action").at(i).get<double>();
        const json& w = j.at("wrench");
        st.wrench = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()};
        st.reward = j.at("reward").get<double>();
        st.delay = j.at("delay").get<int>();
        st.success_counter = j.at("success_counter").get<int>();
        st.jam_counter = j.at("jam_counter").get<int>();
        st.terminated = termination_from(j.at("terminated").get<std::string>());
        st.truncated = j.at("truncated").get<bool>();
        out.back().steps.push_back(st);
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw std::runtime_error("episode log line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("episode log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ReplayResult replay_episode(const EpisodeLog& log, InsertionEnv& env) {
  ReplayResult result;
  env.restore(log.header.start, log.header.seed);
  result.states.push_back(env.state().body);
  for (const StepLog& s : log.steps) {
    if (!env.episode_active()) throw std::runtime_error("logged episode continues past its end");
    const StepResult r = env.step_with_delay(s.action, s.delay);
    const Pose2& p = r.info.body.pose;
    result.max_pose_error = std::max({result.max_pose_error, std::abs(p.x() - s.pose.x()),
                                      std::abs(p.z() - s.pose.z()),
                                      std::abs(wrap_angle(p.theta() - s.pose.theta()))});
    result.states.push_back(r.info.body);
    ++result.steps;
  }
  return result;
}

}  // namespace slotbench
