#pragma once

// JSON experiment configs. Every key is optional; absent keys keep their
// defaults and unknown keys are rejected.
//
//   {
//     "world": {"path": "data/reference_arena.json"}            or
//     "world": {"seed": 0, "arena": {"rows": 4, "cols": 13, "num_states": 38, "p_slip": 0.2,
//                                    "goal": 18, "relocated_goal": 34, "resets": [0, 32]}},
//     "schedule": [...same layout as world files...],
//     "agent": "MC_EC", "total_steps": 6400, "seeds": [0, 1, 2],
//     "mf":   {"alpha": 0.6, "gamma": 0.9, "tau": 0.02, "initial_value": 1.0},
//     "mb":   {"gamma": 0.95, "epsilon_vi": 0.001, "max_sweeps": 100, "tau": 0.02, "window": 6,
//              "initial_value": 1.0},
//     "mc":   {"eta": 7.0, "tau": 0.02, "alpha_f": 0.6},
//     "dqn":  {"hidden": 76, "hidden_layers": 2, "alpha": 0.1, "gamma": 0.95, "tau": 0.05,
//              "batch_size": 32, "buffer_capacity": 10000, "target_sync_period": 0,
//              "checkpoint": "weights.json"},
//     "cost": {"mode": "proxy", "seconds_per_backup": 2e-6, "seconds_per_mf_lookup": 1e-5,
//              "seconds_per_forward_pass": 2e-5},
//     "phase_window": 50, "output_dir": "out"
//   }

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mbmf/experiment.hpp"
#include "mbmf/world_io.hpp"

namespace mbmf {

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const std::string& path) {
  if (!obj.is_object()) throw ParseError("field '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError("unknown field '" + (path.empty() ? key : path + "." + key) + "'");
  }
}

template <typename T>
void read_opt(const nlohmann::json& obj, const char* key, const std::string& path, T& out) {
  if (obj.contains(key)) out = json_field<T>(obj, key, path);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  ExperimentConfig c;
  detail::reject_unknown(j, {"world", "schedule", "agent", "total_steps", "seeds", "mf", "mb", "mc", "dqn", "cost",
                             "phase_window", "output_dir"},
                         "");

  if (j.contains("world")) {
    const auto& w = j.at("world");
    detail::reject_unknown(w, {"path", "seed", "arena"}, "world");
    if (w.contains("path")) c.world_path = detail::json_field<std::string>(w, "path", "world");
    read_opt(w, "seed", "world", c.world_seed);
    if (w.contains("arena")) {
      const auto& a = w.at("arena");
      detail::reject_unknown(a, {"rows", "cols", "num_states", "p_slip", "goal", "relocated_goal", "resets", "max_attempts"},
                             "world.arena");
      read_opt(a, "rows", "world.arena", c.arena.rows);
      read_opt(a, "cols", "world.arena", c.arena.cols);
      read_opt(a, "num_states", "world.arena", c.arena.num_states);
      read_opt(a, "p_slip", "world.arena", c.arena.p_slip);
      read_opt(a, "goal", "world.arena", c.arena.goal);
      read_opt(a, "relocated_goal", "world.arena", c.arena.relocated_goal);
      read_opt(a, "resets", "world.arena", c.arena.resets);
      read_opt(a, "max_attempts", "world.arena", c.arena.max_attempts);
    }
  }
  if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"), "schedule");
  if (j.contains("agent")) {
    try {
      c.agent = agent_kind_from_string(detail::json_field<std::string>(j, "agent", ""));
    } catch (const ParameterError& e) {
      throw ParseError(std::string("field 'agent': ") + e.what());
    }
  }
  read_opt(j, "total_steps", "", c.total_steps);
  read_opt(j, "seeds", "", c.seeds);

  if (j.contains("mf")) {
    const auto& m = j.at("mf");
    detail::reject_unknown(m, {"alpha", "gamma", "tau", "initial_value"}, "mf");
    read_opt(m, "alpha", "mf", c.mf.alpha);
    read_opt(m, "gamma", "mf", c.mf.gamma);
    read_opt(m, "tau", "mf", c.mf.tau);
    read_opt(m, "initial_value", "mf", c.mf.initial_value);
  }
  if (j.contains("mb")) {
    const auto& m = j.at("mb");
    detail::reject_unknown(m, {"gamma", "epsilon_vi", "max_sweeps", "tau", "window", "initial_value"}, "mb");
    read_opt(m, "gamma", "mb", c.mb.gamma);
    read_opt(m, "epsilon_vi", "mb", c.mb.epsilon_vi);
    read_opt(m, "max_sweeps", "mb", c.mb.max_sweeps);
    read_opt(m, "tau", "mb", c.mb.tau);
    read_opt(m, "window", "mb", c.mb.window);
    read_opt(m, "initial_value", "mb", c.mb.initial_value);
  }
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    detail::reject_unknown(m, {"eta", "tau", "alpha_f"}, "mc");
    read_opt(m, "eta", "mc", c.mc.eta);
    read_opt(m, "tau", "mc", c.mc.tau_mc);
    read_opt(m, "alpha_f", "mc", c.mc.alpha_f);
  }
  if (j.contains("dqn")) {
    const auto& m = j.at("dqn");
    detail::reject_unknown(m, {"hidden", "hidden_layers", "alpha", "gamma", "tau", "batch_size", "buffer_capacity",
                               "target_sync_period", "checkpoint"},
                           "dqn");
    read_opt(m, "hidden", "dqn", c.dqn.hidden);
    read_opt(m, "hidden_layers", "dqn", c.dqn.hidden_layers);
    read_opt(m, "alpha", "dqn", c.dqn.alpha);
    read_opt(m, "gamma", "dqn", c.dqn.gamma);
    read_opt(m, "tau", "dqn", c.dqn.tau);
    read_opt(m, "batch_size", "dqn", c.dqn.batch_size);
    read_opt(m, "buffer_capacity", "dqn", c.dqn.buffer_capacity);
    read_opt(m, "target_sync_period", "dqn", c.dqn.target_sync_period);
    if (m.contains("checkpoint")) c.dqn_checkpoint = detail::json_field<std::string>(m, "checkpoint", "dqn");
  }
  if (j.contains("cost")) {
    const auto& m = j.at("cost");
    detail::reject_unknown(m, {"mode", "seconds_per_backup", "seconds_per_mf_lookup", "seconds_per_forward_pass"}, "cost");
    if (m.contains("mode")) {
      try {
        c.cost.mode = cost_mode_from_string(detail::json_field<std::string>(m, "mode", "cost"));
      } catch (const ParameterError& e) {
        throw ParseError(std::string("field 'cost.mode': ") + e.what());
      }
    }
    read_opt(m, "seconds_per_backup", "cost", c.cost.seconds_per_backup);
    read_opt(m, "seconds_per_mf_lookup", "cost", c.cost.seconds_per_mf_lookup);
    read_opt(m, "seconds_per_forward_pass", "cost", c.cost.seconds_per_forward_pass);
  }
  read_opt(j, "phase_window", "", c.phase_window);
  read_opt(j, "output_dir", "", c.output_dir);
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json world;
  if (c.world_path) world["path"] = *c.world_path;
  world["seed"] = c.world_seed;
  world["arena"] = {{"rows", c.arena.rows},
                    {"cols", c.arena.cols},
                    {"num_states", c.arena.num_states},
                    {"p_slip", c.arena.p_slip},
                    {"goal", c.arena.goal},
                    {"relocated_goal", c.arena.relocated_goal},
                    {"resets", c.arena.resets},
                    {"max_attempts", c.arena.max_attempts}};
  nlohmann::json j;
  j["world"] = std::move(world);
  if (c.schedule) j["schedule"] = schedule_to_json(*c.schedule);
  j["agent"] = to_string(c.agent);
  j["total_steps"] = c.total_steps;
  j["seeds"] = c.seeds;
  j["mf"] = {{"alpha", c.mf.alpha}, {"gamma", c.mf.gamma}, {"tau", c.mf.tau}, {"initial_value", c.mf.initial_value}};
  j["mb"] = {{"gamma", c.mb.gamma},     {"epsilon_vi", c.mb.epsilon_vi}, {"max_sweeps", c.mb.max_sweeps},
             {"tau", c.mb.tau},         {"window", c.mb.window},         {"initial_value", c.mb.initial_value}};
  j["mc"] = {{"eta", c.mc.eta}, {"tau", c.mc.tau_mc}, {"alpha_f", c.mc.alpha_f}};
  j["dqn"] = {{"hidden", c.dqn.hidden},
              {"hidden_layers", c.dqn.hidden_layers},
              {"alpha", c.dqn.alpha},
              {"gamma", c.dqn.gamma},
              {"tau", c.dqn.tau},
              {"batch_size", c.dqn.batch_size},
              {"buffer_capacity", c.dqn.buffer_capacity},
              {"target_sync_period", c.dqn.target_sync_period}};
  if (c.dqn_checkpoint) j["dqn"]["checkpoint"] = *c.dqn_checkpoint;
  j["cost"] = {{"mode", to_string(c.cost.mode)},
               {"seconds_per_backup", c.cost.seconds_per_backup},
               {"seconds_per_mf_lookup", c.cost.seconds_per_mf_lookup},
               {"seconds_per_forward_pass", c.cost.seconds_per_forward_pass}};
  j["phase_window"] = c.phase_window;
  j["output_dir"] = c.output_dir;
  return j;
}

// Parses and range-checks a config. A relative world path is resolved
// against base_dir when one is given.
inline ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = "") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  if (c.world_path && !base_dir.empty() && !c.world_path->empty() && c.world_path->front() != '/')
    c.world_path = base_dir + "/" + *c.world_path;
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto slash = path.find_last_of('/');
  return parse_config(buf.str(), slash == std::string::npos ? "" : path.substr(0, slash));
}

}  // namespace mbmf
