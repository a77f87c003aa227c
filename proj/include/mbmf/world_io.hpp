#pragma once

// JSON world files.
//
//   {
//     "num_states": 38, "num_actions": 8,
//     "transitions": [{"state": 0, "action": 0, "outcomes": [{"next": 0, "prob": 1.0}]}, ...],
//     "goal": 18, "resets": [0, 32],
//     "schedule": [{"at_step": 1600, "kind": "reward_move", "payload": {"new_goal": 34}},
//                  {"at_step": 3000, "kind": "add_obstacles", "payload": {"blocked": [[5, 2]]}}],
//     "neighbors": [[...8 ids, -1 for wall...], ...],   (optional)
//     "cells": [[row, col], ...]                         (optional)
//   }

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mbmf/world.hpp"

namespace mbmf {

namespace detail {

template <typename T>
T json_field(const nlohmann::json& obj, const char* key, const std::string& path) {
  const std::string where = path.empty() ? key : path + "." + key;
  if (!obj.is_object() || !obj.contains(key)) throw ParseError("missing field '" + where + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("field '" + where + "' has the wrong type");
  }
}

inline const nlohmann::json& json_array(const nlohmann::json& obj, const char* key, const std::string& path) {
  const std::string where = path.empty() ? key : path + "." + key;
  if (!obj.is_object() || !obj.contains(key)) throw ParseError("missing field '" + where + "'");
  if (!obj.at(key).is_array()) throw ParseError("field '" + where + "' must be an array");
  return obj.at(key);
}

}  // namespace detail

inline nlohmann::json schedule_to_json(const std::vector<ChangeEvent>& schedule) {
  auto out = nlohmann::json::array();
  for (const auto& e : schedule) {
    nlohmann::json item{{"at_step", e.at_step}};
    if (const auto* move = std::get_if<RewardMove>(&e.kind)) {
      item["kind"] = "reward_move";
      item["payload"] = {{"new_goal", move->new_goal}};
    } else {
      auto blocked = nlohmann::json::array();
      for (auto [s, a] : std::get<AddObstacles>(e.kind).blocked) blocked.push_back({s, a});
      item["kind"] = "add_obstacles";
      item["payload"] = {{"blocked", blocked}};
    }
    out.push_back(std::move(item));
  }
  return out;
}

inline std::vector<ChangeEvent> schedule_from_json(const nlohmann::json& arr, const std::string& path) {
  if (!arr.is_array()) throw ParseError("field '" + path + "' must be an array");
  std::vector<ChangeEvent> schedule;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    const auto& item = arr[i];
    ChangeEvent e;
    const auto at = detail::json_field<long long>(item, "at_step", p);
    if (at < 0) throw ParseError("field '" + p + ".at_step' must be non-negative");
    e.at_step = static_cast<std::size_t>(at);
    const auto kind = detail::json_field<std::string>(item, "kind", p);
    if (!item.contains("payload")) throw ParseError("missing field '" + p + ".payload'");
    const auto& payload = item.at("payload");
    if (kind == "reward_move") {
      e.kind = RewardMove{detail::json_field<StateId>(payload, "new_goal", p + ".payload")};
    } else if (kind == "add_obstacles") {
      AddObstacles obs;
      const auto& blocked = detail::json_array(payload, "blocked", p + ".payload");
      for (std::size_t j = 0; j < blocked.size(); ++j) {
        const auto& pair = blocked[j];
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() || !pair[1].is_number_unsigned())
          throw ParseError("field '" + p + ".payload.blocked[" + std::to_string(j) + "]' must be [state, action]");
        obs.blocked.emplace_back(pair[0].get<StateId>(), pair[1].get<ActionId>());
      }
      e.kind = std::move(obs);
    } else {
      throw ParseError("field '" + p + ".kind' must be 'reward_move' or 'add_obstacles'");
    }
    schedule.push_back(std::move(e));
  }
  return schedule;
}

inline nlohmann::json world_to_json(const WorldModel& world) {
  nlohmann::json j;
  j["num_states"] = world.num_states;
  j["num_actions"] = world.num_actions;
  auto transitions = nlohmann::json::array();
  for (StateId s = 0; s < world.num_states; ++s) {
    for (ActionId a = 0; a < world.num_actions; ++a) {
      auto outs = nlohmann::json::array();
      for (const auto& o : world.transitions[world.index(s, a)]) outs.push_back({{"next", o.next}, {"prob", o.prob}});
      transitions.push_back({{"state", s}, {"action", a}, {"outcomes", outs}});
    }
  }
  j["transitions"] = std::move(transitions);
  j["goal"] = world.goal;
  j["resets"] = world.resets;
  j["schedule"] = schedule_to_json(world.schedule);
  auto neighbors = nlohmann::json::array();
  for (StateId s = 0; s < world.num_states; ++s) {
    auto row = nlohmann::json::array();
    for (ActionId a = 0; a < world.num_actions; ++a) {
      const StateId nb = world.neighbors[world.index(s, a)];
      row.push_back(nb == kWall ? -1 : static_cast<long long>(nb));
    }
    neighbors.push_back(std::move(row));
  }
  j["neighbors"] = std::move(neighbors);
  if (!world.cells.empty()) {
    auto cells = nlohmann::json::array();
    for (const auto& c : world.cells) cells.push_back({c.row, c.col});
    j["cells"] = std::move(cells);
  }
  return j;
}

// Parses and validates. Without a "neighbors" field the intended neighbor of
// (s, a) is taken as its most probable outcome, or a wall if that is s itself.
inline WorldModel world_from_json(const nlohmann::json& j) {
  WorldModel world;
  world.num_states = detail::json_field<std::size_t>(j, "num_states", "");
  world.num_actions = detail::json_field<std::size_t>(j, "num_actions", "");
  const std::size_t pairs = world.num_states * world.num_actions;
  world.transitions.assign(pairs, {});
  std::vector<char> seen(pairs, 0);
  const auto& transitions = detail::json_array(j, "transitions", "");
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const std::string p = "transitions[" + std::to_string(i) + "]";
    const auto s = detail::json_field<StateId>(transitions[i], "state", p);
    const auto a = detail::json_field<ActionId>(transitions[i], "action", p);
    if (s >= world.num_states || a >= world.num_actions) throw ParseError("field '" + p + "' references an invalid (state, action)");
    if (seen[world.index(s, a)]) throw ParseError("field '" + p + "' duplicates an earlier (state, action)");
    seen[world.index(s, a)] = 1;
    const auto& outs = detail::json_array(transitions[i], "outcomes", p);
    for (std::size_t k = 0; k < outs.size(); ++k) {
      const std::string q = p + ".outcomes[" + std::to_string(k) + "]";
      world.transitions[world.index(s, a)].push_back(
          {detail::json_field<StateId>(outs[k], "next", q), detail::json_field<double>(outs[k], "prob", q)});
    }
  }
  for (std::size_t i = 0; i < pairs; ++i) {
    if (!seen[i])
      throw ParseError("field 'transitions' lacks state " + std::to_string(i / world.num_actions) + " action " +
                       std::to_string(i % world.num_actions));
  }
  world.goal = detail::json_field<StateId>(j, "goal", "");
  world.resets = detail::json_field<std::vector<StateId>>(j, "resets", "");
  world.schedule = j.contains("schedule") ? schedule_from_json(j.at("schedule"), "schedule") : std::vector<ChangeEvent>{};

  world.neighbors.assign(pairs, kWall);
  if (j.contains("neighbors")) {
    const auto& nb = detail::json_array(j, "neighbors", "");
    if (nb.size() != world.num_states) throw ParseError("field 'neighbors' must have one row per state");
    for (StateId s = 0; s < world.num_states; ++s) {
      if (!nb[s].is_array() || nb[s].size() != world.num_actions)
        throw ParseError("field 'neighbors[" + std::to_string(s) + "]' must have one entry per action");
      for (ActionId a = 0; a < world.num_actions; ++a) {
        if (!nb[s][a].is_number_integer()) throw ParseError("field 'neighbors[" + std::to_string(s) + "]' must hold integers");
        const long long v = nb[s][a].get<long long>();
        world.neighbors[world.index(s, a)] = v < 0 ? kWall : static_cast<StateId>(v);
      }
    }
  } else {
    for (StateId s = 0; s < world.num_states; ++s) {
      for (ActionId a = 0; a < world.num_actions; ++a) {
        const auto& outs = world.transitions[world.index(s, a)];
        if (outs.empty()) continue;
        const auto best = std::max_element(outs.begin(), outs.end(),
                                           [](const Outcome& x, const Outcome& y) { return x.prob < y.prob; });
        world.neighbors[world.index(s, a)] = best->next == s ? kWall : best->next;
      }
    }
  }
  if (j.contains("cells")) {
    const auto& cells = detail::json_array(j, "cells", "");
    if (cells.size() != world.num_states) throw ParseError("field 'cells' must have one entry per state");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!cells[i].is_array() || cells[i].size() != 2)
        throw ParseError("field 'cells[" + std::to_string(i) + "]' must be [row, col]");
      world.cells.push_back({cells[i][0].get<int>(), cells[i][1].get<int>()});
    }
  }
  validate_world(world);
  return world;
}

inline std::string dump_world(const WorldModel& world) { return world_to_json(world).dump(1) + "\n"; }

inline void save_world(const WorldModel& world, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << dump_world(world);
  if (!out) throw IoError("write failed: " + path);
}

inline WorldModel parse_world(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return world_from_json(j);
}

inline WorldModel load_world(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_world(buf.str());
}

}  // namespace mbmf
