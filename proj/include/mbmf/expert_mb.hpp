#pragma once

// Model-based expert. The transition model keeps, per (s, a), the last N
// observed successor states; T(s,a,s') is the share of s' in that window, so
// every estimate is a multiple of 1/window-length. The reward model keeps the
// most recent reward seen for each (s, a, s'). Inference runs full-table
// value iteration over the visited pairs; unvisited pairs stay pinned at the
// optimistic initial value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbmf/errors.hpp"
#include "mbmf/expert_mf.hpp"
#include "mbmf/policy.hpp"
#include "mbmf/random.hpp"
#include "mbmf/world.hpp"

namespace mbmf {

struct PlannerConfig {
  double gamma = 0.95;
  double epsilon_vi = 1e-3;
  std::size_t max_sweeps = 100;
  double tau = 0.02;
  std::size_t window = 6;
  double initial_value = 1.0;
};

inline void validate(const PlannerConfig& c) {
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw ParameterError("mb.gamma must lie in (0, 1)");
  if (!(c.epsilon_vi > 0.0)) throw ParameterError("mb.epsilon_vi must be positive");
  if (c.max_sweeps == 0) throw ParameterError("mb.max_sweeps must be positive");
  if (!(c.tau > 0.0)) throw ParameterError("mb.tau must be positive");
  if (c.window == 0) throw ParameterError("mb.window must be positive");
  if (!std::isfinite(c.initial_value)) throw ParameterError("mb.initial_value must be finite");
}

class TransitionModel {
 public:
  TransitionModel(std::size_t num_states, std::size_t num_actions, std::size_t window)
      : num_states_(num_states), num_actions_(num_actions), capacity_(window),
        ring_(num_states * num_actions * window, 0), head_(num_states * num_actions, 0),
        length_(num_states * num_actions, 0) {
    if (window == 0) throw ParameterError("transition window must be positive");
  }

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  std::size_t capacity() const noexcept { return capacity_; }

  void observe(StateId s, ActionId a, StateId s_next) {
    check(s, a);
    if (s_next >= num_states_) throw InputError("next state id " + std::to_string(s_next) + " out of range");
    const std::size_t k = s * num_actions_ + a;
    ring_[k * capacity_ + head_[k]] = s_next;
    head_[k] = (head_[k] + 1) % capacity_;
    length_[k] = std::min(length_[k] + 1, capacity_);
  }

  // Number of visits held in the window, V_N(s, a).
  std::size_t visits(StateId s, ActionId a) const {
    check(s, a);
    return length_[s * num_actions_ + a];
  }

  // Window contents, oldest first.
  std::vector<StateId> window(StateId s, ActionId a) const {
    check(s, a);
    const std::size_t k = s * num_actions_ + a;
    std::vector<StateId> out;
    const std::size_t len = length_[k];
    const std::size_t start = (head_[k] + capacity_ - len) % capacity_;
    for (std::size_t i = 0; i < len; ++i) out.push_back(ring_[k * capacity_ + (start + i) % capacity_]);
    return out;
  }

  // Distinct successors with their counts, ascending by state id.
  std::vector<std::pair<StateId, std::size_t>> counts(StateId s, ActionId a) const {
    auto w = window(s, a);
    std::sort(w.begin(), w.end());
    std::vector<std::pair<StateId, std::size_t>> out;
    for (StateId x : w) {
      if (!out.empty() && out.back().first == x)
        ++out.back().second;
      else
        out.emplace_back(x, 1);
    }
    return out;
  }

  double probability(StateId s, ActionId a, StateId s_next) const {
    const std::size_t n = visits(s, a);
    if (n == 0) return 0.0;
    std::size_t c = 0;
    for (StateId x : window(s, a)) c += (x == s_next) ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(n);
  }

  void check(StateId s, ActionId a) const {
    if (s >= num_states_) throw InputError("state id " + std::to_string(s) + " out of range");
    if (a >= num_actions_) throw InputError("action id " + std::to_string(a) + " out of range");
  }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::size_t capacity_;
  std::vector<StateId> ring_;
  std::vector<std::size_t> head_;
  std::vector<std::size_t> length_;
};

class RewardModel {
 public:
  RewardModel(std::size_t num_states, std::size_t num_actions)
      : num_states_(num_states), num_actions_(num_actions), last_(num_states * num_actions * num_states, 0.0) {}

  void observe(StateId s, ActionId a, StateId s_next, double reward) {
    if (s >= num_states_ || a >= num_actions_ || s_next >= num_states_) throw InputError("reward model: id out of range");
    if (reward != 0.0 && reward != 1.0) throw InputError("reward must be 0 or 1");
    last_[(s * num_actions_ + a) * num_states_ + s_next] = reward;
  }

  double last(StateId s, ActionId a, StateId s_next) const {
    if (s >= num_states_ || a >= num_actions_ || s_next >= num_states_) throw InputError("reward model: id out of range");
    return last_[(s * num_actions_ + a) * num_states_ + s_next];
  }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> last_;
};

struct PlanResult {
  QTable q;
  std::size_t sweeps = 0;
  std::uint64_t backups = 0;
  bool converged = false;
  // Max-norm change of each sweep, in order.
  std::vector<double> sweep_deltas;
};

// Synchronous (Jacobi) sweeps of
//   Q(s,a) <- sum_s' T(s,a,s') [R(s,a,s') + gamma max_a' Q(s',a')]
// over visited pairs, starting from the optimistic value, until the largest
// change drops below epsilon_vi or max_sweeps is reached.
inline PlanResult value_iteration(const TransitionModel& tm, const RewardModel& rm, const PlannerConfig& config) {
  validate(config);
  const std::size_t S = tm.num_states(), A = tm.num_actions();

  struct Edge {
    StateId next;
    double prob;
    double reward;
  };
  std::vector<std::size_t> visited;
  std::vector<std::size_t> offsets{0};
  std::vector<Edge> edges;
  for (StateId s = 0; s < S; ++s) {
    for (ActionId a = 0; a < A; ++a) {
      const std::size_t n = tm.visits(s, a);
      if (n == 0) continue;
      visited.push_back(s * A + a);
      for (auto [next, count] : tm.counts(s, a))
        edges.push_back({next, static_cast<double>(count) / static_cast<double>(n), rm.last(s, a, next)});
      offsets.push_back(edges.size());
    }
  }

  PlanResult result{QTable(S, A, config.initial_value), 0, 0, false, {}};
  std::vector<double> q(result.q.raw().begin(), result.q.raw().end());
  std::vector<double> v(S);
  for (std::size_t sweep = 0; sweep < config.max_sweeps && !visited.empty(); ++sweep) {
    for (StateId s = 0; s < S; ++s) v[s] = *std::max_element(q.begin() + s * A, q.begin() + (s + 1) * A);
    double delta = 0.0;
    for (std::size_t i = 0; i < visited.size(); ++i) {
      double acc = 0.0;
      for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e)
        acc += edges[e].prob * (edges[e].reward + config.gamma * v[edges[e].next]);
      delta = std::max(delta, std::abs(acc - q[visited[i]]));
      q[visited[i]] = acc;
    }
    ++result.sweeps;
    result.backups += visited.size();
    result.sweep_deltas.push_back(delta);
    if (delta < config.epsilon_vi) {
      result.converged = true;
      break;
    }
  }
  if (visited.empty()) result.converged = true;
  for (StateId s = 0; s < S; ++s)
    for (ActionId a = 0; a < A; ++a) result.q.at(s, a) = q[s * A + a];
  return result;
}

class ModelBasedExpert {
 public:
  ModelBasedExpert(std::size_t num_states, std::size_t num_actions, PlannerConfig config = {})
      : config_(config), transitions_(num_states, num_actions, config.window), rewards_(num_states, num_actions) {
    validate(config_);
  }

  void learn(StateId s, ActionId a, double reward, StateId s_next) {
    transitions_.observe(s, a, s_next);
    rewards_.observe(s, a, s_next, reward);
  }

  PlanResult plan() const { return value_iteration(transitions_, rewards_, config_); }

  // Plans over the whole table and returns the row for s. units = backups.
  Inference infer(StateId s) const {
    transitions_.check(s, 0);
    const PlanResult p = plan();
    const auto r = p.q.row(s);
    return {ValueVector(r.begin(), r.end()), p.backups};
  }

  Decision decide(std::span<const double> values, Rng& rng) const { return softmax_decide(values, config_.tau, rng); }

  const TransitionModel& transitions() const noexcept { return transitions_; }
  const RewardModel& rewards() const noexcept { return rewards_; }
  const PlannerConfig& config() const noexcept { return config_; }

  // What the agent believes, in the world-file layout (visited pairs only),
  // plus the raw windows and last rewards.
  nlohmann::json model_json() const {
    nlohmann::json j;
    j["num_states"] = transitions_.num_states();
    j["num_actions"] = transitions_.num_actions();
    j["window"] = transitions_.capacity();
    auto arr = nlohmann::json::array();
    for (StateId s = 0; s < transitions_.num_states(); ++s) {
      for (ActionId a = 0; a < transitions_.num_actions(); ++a) {
        const std::size_t n = transitions_.visits(s, a);
        if (n == 0) continue;
        auto outs = nlohmann::json::array();
        for (auto [next, count] : transitions_.counts(s, a))
          outs.push_back({{"next", next},
                          {"prob", static_cast<double>(count) / static_cast<double>(n)},
                          {"reward", rewards_.last(s, a, next)}});
        arr.push_back({{"state", s}, {"action", a}, {"outcomes", outs}, {"window_contents", transitions_.window(s, a)}});
      }
    }
    j["transitions"] = std::move(arr);
    return j;
  }

 private:
  PlannerConfig config_;
  TransitionModel transitions_;
  RewardModel rewards_;
};

}  // namespace mbmf
