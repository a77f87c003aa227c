#pragma once

// Model-free expert: tabular Q-learning, table-lookup inference, softmax
// decision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mbmf/errors.hpp"
#include "mbmf/policy.hpp"
#include "mbmf/random.hpp"
#include "mbmf/world.hpp"

namespace mbmf {

// Values for one state plus the work spent producing them, in the expert's
// own units (one lookup for MF, one backup per (s, a) update for MB).
struct Inference {
  ValueVector values;
  std::uint64_t units = 0;
};

struct MfParams {
  double alpha = 0.6;
  double gamma = 0.9;
  double tau = 0.02;
  double initial_value = 1.0;
};

inline void validate(const MfParams& p) {
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw ParameterError("mf.alpha must lie in (0, 1]");
  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw ParameterError("mf.gamma must lie in [0, 1)");
  if (!(p.tau > 0.0)) throw ParameterError("mf.tau must be positive");
  if (!std::isfinite(p.initial_value)) throw ParameterError("mf.initial_value must be finite");
}

class QTable {
 public:
  QTable(std::size_t num_states, std::size_t num_actions, double initial)
      : num_states_(num_states), num_actions_(num_actions), q_(num_states * num_actions, initial) {}

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }

  double& at(StateId s, ActionId a) {
    check(s, a);
    return q_[s * num_actions_ + a];
  }
  double at(StateId s, ActionId a) const {
    check(s, a);
    return q_[s * num_actions_ + a];
  }

  std::span<const double> row(StateId s) const {
    check(s, 0);
    return {q_.data() + s * num_actions_, num_actions_};
  }

  double max_value(StateId s) const {
    const auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  }

  std::span<const double> raw() const noexcept { return q_; }

  void check(StateId s, ActionId a) const {
    if (s >= num_states_) throw InputError("state id " + std::to_string(s) + " out of range");
    if (a >= num_actions_) throw InputError("action id " + std::to_string(a) + " out of range");
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> q_;
};

class ModelFreeExpert {
 public:
  ModelFreeExpert(std::size_t num_states, std::size_t num_actions, MfParams params = {})
      : params_(params), table_(num_states, num_actions, params.initial_value) {
    validate(params_);
  }

  // Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)). On a rewarded
  // step s_next is the goal state as entered, before the reset teleport.
  void learn(StateId s, ActionId a, double reward, StateId s_next) {
    if (reward != 0.0 && reward != 1.0) throw InputError("reward must be 0 or 1");
    table_.check(s_next, 0);
    double& q = table_.at(s, a);
    q += params_.alpha * (reward + params_.gamma * table_.max_value(s_next) - q);
  }

  Inference infer(StateId s) const {
    const auto r = table_.row(s);
    return {ValueVector(r.begin(), r.end()), 1};
  }

  Decision decide(std::span<const double> values, Rng& rng) const { return softmax_decide(values, params_.tau, rng); }

  const QTable& table() const noexcept { return table_; }
  QTable& table() noexcept { return table_; }
  const MfParams& params() const noexcept { return params_; }

  void dump_csv(std::ostream& out) const {
    out << "state,action,value\n";
    for (StateId s = 0; s < table_.num_states(); ++s)
      for (ActionId a = 0; a < table_.num_actions(); ++a) out << s << ',' << a << ',' << table_.at(s, a) << '\n';
  }

 private:
  MfParams params_;
  QTable table_;
};

}  // namespace mbmf
