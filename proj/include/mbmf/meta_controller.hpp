#pragma once

// Arbitration between the model-based and the model-free expert.
//
// The monitor keeps, per (state, expert), a low-pass filtered copy of the
// expert's action distribution and of its inference cost. Only the expert
// that led the decision in a state has its entries refreshed. Selection reads
// nothing but the monitor:
//
//   H(s,E)  entropy in bits of the filtered distribution
//   kappa   exp(-eta * H(s,MF))
//   Q(s,E)  -(H(s,E) + kappa * T(s,E))
//
// and draws the leader from softmax([Q_MB, Q_MF], tau_mc). The loser's
// inference never runs.

#include <array>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mbmf/cost.hpp"
#include "mbmf/errors.hpp"
#include "mbmf/expert_mf.hpp"
#include "mbmf/policy.hpp"
#include "mbmf/random.hpp"
#include "mbmf/world.hpp"

namespace mbmf {

enum class Expert : std::size_t { MB = 0, MF = 1 };
inline constexpr std::size_t kNumExperts = 2;

inline const char* to_string(Expert e) { return e == Expert::MB ? "MB" : "MF"; }

struct ArbitrationParams {
  double eta = 7.0;
  double tau_mc = 0.02;
  double alpha_f = 0.6;
};

inline void validate(const ArbitrationParams& p) {
  if (!(p.eta >= 0.0) || !std::isfinite(p.eta)) throw ParameterError("mc.eta must be non-negative");
  if (!(p.tau_mc > 0.0)) throw ParameterError("mc.tau must be positive");
  if (!(p.alpha_f >= 0.0 && p.alpha_f <= 1.0)) throw ParameterError("mc.alpha_f must lie in [0, 1]");
}

inline double kappa(double h_mf, double eta) { return std::exp(-eta * h_mf); }

inline double expert_value(double entropy, double kappa_weight, double filtered_cost) {
  return -(entropy + kappa_weight * filtered_cost);
}

class ExpertMonitor {
 public:
  ExpertMonitor(std::size_t num_states, std::size_t num_actions, double alpha_f)
      : num_actions_(num_actions), alpha_f_(alpha_f), uniform_(ProbDist::uniform(num_actions)),
        dist_(num_states * kNumExperts), cost_(num_states * kNumExperts, 0.0) {
    check_filter_coefficient(alpha_f);
  }

  // Uniform until the expert first leads in s.
  const ProbDist& dist(StateId s, Expert e) const {
    const auto& d = dist_[slot(s, e)];
    return d ? *d : uniform_;
  }

  double cost(StateId s, Expert e) const { return cost_[slot(s, e)]; }

  bool touched(StateId s, Expert e) const { return dist_[slot(s, e)].has_value(); }

  void update(StateId s, Expert winner, const ProbDist& winner_dist, double winner_cost_seconds) {
    if (winner_dist.size() != num_actions_) throw InputError("monitor: distribution length mismatch");
    if (!(winner_cost_seconds >= 0.0)) throw InputError("monitor: negative cost");
    const std::size_t k = slot(s, winner);
    dist_[k] = low_pass(dist(s, winner), winner_dist, alpha_f_);
    cost_[k] = low_pass(cost_[k], winner_cost_seconds, alpha_f_);
  }

  std::size_t num_states() const noexcept { return dist_.size() / kNumExperts; }
  double alpha_f() const noexcept { return alpha_f_; }

  friend bool operator==(const ExpertMonitor&, const ExpertMonitor&) = default;

 private:
  std::size_t slot(StateId s, Expert e) const {
    if (s >= num_states()) throw InputError("monitor: state id " + std::to_string(s) + " out of range");
    return s * kNumExperts + static_cast<std::size_t>(e);
  }

  std::size_t num_actions_;
  double alpha_f_;
  ProbDist uniform_;
  std::vector<std::optional<ProbDist>> dist_;
  std::vector<double> cost_;
};

struct Selection {
  Expert winner = Expert::MB;
  ProbDist expert_probs;  // [MB, MF]
  double h_mb = 0.0;
  double h_mf = 0.0;
  double kappa = 0.0;
  double q_mb = 0.0;
  double q_mf = 0.0;
};

// Expert values from the monitor alone; no expert is consulted.
inline Selection evaluate_experts(const ExpertMonitor& monitor, const ArbitrationParams& params, StateId s) {
  Selection sel;
  sel.h_mb = entropy_bits(monitor.dist(s, Expert::MB));
  sel.h_mf = entropy_bits(monitor.dist(s, Expert::MF));
  sel.kappa = kappa(sel.h_mf, params.eta);
  sel.q_mb = expert_value(sel.h_mb, sel.kappa, monitor.cost(s, Expert::MB));
  sel.q_mf = expert_value(sel.h_mf, sel.kappa, monitor.cost(s, Expert::MF));
  const std::array<double, kNumExperts> q{sel.q_mb, sel.q_mf};
  sel.expert_probs = softmax(q, params.tau_mc);
  return sel;
}

inline Selection select_expert(const ExpertMonitor& monitor, const ArbitrationParams& params, StateId s, Rng& rng) {
  Selection sel = evaluate_experts(monitor, params, s);
  sel.winner = static_cast<Expert>(rng.categorical(sel.expert_probs.probs()));
  return sel;
}

inline Expert select_expert_random(Rng& rng) { return rng.below(kNumExperts) == 0 ? Expert::MB : Expert::MF; }

// Anything that can propose values for a state and turn them into an action.
template <typename E>
concept DecisionExpert = requires(const E& e, StateId s, std::span<const double> v, Rng& rng) {
  { e.infer(s) } -> std::convertible_to<Inference>;
  { e.decide(v, rng) } -> std::convertible_to<Decision>;
};

enum class Arbitration { entropy_cost, random };

struct ArbitratedDecision {
  ActionId action = 0;
  Selection selection;
  ProbDist action_dist;
  InferenceCost cost;
};

// Infers with a single expert, timing the call. seconds_per_unit converts the
// expert's own units into the proxy seconds-equivalent.
template <DecisionExpert E>
std::pair<Inference, InferenceCost> timed_infer(const E& expert, StateId s, double seconds_per_unit,
                                                const CostModel& cost_model) {
  const auto t0 = std::chrono::steady_clock::now();
  Inference inf = expert.infer(s);
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t0;
  InferenceCost cost = make_cost(inf.units, seconds_per_unit, wall.count(), cost_model);
  return {std::move(inf), cost};
}

// One decision cycle: select the leader from stored monitor data, run only
// the leader's inference and decision, and feed its fresh distribution and
// cost back into the monitor.
template <DecisionExpert Mb, DecisionExpert Mf>
ArbitratedDecision run_one_decision(StateId s, const Mb& mb, const Mf& mf, ExpertMonitor& monitor,
                                    const ArbitrationParams& params, Arbitration mode, const CostModel& cost_model,
                                    Rng& rng) {
  ArbitratedDecision out;
  if (mode == Arbitration::entropy_cost) {
    out.selection = select_expert(monitor, params, s, rng);
  } else {
    out.selection = evaluate_experts(monitor, params, s);
    out.selection.expert_probs = ProbDist::uniform(kNumExperts);
    out.selection.winner = select_expert_random(rng);
  }

  auto lead = [&](const auto& expert, double seconds_per_unit) {
    auto [inf, cost] = timed_infer(expert, s, seconds_per_unit, cost_model);
    Decision d = expert.decide(inf.values, rng);
    out.action = d.action;
    out.action_dist = std::move(d.dist);
    out.cost = cost;
  };
  if (out.selection.winner == Expert::MB)
    lead(mb, cost_model.seconds_per_backup);
  else
    lead(mf, cost_model.seconds_per_mf_lookup);

  monitor.update(s, out.selection.winner, out.action_dist, out.cost.seconds_equivalent);
  return out;
}

}  // namespace mbmf
