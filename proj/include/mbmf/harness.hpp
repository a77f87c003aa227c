#pragma once

// Multi-seed batches, per-step aggregation, phase detection on the
// selection-probability curves and the eta sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "mbmf/errors.hpp"
#include "mbmf/experiment.hpp"

namespace mbmf {

// Per-step statistics over runs; std is the population standard deviation.
struct AggregateSummary {
  AgentKind agent = AgentKind::MC_EC;
  std::size_t runs = 0;
  std::vector<double> mean_reward, std_reward;
  std::vector<double> mean_cost, std_cost;
  std::vector<double> mean_p_mb, std_p_mb;
  std::vector<double> mean_p_mf, std_p_mf;

  std::size_t steps() const noexcept { return mean_reward.size(); }
};

struct BatchResult {
  std::vector<RunLog> logs;
  AggregateSummary summary;
};

namespace detail {

// Values are sorted before summation so the result does not depend on the
// order of the runs.
inline std::pair<double, double> mean_std(std::vector<double>& xs) {
  std::sort(xs.begin(), xs.end());
  if (xs.front() == xs.back()) return {xs.front(), 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  std::vector<double> sq;
  sq.reserve(xs.size());
  for (double x : xs) sq.push_back((x - mean) * (x - mean));
  std::sort(sq.begin(), sq.end());
  double var = 0.0;
  for (double v : sq) var += v;
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

template <typename E>
[[noreturn]] void rethrow_with_seed(const E& e, std::uint64_t seed) {
  throw E("seed " + std::to_string(seed) + ": " + e.what());
}

}  // namespace detail

inline std::vector<double> cumulative_reward(const RunLog& log) {
  std::vector<double> out;
  out.reserve(log.rows.size());
  double acc = 0.0;
  for (const auto& r : log.rows) out.push_back(acc += r.reward);
  return out;
}

inline std::vector<double> cumulative_cost(const RunLog& log) {
  std::vector<double> out;
  out.reserve(log.rows.size());
  double acc = 0.0;
  for (const auto& r : log.rows) out.push_back(acc += r.cost_seconds);
  return out;
}

inline AggregateSummary aggregate(const std::vector<RunLog>& logs) {
  if (logs.empty()) throw InputError("aggregate: no runs");
  const std::size_t T = logs.front().rows.size();
  for (const auto& l : logs)
    if (l.rows.size() != T) throw InputError("aggregate: runs differ in length");

  std::vector<std::vector<double>> reward, cost;
  for (const auto& l : logs) {
    reward.push_back(cumulative_reward(l));
    cost.push_back(cumulative_cost(l));
  }

  AggregateSummary s;
  s.agent = logs.front().agent;
  s.runs = logs.size();
  std::vector<double> xs(logs.size());
  auto fill = [&](auto&& value_at, std::vector<double>& mean, std::vector<double>& sd) {
    mean.resize(T);
    sd.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < logs.size(); ++k) xs[k] = value_at(k, t);
      std::tie(mean[t], sd[t]) = detail::mean_std(xs);
    }
  };
  fill([&](std::size_t k, std::size_t t) { return reward[k][t]; }, s.mean_reward, s.std_reward);
  fill([&](std::size_t k, std::size_t t) { return cost[k][t]; }, s.mean_cost, s.std_cost);
  fill([&](std::size_t k, std::size_t t) { return logs[k].rows[t].p_select_mb; }, s.mean_p_mb, s.std_p_mb);
  fill([&](std::size_t k, std::size_t t) { return logs[k].rows[t].p_select_mf; }, s.mean_p_mf, s.std_p_mf);
  return s;
}

// Runs every seed of config on the same world. A failing run aborts the
// batch; the error names the seed.
inline BatchResult run_batch(const ExperimentConfig& config, const WorldModel& world) {
  validate(config);
  BatchResult out;
  for (std::uint64_t seed : config.seeds) {
    try {
      out.logs.push_back(run_experiment(config, world, seed));
    } catch (const ParameterError& e) {
      detail::rethrow_with_seed(e, seed);
    } catch (const InputError& e) {
      detail::rethrow_with_seed(e, seed);
    } catch (const ValidationError& e) {
      detail::rethrow_with_seed(e, seed);
    } catch (const IoError& e) {
      detail::rethrow_with_seed(e, seed);
    } catch (const std::exception& e) {
      throw std::runtime_error("seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  out.summary = aggregate(out.logs);
  return out;
}

inline BatchResult run_batch(const ExperimentConfig& config) { return run_batch(config, make_world(config)); }

// Centered moving average; the window is truncated at both ends.
inline std::vector<double> moving_average(std::span<const double> xs, std::size_t window) {
  if (window == 0) throw ParameterError("smoothing window must be >= 1");
  const std::size_t n = xs.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + xs[i];
  std::vector<double> out(n);
  const std::size_t left = (window - 1) / 2, right = window - 1 - left;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n, i + right + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

// Phase boundaries inside one task period [begin, end). mf_to_mb is the first
// step where the smoothed MF probability is below 0.5 after having been above
// it in this period; mb_to_mf is the next step where it is above 0.5 again.
struct PeriodPhases {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::optional<std::size_t> mf_to_mb;
  std::optional<std::size_t> mb_to_mf;
};

struct PhaseReport {
  std::size_t window = 1;
  std::vector<PeriodPhases> periods;
};

inline PhaseReport detect_phases(std::span<const double> p_mf, std::size_t window,
                                 std::vector<std::size_t> change_steps = {}) {
  const std::vector<double> s = moving_average(p_mf, window);
  std::sort(change_steps.begin(), change_steps.end());
  std::vector<std::size_t> bounds{0};
  for (std::size_t c : change_steps)
    if (c > bounds.back() && c < s.size()) bounds.push_back(c);
  bounds.push_back(s.size());

  PhaseReport report;
  report.window = window;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    PeriodPhases p{bounds[k], bounds[k + 1], std::nullopt, std::nullopt};
    bool was_mf = false;
    for (std::size_t i = p.begin; i < p.end; ++i) {
      if (!p.mf_to_mb) {
        if (s[i] > 0.5) was_mf = true;
        else if (was_mf && s[i] < 0.5) p.mf_to_mb = i;
      } else if (s[i] > 0.5) {
        p.mb_to_mf = i;
        break;
      }
    }
    report.periods.push_back(p);
  }
  return report;
}

// The four checks of the MF exploring / MB driving / MF driving pattern on a
// pair of smoothed selection curves.
struct ThreePhaseCheck {
  std::optional<std::size_t> first_reward;
  bool mf_before_discovery = false;  // mean p_mf over [0, first_reward) > 0.5
  bool mb_takes_lead = false;        // p_mb > 0.5 within lead_window after first reward
  bool mf_retakes_lead = false;      // p_mf > 0.5 afterwards, before the change
  bool mb_after_change = false;      // p_mb > 0.5 within lead_window after the change
  std::optional<std::size_t> mb_lead_step, mf_lead_step, mb_relead_step;

  bool all() const { return mf_before_discovery && mb_takes_lead && mf_retakes_lead && mb_after_change; }
};

inline ThreePhaseCheck check_three_phases(std::span<const double> p_mb, std::span<const double> p_mf,
                                          std::optional<std::size_t> first_reward, std::size_t change_step,
                                          std::size_t lead_window = 300) {
  if (p_mb.size() != p_mf.size()) throw InputError("selection curves differ in length");
  ThreePhaseCheck c;
  c.first_reward = first_reward;
  const std::size_t n = p_mf.size();
  if (!first_reward || *first_reward == 0 || *first_reward >= n) return c;
  const std::size_t change = std::min(change_step, n);

  double acc = 0.0;
  for (std::size_t i = 0; i < *first_reward; ++i) acc += p_mf[i];
  c.mf_before_discovery = acc / static_cast<double>(*first_reward) > 0.5;

  for (std::size_t i = *first_reward; i < std::min(change, *first_reward + lead_window + 1); ++i)
    if (p_mb[i] > 0.5) {
      c.mb_lead_step = i;
      break;
    }
  c.mb_takes_lead = c.mb_lead_step.has_value();
  if (!c.mb_takes_lead) return c;

  for (std::size_t i = *c.mb_lead_step + 1; i < change; ++i)
    if (p_mf[i] > 0.5) {
      c.mf_lead_step = i;
      break;
    }
  c.mf_retakes_lead = c.mf_lead_step.has_value();
  if (!c.mf_retakes_lead) return c;

  for (std::size_t i = change; i < std::min(n, change + lead_window + 1); ++i)
    if (p_mb[i] > 0.5) {
      c.mb_relead_step = i;
      break;
    }
  c.mb_after_change = c.mb_relead_step.has_value();
  return c;
}

struct ThreePhaseReport {
  ThreePhaseCheck mean_curve;
  std::vector<ThreePhaseCheck> runs;

  // Fraction of runs passing each check and the full pattern.
  std::array<double, 5> detection_rates() const {
    std::array<double, 5> r{};
    for (const auto& c : runs) {
      r[0] += c.mf_before_discovery;
      r[1] += c.mb_takes_lead;
      r[2] += c.mf_retakes_lead;
      r[3] += c.mb_after_change;
      r[4] += c.all();
    }
    for (double& x : r) x = runs.empty() ? 0.0 : x / static_cast<double>(runs.size());
    return r;
  }
};

inline ThreePhaseReport evaluate_three_phases(const BatchResult& batch, std::size_t window, std::size_t change_step,
                                              std::size_t lead_window = 300) {
  ThreePhaseReport report;
  double reward_sum = 0.0;
  std::size_t rewarded = 0;
  for (const auto& log : batch.logs) {
    std::vector<double> mb, mf;
    for (const auto& r : log.rows) {
      mb.push_back(r.p_select_mb);
      mf.push_back(r.p_select_mf);
    }
    const auto first = log.first_reward_step();
    if (first) {
      reward_sum += static_cast<double>(*first);
      ++rewarded;
    }
    report.runs.push_back(
        check_three_phases(moving_average(mb, window), moving_average(mf, window), first, change_step, lead_window));
  }
  std::optional<std::size_t> mean_first;
  if (rewarded > 0) mean_first = static_cast<std::size_t>(std::lround(reward_sum / static_cast<double>(rewarded)));
  report.mean_curve = check_three_phases(moving_average(batch.summary.mean_p_mb, window),
                                         moving_average(batch.summary.mean_p_mf, window), mean_first, change_step,
                                         lead_window);
  return report;
}

struct SweepRow {
  double eta = 0.0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  bool dominated = false;
};

// Marks points beaten by another point on both reward (higher) and cost
// (lower), strictly on at least one.
inline void flag_dominated(std::vector<SweepRow>& rows) {
  for (auto& r : rows) {
    r.dominated = false;
    for (const auto& o : rows) {
      const bool no_worse = o.mean_reward >= r.mean_reward && o.mean_cost <= r.mean_cost;
      const bool better = o.mean_reward > r.mean_reward || o.mean_cost < r.mean_cost;
      if (no_worse && better) r.dominated = true;
    }
  }
}

// One MC_EC batch per eta on the same world and seeds.
inline std::vector<SweepRow> sweep_eta(const ExperimentConfig& config, const WorldModel& world,
                                       const std::vector<double>& etas) {
  if (etas.empty()) throw ParameterError("sweep needs at least one eta value");
  std::vector<SweepRow> rows;
  for (double eta : etas) {
    ExperimentConfig c = config;
    c.agent = AgentKind::MC_EC;
    c.mc.eta = eta;
    const BatchResult b = run_batch(c, world);
    rows.push_back({eta, b.summary.mean_reward.back(), b.summary.mean_cost.back(), false});
  }
  if (rows.size() > 1) flag_dominated(rows);
  return rows;
}

// Steps at which the world's schedule changes something.
inline std::vector<std::size_t> change_steps(const WorldModel& world) {
  std::vector<std::size_t> out;
  for (const auto& e : world.schedule) out.push_back(e.at_step);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace mbmf
