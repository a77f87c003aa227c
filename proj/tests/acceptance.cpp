// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "mbmf/mbmf.hpp"
#include "test_helpers.hpp"

using namespace mbmf;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Verdict equation_suite() {
  Verdict o;
  const double tol = 1e-9;
  o.require(near(entropy_bits(ProbDist::uniform(8)), 3.0, tol), "entropy of uniform(8)");
  o.require(near(kappa(0.0, 7.0), 1.0, tol), "kappa(0)");
  o.require(near(kappa(3.0, 7.0), std::exp(-21.0), tol), "kappa(3, 7)");

  ModelFreeExpert mf(2, 8);
  mf.learn(0, 0, 1.0, 1);
  o.require(near(mf.table().at(0, 0), 1.54, tol), "q-learning update 1.54");

  TransitionModel tm(3, 1, 6);
  for (StateId s : {1, 1, 1, 1, 2, 2}) tm.observe(0, 0, s);
  o.require(near(tm.probability(0, 0, 1), 4.0 / 6.0, tol), "window count 4/6");
  TransitionModel ev(3, 1, 6);
  for (int i = 0; i < 6; ++i) ev.observe(0, 0, 1);
  ev.observe(0, 0, 2);
  o.require(near(ev.probability(0, 0, 1), 5.0 / 6.0, tol), "post-eviction 5/6");

  const ProbDist f = low_pass(ProbDist::uniform(8), ProbDist::one_hot(8, 0), 0.6);
  bool filter_ok = near(f[0], 0.65, tol);
  for (std::size_t i = 1; i < 8; ++i) filter_ok = filter_ok && near(f[i], 0.05, tol);
  o.require(filter_ok, "filter [0.65, 0.05 x7]");
  return o;
}

Verdict value_iteration_oracle() {
  Verdict o;
  PlannerConfig cfg;
  cfg.epsilon_vi = 1e-9;
  cfg.max_sweeps = 100000;
  TransitionModel tm(3, 1, 6);
  RewardModel rm(3, 1);
  tm.observe(0, 0, 1);
  rm.observe(0, 0, 1, 0.0);
  tm.observe(1, 0, 2);
  rm.observe(1, 0, 2, 1.0);
  tm.observe(2, 0, 2);
  rm.observe(2, 0, 2, 0.0);
  const PlanResult chain = value_iteration(tm, rm, cfg);
  o.require(near(chain.q.at(0, 0), 0.95, 1e-6), "chain Q(s0) = " + fmt(chain.q.at(0, 0)));
  o.require(near(chain.q.at(1, 0), 1.0, 1e-6), "chain Q(s1) = " + fmt(chain.q.at(1, 0)));

  TransitionModel loop(1, 1, 6);
  RewardModel loop_r(1, 1);
  loop.observe(0, 0, 0);
  loop_r.observe(0, 0, 0, 1.0);
  const PlanResult self = value_iteration(loop, loop_r, cfg);
  o.require(near(self.q.at(0, 0), 20.0, 1e-6), "self-loop Q = " + fmt(self.q.at(0, 0)));
  return o;
}

Verdict q_learning_convergence() {
  Verdict o;
  const WorldModel w = test_support::chain_world(5);
  ModelFreeExpert mf(5, 2);
  Rng rng(31);
  StateId s = 0;
  for (int t = 0; t < 10000; ++t) {
    const ActionId a = mf.decide(mf.infer(s).values, rng).action;
    const StepOutcome out = step(w, s, a, rng);
    mf.learn(s, a, out.reward, out.next_state);
    s = out.episode_reset ? *out.post_reset_state : out.next_state;
  }
  TransitionModel tm(5, 2, 1);
  RewardModel rm(5, 2);
  for (StateId x = 0; x < 4; ++x)
    for (ActionId a = 0; a < 2; ++a) {
      const StateId nx = w.outcomes(x, a)[0].next;
      tm.observe(x, a, nx);
      rm.observe(x, a, nx, nx == w.goal ? 1.0 : 0.0);
    }
  PlannerConfig cfg;
  cfg.gamma = 0.9;
  cfg.epsilon_vi = 1e-12;
  cfg.max_sweeps = 10000;
  const PlanResult oracle = value_iteration(tm, rm, cfg);
  double worst = 0.0;
  for (StateId x = 0; x < 5; ++x)
    for (ActionId a = 0; a < 2; ++a) worst = std::max(worst, std::abs(mf.table().at(x, a) - oracle.q.at(x, a)));
  o.require(worst <= 0.05, "max |q - q*| = " + fmt(worst));
  if (o.pass) o.detail = "max |q - q*| = " + fmt(worst);
  return o;
}

Verdict gradient_check() {
  Verdict o;
  Rng rng(3);
  Mlp net = Mlp::glorot(std::vector<std::size_t>{38, 76, 76, 8}, rng);
  for (auto& l : net.layers())
    for (double& b : l.bias) b = 0.2 * (rng.uniform() - 0.5);
  std::vector<std::vector<double>> xs, ys;
  for (int k = 0; k < 10; ++k) {
    std::vector<double> x(38), y(8);
    for (double& v : x) v = rng.uniform();
    for (double& v : y) v = 2.0 * rng.uniform() - 1.0;
    xs.push_back(x);
    ys.push_back(y);
  }
  auto loss = [&] {
    double l = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const auto out = net.forward(xs[k]);
      for (std::size_t i = 0; i < out.size(); ++i) l += 0.5 * (out[i] - ys[k][i]) * (out[i] - ys[k][i]);
    }
    return l;
  };
  auto grads = net.zero_grads();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto acts = net.forward_all(xs[k]);
    std::vector<double> d(8);
    for (std::size_t i = 0; i < 8; ++i) d[i] = acts.back()[i] - ys[k][i];
    net.backward(acts, d, grads);
  }
  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + eps;
      const double up = loss();
      param = saved - eps;
      const double down = loss();
      param = saved;
      const double numeric = (up - down) / (2 * eps);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      worst = std::max(worst, scale < 1e-8 ? std::abs(analytic - numeric) : std::abs(analytic - numeric) / scale);
    };
    auto& layer = net.layers()[li];
    for (std::size_t k = 0; k < layer.weights.size(); ++k) check(layer.weights[k], grads[li].weights[k]);
    for (std::size_t k = 0; k < layer.bias.size(); ++k) check(layer.bias[k], grads[li].bias[k]);
  }
  o.require(worst < 1e-4, "worst relative error " + fmt(worst));
  if (o.pass) o.detail = "worst relative error " + fmt(worst) + " over " + std::to_string(net.parameter_count());
  return o;
}

// The reference batch shared by criteria 5-9.
struct ReferenceBatch {
  ExperimentConfig config;
  WorldModel world;
  std::map<AgentKind, BatchResult> batches;

  const AggregateSummary& summary(AgentKind k) const { return batches.at(k).summary; }
};

ReferenceBatch run_reference() {
  ReferenceBatch r;
  r.config.total_steps = 6400;
  r.config.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) r.config.seeds.push_back(s);
  r.config.cost.mode = CostMode::proxy;
  r.world = make_world(r.config);
  for (AgentKind k : kAllAgents) {
    ExperimentConfig c = r.config;
    c.agent = k;
    const auto t0 = std::chrono::steady_clock::now();
    r.batches.emplace(k, run_batch(c, r.world));
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    std::printf("  batch %s: 20 seeds in %.1f s\n", to_string(k).c_str(), dt.count());
    std::fflush(stdout);
  }
  return r;
}

Verdict performance_ordering(const ReferenceBatch& r) {
  Verdict o;
  const double mb = r.summary(AgentKind::MB_ONLY).mean_reward[1599];
  const double mf = r.summary(AgentKind::MF_ONLY).mean_reward[1599];
  const double dqn = r.summary(AgentKind::DQN).mean_reward.back();
  const double ec = r.summary(AgentKind::MC_EC).mean_reward.back();
  o.require(mb > mf, "MB_ONLY <= MF_ONLY at 1600");
  o.require(dqn < ec, "DQN >= MC_EC at 6400");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("reward@1600 MB_ONLY ") + fmt(mb) + ", MF_ONLY " + fmt(mf) +
              "; reward@6400 DQN " + fmt(dqn) + ", MC_EC " + fmt(ec);
  return o;
}

Verdict performance_preserved(const ReferenceBatch& r) {
  Verdict o;
  const double ec = r.summary(AgentKind::MC_EC).mean_reward.back();
  const double mb = r.summary(AgentKind::MB_ONLY).mean_reward.back();
  const double rnd = r.summary(AgentKind::MC_RND).mean_reward.back();
  o.require(ec >= 0.9 * mb, "MC_EC < 0.9 x MB_ONLY");
  o.require(ec > rnd, "MC_EC <= MC_RND");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("final reward MC_EC ") + fmt(ec) + ", MB_ONLY " + fmt(mb) +
              " (ratio " + fmt(ec / mb) + "), MC_RND " + fmt(rnd);
  return o;
}

Verdict cost_reduction(const ReferenceBatch& r) {
  Verdict o;
  const double ec = r.summary(AgentKind::MC_EC).mean_cost.back();
  const double mb = r.summary(AgentKind::MB_ONLY).mean_cost.back();
  o.require(ec <= 0.5 * mb, "MC_EC cost > 0.5 x MB_ONLY");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("final cost MC_EC ") + fmt(ec) + " s, MB_ONLY " + fmt(mb) +
              " s (ratio " + fmt(ec / mb) + ")";
  return o;
}

Verdict three_phase_pattern(const ReferenceBatch& r) {
  Verdict o;
  const std::vector<std::size_t> changes = change_steps(r.world);
  const ThreePhaseReport rep =
      evaluate_three_phases(r.batches.at(AgentKind::MC_EC), r.config.phase_window, changes.front(), 300);
  const auto rates = rep.detection_rates();
  std::printf("%s", format_three_phase_report(rep).c_str());
  o.require(rep.mean_curve.all(), "pattern absent on mean curves");
  o.require(rates[4] >= 0.6, "full pattern in " + fmt(100 * rates[4]) + "% of runs");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("rates: MF before discovery ") + fmt(rates[0]) +
              ", MB takes lead " + fmt(rates[1]) + ", MF retakes lead " + fmt(rates[2]) + ", MB after change " +
              fmt(rates[3]) + ", full " + fmt(rates[4]);
  return o;
}

Verdict determinism_and_accounting(const ReferenceBatch& r) {
  Verdict o;
  for (AgentKind k : kAllAgents) {
    ExperimentConfig c = r.config;
    c.agent = k;
    std::ostringstream a, b;
    write_run_csv(run_experiment(c, r.world, 0), a);
    write_run_csv(r.batches.at(k).logs.front(), b);
    o.require(a.str() == b.str(), to_string(k) + " rerun differs");
    for (const auto& log : r.batches.at(k).logs) {
      if (log.total_reward() != static_cast<double>(log.resets))
        o.require(false, to_string(k) + " seed " + std::to_string(log.seed) + " reward != resets");
      if ((k == AgentKind::MC_EC || k == AgentKind::MC_RND) &&
          log.inference_calls[0] + log.inference_calls[1] != r.config.total_steps)
        o.require(false, to_string(k) + " seed " + std::to_string(log.seed) + " inference count");
    }
  }
  if (o.pass) o.detail = "5 agents x 20 seeds";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const std::string& name, const Verdict& o) {
    std::printf("CRITERION %d %-34s %s%s%s\n", n, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.empty() ? "" : " | ",
                o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Verdict()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Verdict{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "equation unit suite", guarded(equation_suite));
  report(2, "value-iteration oracle", guarded(value_iteration_oracle));
  report(3, "q-learning convergence", guarded(q_learning_convergence));
  report(4, "dqn gradient check", guarded(gradient_check));

  std::printf("running reference batch (20 seeds, 6400 steps, change at 1600, proxy cost)\n");
  std::fflush(stdout);
  ReferenceBatch ref;
  try {
    ref = run_reference();
  } catch (const std::exception& e) {
    std::printf("reference batch failed: %s\n", e.what());
    for (int n = 5; n <= 9; ++n) std::printf("CRITERION %d FAIL | reference batch failed\n", n);
    return 1;
  }
  report(5, "performance ordering", guarded([&] { return performance_ordering(ref); }));
  report(6, "arbitration preserves performance", guarded([&] { return performance_preserved(ref); }));
  report(7, "cost reduction", guarded([&] { return cost_reduction(ref); }));
  report(8, "three-phase pattern", guarded([&] { return three_phase_pattern(ref); }));
  report(9, "determinism and accounting", guarded([&] { return determinism_and_accounting(ref); }));

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
