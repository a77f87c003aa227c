#pragma once

// Experiment configuration and the single-run decision loop.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mbmf/cost.hpp"
#include "mbmf/dqn.hpp"
#include "mbmf/errors.hpp"
#include "mbmf/expert_mb.hpp"
#include "mbmf/expert_mf.hpp"
#include "mbmf/meta_controller.hpp"
#include "mbmf/random.hpp"
#include "mbmf/world.hpp"
#include "mbmf/world_io.hpp"

namespace mbmf {

enum class AgentKind { MF_ONLY, MB_ONLY, MC_RND, MC_EC, DQN };

inline constexpr std::array<AgentKind, 5> kAllAgents{AgentKind::MF_ONLY, AgentKind::MB_ONLY, AgentKind::MC_RND,
                                                     AgentKind::MC_EC, AgentKind::DQN};

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::MF_ONLY: return "MF_ONLY";
    case AgentKind::MB_ONLY: return "MB_ONLY";
    case AgentKind::MC_RND: return "MC_RND";
    case AgentKind::MC_EC: return "MC_EC";
    case AgentKind::DQN: return "DQN";
  }
  return "?";
}

inline AgentKind agent_kind_from_string(const std::string& s) {
  for (AgentKind k : kAllAgents)
    if (to_string(k) == s) return k;
  throw ParameterError("unknown agent kind '" + s + "' (expected MF_ONLY, MB_ONLY, MC_RND, MC_EC or DQN)");
}

struct ExperimentConfig {
  // World: a file when set, otherwise the generator with world_seed.
  std::optional<std::string> world_path;
  std::uint64_t world_seed = 0;
  ArenaParams arena;
  // Replaces the world's own schedule when set.
  std::optional<std::vector<ChangeEvent>> schedule;

  AgentKind agent = AgentKind::MC_EC;
  std::size_t total_steps = 6400;
  std::vector<std::uint64_t> seeds{0};

  MfParams mf;
  PlannerConfig mb;
  ArbitrationParams mc;
  DqnParams dqn;
  // Network weights the DQN agent starts from instead of a fresh init.
  std::optional<std::string> dqn_checkpoint;
  CostModel cost;

  std::size_t phase_window = 50;
  std::string output_dir = "out";
};

inline void validate(const ExperimentConfig& c) {
  if (c.total_steps == 0) throw ParameterError("total_steps must be positive");
  if (c.seeds.empty()) throw ParameterError("at least one seed is required");
  if (c.phase_window == 0) throw ParameterError("phase_window must be positive");
  validate(c.mf);
  validate(c.mb);
  validate(c.mc);
  validate(c.dqn);
  if (!(c.cost.seconds_per_backup >= 0.0 && c.cost.seconds_per_mf_lookup >= 0.0 && c.cost.seconds_per_forward_pass >= 0.0))
    throw ParameterError("cost conversion factors must be non-negative");
}

struct LogRow {
  std::size_t step = 0;
  StateId state = 0;
  std::string winner;  // "MB", "MF" or "DQN"
  ActionId action = 0;
  StateId next_state = 0;
  double reward = 0.0;
  std::uint64_t cost_units = 0;
  double cost_seconds = 0.0;
  double h_mb = 0.0;
  double h_mf = 0.0;
  double kappa = 0.0;
  double p_select_mb = 0.0;
  double p_select_mf = 0.0;
  std::size_t episode = 0;
};

struct RunLog {
  AgentKind agent = AgentKind::MC_EC;
  std::uint64_t seed = 0;
  std::vector<LogRow> rows;
  // Number of teleports to a reset state.
  std::size_t resets = 0;
  // Expert inference calls, per expert (MB, MF); DQN counts under MF.
  std::array<std::uint64_t, kNumExperts> inference_calls{0, 0};

  double total_reward() const {
    double r = 0.0;
    for (const auto& row : rows) r += row.reward;
    return r;
  }

  double total_cost() const {
    double c = 0.0;
    for (const auto& row : rows) c += row.cost_seconds;
    return c;
  }

  // Step index of the first rewarded action at or after `from`.
  std::optional<std::size_t> first_reward_step(std::size_t from = 0) const {
    for (std::size_t i = from; i < rows.size(); ++i)
      if (rows[i].reward > 0.0) return i;
    return std::nullopt;
  }
};

inline WorldModel make_world(const ExperimentConfig& config) {
  WorldModel world = config.world_path ? load_world(*config.world_path) : generate_arena(config.world_seed, config.arena);
  if (config.schedule) world.schedule = *config.schedule;
  validate_world(world);
  return world;
}

namespace detail {

// Counts calls so the inhibition contract can be checked from outside.
template <DecisionExpert E>
struct CountingExpert {
  const E& inner;
  std::uint64_t& calls;
  Inference infer(StateId s) const {
    ++calls;
    return inner.infer(s);
  }
  Decision decide(std::span<const double> v, Rng& rng) const { return inner.decide(v, rng); }
};

}  // namespace detail

// Learner state at the end of a run, for dumps and inspection.
struct RunState {
  std::optional<ModelFreeExpert> mf;
  std::optional<ModelBasedExpert> mb;
  std::optional<ExpertMonitor> monitor;
  std::optional<DqnAgent> dqn;
};

// Executes config.total_steps decision cycles on a private copy of world.
// The seed drives two independent streams: one for the agent (expert
// selection, action sampling, network init, replay) and one for the
// environment (outcomes, resets).
inline RunLog run_experiment(const ExperimentConfig& config, WorldModel world, std::uint64_t seed,
                             RunState* final_state = nullptr) {
  validate(config);
  if (config.schedule) world.schedule = *config.schedule;
  validate_world(world);

  Rng root(seed);
  Rng agent_rng = root.split();
  Rng env_rng = root.split();

  const std::size_t S = world.num_states, A = world.num_actions;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  RunLog log;
  log.agent = config.agent;
  log.seed = seed;
  log.rows.reserve(config.total_steps);

  ModelFreeExpert mf(S, A, config.mf);
  ModelBasedExpert mb(S, A, config.mb);
  ExpertMonitor monitor(S, A, config.mc.alpha_f);
  std::optional<DqnAgent> dqn;
  if (config.agent == AgentKind::DQN) {
    dqn.emplace(S, A, config.dqn, agent_rng);
    if (config.dqn_checkpoint) dqn->load_checkpoint(*config.dqn_checkpoint);
  }

  detail::CountingExpert<ModelBasedExpert> mb_probe{mb, log.inference_calls[0]};
  detail::CountingExpert<ModelFreeExpert> mf_probe{mf, log.inference_calls[1]};

  StateId state = world.resets[env_rng.below(world.resets.size())];
  std::size_t episode = 0;
  for (std::size_t t = 0; t < config.total_steps; ++t) {
    apply_schedule(world, t);

    LogRow row;
    row.step = t;
    row.state = state;
    ActionId action = 0;

    switch (config.agent) {
      case AgentKind::MC_EC:
      case AgentKind::MC_RND: {
        const auto mode = config.agent == AgentKind::MC_EC ? Arbitration::entropy_cost : Arbitration::random;
        auto d = run_one_decision(state, mb_probe, mf_probe, monitor, config.mc, mode, config.cost, agent_rng);
        action = d.action;
        row.winner = to_string(d.selection.winner);
        row.cost_units = d.cost.units;
        row.cost_seconds = d.cost.seconds_equivalent;
        row.h_mb = d.selection.h_mb;
        row.h_mf = d.selection.h_mf;
        row.kappa = d.selection.kappa;
        row.p_select_mb = d.selection.expert_probs[0];
        row.p_select_mf = d.selection.expert_probs[1];
        break;
      }
      case AgentKind::MB_ONLY:
      case AgentKind::MF_ONLY: {
        const bool use_mb = config.agent == AgentKind::MB_ONLY;
        auto solo = [&](const auto& expert, double seconds_per_unit) {
          auto [inf, cost] = timed_infer(expert, state, seconds_per_unit, config.cost);
          Decision d = expert.decide(inf.values, agent_rng);
          action = d.action;
          row.cost_units = cost.units;
          row.cost_seconds = cost.seconds_equivalent;
          return entropy_bits(d.dist);
        };
        if (use_mb) {
          row.h_mb = solo(mb_probe, config.cost.seconds_per_backup);
          row.h_mf = nan;
        } else {
          row.h_mf = solo(mf_probe, config.cost.seconds_per_mf_lookup);
          row.h_mb = nan;
        }
        row.winner = use_mb ? "MB" : "MF";
        row.kappa = nan;
        row.p_select_mb = use_mb ? 1.0 : 0.0;
        row.p_select_mf = use_mb ? 0.0 : 1.0;
        break;
      }
      case AgentKind::DQN: {
        const auto t0 = std::chrono::steady_clock::now();
        Decision d = dqn->act(state, agent_rng);
        const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t0;
        ++log.inference_calls[1];
        const InferenceCost cost = make_cost(1, config.cost.seconds_per_forward_pass, wall.count(), config.cost);
        action = d.action;
        row.winner = "DQN";
        row.cost_units = cost.units;
        row.cost_seconds = cost.seconds_equivalent;
        row.h_mb = nan;
        row.h_mf = nan;
        row.kappa = nan;
        row.p_select_mb = 0.0;
        row.p_select_mf = 0.0;
        break;
      }
    }

    const StepOutcome out = step(world, state, action, env_rng);
    row.action = action;
    row.next_state = out.next_state;
    row.reward = out.reward;
    row.episode = episode;

    switch (config.agent) {
      case AgentKind::MC_EC:
      case AgentKind::MC_RND:
        mf.learn(state, action, out.reward, out.next_state);
        mb.learn(state, action, out.reward, out.next_state);
        break;
      case AgentKind::MF_ONLY: mf.learn(state, action, out.reward, out.next_state); break;
      case AgentKind::MB_ONLY: mb.learn(state, action, out.reward, out.next_state); break;
      case AgentKind::DQN:
        dqn->remember({state, action, out.reward, out.next_state, out.episode_reset});
        dqn->train_step(agent_rng);
        break;
    }

    log.rows.push_back(std::move(row));
    if (out.episode_reset) {
      ++log.resets;
      ++episode;
      state = *out.post_reset_state;
    } else {
      state = out.next_state;
    }
  }
  if (final_state) {
    final_state->mf.emplace(std::move(mf));
    final_state->mb.emplace(std::move(mb));
    final_state->monitor.emplace(std::move(monitor));
    if (dqn) final_state->dqn.emplace(std::move(*dqn));
  }
  return log;
}

}  // namespace mbmf
