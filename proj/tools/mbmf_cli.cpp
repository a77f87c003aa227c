// Command-line front end: run, batch, sweep-eta, generate-world and
// validate-world.
//
// Exit codes: 0 success, 1 unexpected failure, 2 bad config or arguments,
// 3 file I/O failure, 4 invalid world.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbmf/mbmf.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitValidation = 4;

struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorldFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> num_seeds;
  std::optional<std::string> output_dir;
  std::optional<std::string> cost_mode;
  std::optional<std::size_t> steps;
  std::optional<std::string> world_path;
  std::optional<std::uint64_t> world_seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "Experiment config (JSON)");
  cmd->add_option("--seeds", o.seeds, "Seed list");
  cmd->add_option("--num-seeds", o.num_seeds, "Use seeds 0..N-1");
  cmd->add_option("-o,--out", o.output_dir, "Output directory");
  cmd->add_option("--cost-mode", o.cost_mode, "proxy or measured");
  cmd->add_option("--steps", o.steps, "Total decision steps");
  cmd->add_option("--world", o.world_path, "World file (overrides the config)");
  cmd->add_option("--world-seed", o.world_seed, "Generator seed (overrides the config)");
}

mbmf::ExperimentConfig build_config(const CommonOptions& o) {
  try {
    mbmf::ExperimentConfig c = o.config_path.empty() ? mbmf::ExperimentConfig{} : mbmf::load_config(o.config_path);
    if (!o.seeds.empty()) c.seeds = o.seeds;
    if (o.num_seeds) {
      c.seeds.clear();
      for (std::uint64_t s = 0; s < *o.num_seeds; ++s) c.seeds.push_back(s);
    }
    if (o.output_dir) c.output_dir = *o.output_dir;
    if (o.cost_mode) c.cost.mode = mbmf::cost_mode_from_string(*o.cost_mode);
    if (o.steps) c.total_steps = *o.steps;
    if (o.world_path) c.world_path = *o.world_path;
    if (o.world_seed) {
      c.world_seed = *o.world_seed;
      c.world_path.reset();
    }
    mbmf::validate(c);
    return c;
  } catch (const mbmf::IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigFailure(e.what());
  }
}

mbmf::WorldModel build_world(const mbmf::ExperimentConfig& c) {
  try {
    return mbmf::make_world(c);
  } catch (const mbmf::IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw WorldFailure(e.what());
  }
}

std::vector<mbmf::AgentKind> parse_agents(const std::vector<std::string>& names, mbmf::AgentKind fallback) {
  if (names.empty()) return {fallback};
  std::vector<mbmf::AgentKind> out;
  for (const auto& n : names) {
    if (n == "all") return {mbmf::kAllAgents.begin(), mbmf::kAllAgents.end()};
    try {
      out.push_back(mbmf::agent_kind_from_string(n));
    } catch (const std::exception& e) {
      throw ConfigFailure(e.what());
    }
  }
  return out;
}

void print_summary(const mbmf::BatchResult& b) {
  const auto& s = b.summary;
  std::cout << mbmf::to_string(s.agent) << ": runs " << s.runs << ", final cumulative reward "
            << mbmf::format_double(s.mean_reward.back()) << " (std " << mbmf::format_double(s.std_reward.back())
            << "), final cumulative cost " << mbmf::format_double(s.mean_cost.back()) << " (std "
            << mbmf::format_double(s.std_cost.back()) << ")\n";
}

int run_cmd(const CommonOptions& o, const std::vector<std::string>& agents, const std::optional<std::string>& dump_q,
            const std::optional<std::string>& dump_model, const std::optional<std::string>& load_ckpt,
            const std::optional<std::string>& save_ckpt) {
  mbmf::ExperimentConfig c = build_config(o);
  const auto kinds = parse_agents(agents, c.agent);
  if (kinds.size() != 1) throw ConfigFailure("run takes exactly one agent; use batch for several");
  c.agent = kinds.front();
  if (load_ckpt) c.dqn_checkpoint = *load_ckpt;
  if (c.seeds.size() != 1) c.seeds.resize(1);
  const mbmf::WorldModel world = build_world(c);

  mbmf::RunState state;
  mbmf::BatchResult b;
  b.logs.push_back(mbmf::run_experiment(c, world, c.seeds.front(), &state));
  b.summary = mbmf::aggregate(b.logs);
  mbmf::emit_outputs({b}, c.output_dir, c.phase_window, mbmf::change_steps(world));

  if (dump_q) {
    if (!state.mf) throw ConfigFailure("--dump-q needs an agent with a model-free expert");
    std::ofstream out(*dump_q);
    if (!out) throw mbmf::IoError("cannot open " + *dump_q + " for writing");
    state.mf->dump_csv(out);
  }
  if (dump_model) {
    if (!state.mb) throw ConfigFailure("--dump-model needs an agent with a model-based expert");
    std::ofstream out(*dump_model);
    if (!out) throw mbmf::IoError("cannot open " + *dump_model + " for writing");
    out << state.mb->model_json().dump(1) << '\n';
  }
  if (save_ckpt) {
    if (!state.dqn) throw ConfigFailure("--save-checkpoint needs the DQN agent");
    state.dqn->save_checkpoint(*save_ckpt);
  }
  std::cout << "seed " << c.seeds.front() << ", resets " << b.logs.front().resets << '\n';
  print_summary(b);
  return 0;
}

int batch_cmd(const CommonOptions& o, const std::vector<std::string>& agents) {
  mbmf::ExperimentConfig c = build_config(o);
  const auto kinds = parse_agents(agents, c.agent);
  const mbmf::WorldModel world = build_world(c);
  std::vector<mbmf::BatchResult> batches;
  for (auto k : kinds) {
    mbmf::ExperimentConfig ck = c;
    ck.agent = k;
    batches.push_back(mbmf::run_batch(ck, world));
    print_summary(batches.back());
  }
  mbmf::emit_outputs(batches, c.output_dir, c.phase_window, mbmf::change_steps(world));
  return 0;
}

int sweep_cmd(const CommonOptions& o, const std::vector<double>& etas) {
  const mbmf::ExperimentConfig c = build_config(o);
  if (etas.empty()) throw ConfigFailure("at least one eta value is required");
  const mbmf::WorldModel world = build_world(c);
  const auto rows = mbmf::sweep_eta(c, world, etas);

  std::ostringstream csv;
  csv << "eta,mean_final_reward,mean_final_cost,dominated\n";
  for (const auto& r : rows)
    csv << mbmf::format_double(r.eta) << ',' << mbmf::format_double(r.mean_reward) << ','
        << mbmf::format_double(r.mean_cost) << ',' << (r.dominated ? "yes" : "no") << '\n';
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  const auto path = std::filesystem::path(c.output_dir) / "sweep_eta.csv";
  std::ofstream out(path);
  if (!out) throw mbmf::IoError("cannot open " + path.string() + " for writing");
  out << csv.str();
  std::cout << csv.str();
  return 0;
}

int generate_cmd(std::uint64_t seed, const std::optional<std::string>& out_path, const std::optional<double>& p_slip) {
  mbmf::ArenaParams params;
  if (p_slip) params.p_slip = *p_slip;
  mbmf::WorldModel world;
  try {
    world = mbmf::generate_arena(seed, params);
  } catch (const std::exception& e) {
    throw ConfigFailure(e.what());
  }
  if (out_path)
    mbmf::save_world(world, *out_path);
  else
    std::cout << mbmf::dump_world(world);
  return 0;
}

int validate_cmd(const std::string& path) {
  mbmf::WorldModel world;
  try {
    world = mbmf::load_world(path);
    mbmf::validate_world(world);
  } catch (const mbmf::IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw WorldFailure(e.what());
  }
  std::cout << path << ": ok (" << world.num_states << " states, " << world.num_actions << " actions, "
            << world.schedule.size() << " scheduled changes)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based / model-free arbitration experiments"};
  app.require_subcommand(1);

  CommonOptions run_opts, batch_opts, sweep_opts;
  std::vector<std::string> run_agents, batch_agents;
  std::optional<std::string> dump_q, dump_model, load_ckpt, save_ckpt;
  auto* run = app.add_subcommand("run", "Single experiment (first seed only)");
  add_common(run, run_opts);
  run->add_option("-a,--agent", run_agents, "MF_ONLY, MB_ONLY, MC_RND, MC_EC or DQN");
  run->add_option("--dump-q", dump_q, "Write the final model-free Q-table as CSV");
  run->add_option("--dump-model", dump_model, "Write the final model-based transition/reward model as JSON");
  run->add_option("--load-checkpoint", load_ckpt, "Start the DQN from saved weights");
  run->add_option("--save-checkpoint", save_ckpt, "Save the final DQN weights");

  auto* batch = app.add_subcommand("batch", "Multi-seed runs with aggregation");
  add_common(batch, batch_opts);
  batch->add_option("-a,--agent", batch_agents, "Agent kinds, or 'all'");

  std::vector<double> etas{0.0, 1.0, 3.0, 7.0, 15.0};
  auto* sweep = app.add_subcommand("sweep-eta", "Reward/cost trade-off over eta for MC_EC");
  add_common(sweep, sweep_opts);
  sweep->add_option("--eta", etas, "Eta values")->capture_default_str();

  std::uint64_t gen_seed = 0;
  std::optional<std::string> gen_out;
  std::optional<double> gen_slip;
  auto* gen = app.add_subcommand("generate-world", "Write a synthetic arena world file");
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Output path (stdout when omitted)");
  gen->add_option("--p-slip", gen_slip, "Slip probability");

  std::string validate_path;
  auto* val = app.add_subcommand("validate-world", "Check a world file");
  val->add_option("path", validate_path, "World file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return run_cmd(run_opts, run_agents, dump_q, dump_model, load_ckpt, save_ckpt);
    if (*batch) return batch_cmd(batch_opts, batch_agents);
    if (*sweep) return sweep_cmd(sweep_opts, etas);
    if (*gen) return generate_cmd(gen_seed, gen_out, gen_slip);
    if (*val) return validate_cmd(validate_path);
  } catch (const ConfigFailure& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mbmf::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const WorldFailure& e) {
    std::cerr << "invalid world: " << e.what() << '\n';
    return kExitValidation;
  } catch (const mbmf::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
