#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "mbmf/harness.hpp"
#include "mbmf/outputs.hpp"

using namespace mbmf;

namespace {

ExperimentConfig batch_config(AgentKind agent, std::vector<std::uint64_t> seeds, std::size_t steps = 600) {
  ExperimentConfig c;
  c.agent = agent;
  c.total_steps = steps;
  c.seeds = std::move(seeds);
  c.schedule = std::vector<ChangeEvent>{{steps / 2, RewardMove{34}}};
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Checks that start and end tags nest properly.
bool tags_balanced(const std::string& xml) {
  std::vector<std::string> stack;
  const std::regex tag(R"(<(/?)([A-Za-z][\w:-]*)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(xml.begin(), xml.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m[3] == "/") continue;
    if (m[1] == "/") {
      if (stack.empty() || stack.back() != m[2]) return false;
      stack.pop_back();
    } else {
      stack.push_back(m[2]);
    }
  }
  return stack.empty();
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Batch, SingleSeedEqualsRunWithZeroStd) {
  const ExperimentConfig c = batch_config(AgentKind::MC_EC, {3});
  const WorldModel w = make_world(c);
  const BatchResult b = run_batch(c, w);
  const RunLog log = run_experiment(c, w, 3);
  const auto reward = cumulative_reward(log);
  const auto cost = cumulative_cost(log);
  ASSERT_EQ(b.summary.steps(), c.total_steps);
  for (std::size_t t = 0; t < c.total_steps; ++t) {
    EXPECT_DOUBLE_EQ(b.summary.mean_reward[t], reward[t]);
    EXPECT_DOUBLE_EQ(b.summary.mean_cost[t], cost[t]);
    EXPECT_DOUBLE_EQ(b.summary.mean_p_mb[t], log.rows[t].p_select_mb);
    EXPECT_EQ(b.summary.std_reward[t], 0.0);
    EXPECT_EQ(b.summary.std_cost[t], 0.0);
    EXPECT_EQ(b.summary.std_p_mf[t], 0.0);
  }
}

TEST(Batch, DuplicatedSeedsMatchSingleRun) {
  const WorldModel w = generate_arena(0);
  const BatchResult one = run_batch(batch_config(AgentKind::MF_ONLY, {5}), w);
  const BatchResult three = run_batch(batch_config(AgentKind::MF_ONLY, {5, 5, 5}), w);
  EXPECT_EQ(three.summary.runs, 3u);
  for (std::size_t t = 0; t < one.summary.steps(); ++t) {
    EXPECT_DOUBLE_EQ(three.summary.mean_reward[t], one.summary.mean_reward[t]);
    EXPECT_DOUBLE_EQ(three.summary.mean_cost[t], one.summary.mean_cost[t]);
    EXPECT_EQ(three.summary.std_reward[t], 0.0);
    EXPECT_EQ(three.summary.std_cost[t], 0.0);
  }
}

TEST(Batch, MeanCumulativeRewardNonDecreasing) {
  const BatchResult b = run_batch(batch_config(AgentKind::MB_ONLY, {0, 1, 2}, 1200));
  for (std::size_t t = 1; t < b.summary.steps(); ++t) EXPECT_GE(b.summary.mean_reward[t], b.summary.mean_reward[t - 1]);
  EXPECT_GT(b.summary.mean_reward.back(), 0.0);
}

TEST(Batch, SeedPermutationLeavesAggregateUnchanged) {
  const WorldModel w = generate_arena(0);
  const BatchResult a = run_batch(batch_config(AgentKind::MC_RND, {0, 1, 2, 3}), w);
  const BatchResult b = run_batch(batch_config(AgentKind::MC_RND, {3, 1, 0, 2}), w);
  EXPECT_EQ(b.logs[0].seed, 3u);
  for (std::size_t t = 0; t < a.summary.steps(); ++t) {
    EXPECT_NEAR(a.summary.mean_reward[t], b.summary.mean_reward[t], 1e-12);
    EXPECT_NEAR(a.summary.std_reward[t], b.summary.std_reward[t], 1e-12);
    EXPECT_NEAR(a.summary.mean_cost[t], b.summary.mean_cost[t], 1e-12);
    EXPECT_NEAR(a.summary.std_cost[t], b.summary.std_cost[t], 1e-12);
    EXPECT_NEAR(a.summary.mean_p_mf[t], b.summary.mean_p_mf[t], 1e-12);
    EXPECT_NEAR(a.summary.std_p_mf[t], b.summary.std_p_mf[t], 1e-12);
  }
}

TEST(Batch, PopulationStd) {
  std::vector<double> xs{1.0, 3.0};
  const auto [mean, sd] = detail::mean_std(xs);
  EXPECT_EQ(mean, 2.0);
  EXPECT_EQ(sd, 1.0);
}

TEST(Batch, FailedRunNamesSeed) {
  ExperimentConfig c = batch_config(AgentKind::DQN, {7});
  c.dqn_checkpoint = "/nonexistent/ckpt.json";
  try {
    run_batch(c);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("seed 7"), std::string::npos);
  }
  c.seeds.clear();
  EXPECT_THROW(run_batch(c), ParameterError);
}

TEST(Batch, ArbitrationNeverCostsMoreThanMbOnly) {
  const WorldModel w = generate_arena(0);
  const BatchResult ec = run_batch(batch_config(AgentKind::MC_EC, {0, 1, 2}, 1000), w);
  const BatchResult mb = run_batch(batch_config(AgentKind::MB_ONLY, {0, 1, 2}, 1000), w);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(ec.logs[k].total_cost(), mb.logs[k].total_cost());
}

TEST(MovingAverage, WindowOneIsIdentityAndCenteredOtherwise) {
  const std::vector<double> xs{0, 0, 3, 0, 0};
  EXPECT_EQ(moving_average(xs, 1), xs);
  const auto m = moving_average(xs, 3);
  EXPECT_DOUBLE_EQ(m[0], 0.0);
  EXPECT_DOUBLE_EQ(m[1], 1.0);
  EXPECT_DOUBLE_EQ(m[2], 1.0);
  EXPECT_DOUBLE_EQ(m[3], 1.0);
  EXPECT_DOUBLE_EQ(m[4], 0.0);
}

TEST(DetectPhases, SyntheticStepCurve) {
  std::vector<double> p(600);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = i < 100 ? 0.9 : i < 300 ? 0.2 : 0.8;
  const PhaseReport exact = detect_phases(p, 1);
  ASSERT_EQ(exact.periods.size(), 1u);
  EXPECT_EQ(exact.periods[0].mf_to_mb, 100u);
  EXPECT_EQ(exact.periods[0].mb_to_mf, 300u);

  const PhaseReport smooth = detect_phases(p, 21);
  ASSERT_TRUE(smooth.periods[0].mf_to_mb && smooth.periods[0].mb_to_mf);
  EXPECT_NEAR(static_cast<double>(*smooth.periods[0].mf_to_mb), 100.0, 10.0);
  EXPECT_NEAR(static_cast<double>(*smooth.periods[0].mb_to_mf), 300.0, 10.0);
  EXPECT_LT(*smooth.periods[0].mf_to_mb, *smooth.periods[0].mb_to_mf);
}

TEST(DetectPhases, ConstantCurveReportsAbsence) {
  const std::vector<double> p(500, 0.5);
  const PhaseReport r = detect_phases(p, 25, {250});
  ASSERT_EQ(r.periods.size(), 2u);
  for (const auto& period : r.periods) {
    EXPECT_FALSE(period.mf_to_mb.has_value());
    EXPECT_FALSE(period.mb_to_mf.has_value());
  }
  EXPECT_NE(format_phase_report("MC_EC", r).find("absent"), std::string::npos);
}

TEST(DetectPhases, PerPeriodBoundaries) {
  std::vector<double> p(800);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t k = i % 400;
    p[i] = k < 100 ? 0.9 : k < 200 ? 0.1 : 0.9;
  }
  const PhaseReport r = detect_phases(p, 1, {400});
  ASSERT_EQ(r.periods.size(), 2u);
  EXPECT_EQ(r.periods[1].begin, 400u);
  EXPECT_EQ(r.periods[1].mf_to_mb, 500u);
  EXPECT_EQ(r.periods[1].mb_to_mf, 600u);
}

TEST(ThreePhase, SyntheticPattern) {
  // MF leads until the first reward at 100, MB from 150, MF from 400, MB
  // again 50 steps after the change at 800.
  std::vector<double> mf(1200);
  for (std::size_t i = 0; i < mf.size(); ++i)
    mf[i] = i < 150 ? 0.8 : i < 400 ? 0.3 : i < 850 ? 0.7 : 0.2;
  std::vector<double> mb(mf.size());
  for (std::size_t i = 0; i < mf.size(); ++i) mb[i] = 1.0 - mf[i];
  const ThreePhaseCheck c = check_three_phases(mb, mf, 100, 800);
  EXPECT_TRUE(c.all());
  EXPECT_EQ(c.mb_lead_step, 150u);
  EXPECT_EQ(c.mf_lead_step, 400u);
  EXPECT_EQ(c.mb_relead_step, 850u);

  const ThreePhaseCheck late = check_three_phases(mb, mf, 100, 800, 30);
  EXPECT_TRUE(late.mf_before_discovery);
  EXPECT_FALSE(late.mb_takes_lead);
  EXPECT_FALSE(late.all());
  EXPECT_FALSE(check_three_phases(mb, mf, std::nullopt, 800).mf_before_discovery);
}

TEST(Outputs, RunCsvSchema) {
  const ExperimentConfig c = batch_config(AgentKind::MC_EC, {0}, 50);
  const RunLog log = run_experiment(c, make_world(c), 0);
  std::ostringstream os;
  write_run_csv(log, os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "step,state,winner,action,next_state,reward,cost_units,cost_seconds,h_mb,h_mf,kappa,p_select_mb,"
            "p_select_mf,episode");
  EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1, 14);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 14);
    ++lines;
  }
  EXPECT_EQ(lines, 50u);
}

TEST(Outputs, ReemissionIsByteIdenticalAndSvgWellFormed) {
  const BatchResult b = run_batch(batch_config(AgentKind::MC_EC, {0, 1}, 300));
  const auto d1 = temp_dir("mbmf_emit_a");
  const auto d2 = temp_dir("mbmf_emit_b");
  emit_outputs({b}, d1.string(), 20, {150});
  emit_outputs({b}, d2.string(), 20, {150});
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(d1)) {
    const auto name = e.path().filename();
    EXPECT_EQ(read_file(e.path()), read_file(d2 / name)) << name;
    ++files;
  }
  EXPECT_EQ(files, 2u + 1u + 3u + 1u);
  for (const char* svg : {"reward.svg", "cost.svg", "selection.svg"}) {
    const std::string text = read_file(d1 / svg);
    EXPECT_NE(text.find("<svg"), std::string::npos) << svg;
    EXPECT_TRUE(tags_balanced(text)) << svg;
  }
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST(Outputs, UnwritableDirectoryIsIoError) {
  const BatchResult b = run_batch(batch_config(AgentKind::MF_ONLY, {0}, 20));
  EXPECT_THROW(emit_outputs({b}, "/proc/mbmf_out", 5, {}), IoError);
}

TEST(Outputs, SvgEscapesText) {
  const std::string svg = render_svg_chart("a < b & c", "y", {{"s\"1", {0.0, 1.0}}});
  EXPECT_TRUE(tags_balanced(svg));
  EXPECT_NE(svg.find("a &lt; b &amp; c"), std::string::npos);
}

TEST(Sweep, SingleEtaHasNoFlags) {
  const ExperimentConfig c = batch_config(AgentKind::MB_ONLY, {0}, 200);
  const auto rows = sweep_eta(c, make_world(c), {7.0});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].dominated);
  EXPECT_EQ(rows[0].eta, 7.0);
}

TEST(Sweep, DominanceFlags) {
  std::vector<SweepRow> rows{{0, 10, 1, false}, {1, 12, 1, false}, {2, 12, 2, false}, {3, 5, 0.5, false}};
  flag_dominated(rows);
  EXPECT_TRUE(rows[0].dominated);
  EXPECT_FALSE(rows[1].dominated);
  EXPECT_TRUE(rows[2].dominated);
  EXPECT_FALSE(rows[3].dominated);
}

TEST(Sweep, DefaultSweepFrontier) {
  ExperimentConfig c;
  c.seeds = {0, 1, 2, 3, 4};
  const WorldModel w = make_world(c);
  const auto rows = sweep_eta(c, w, {0, 1, 3, 7, 15});
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) EXPECT_GE(r.mean_cost, rows[0].mean_cost) << "eta " << r.eta;
  EXPECT_FALSE(rows[3].dominated) << "eta 7 dominated";
}
