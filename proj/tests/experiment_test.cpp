#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "mcbounds/experiment.hpp"
#include "oracles.hpp"

using namespace mcbounds;

namespace {

ExperimentConfig small_bandit() {
  ExperimentConfig cfg;
  cfg.episode_count = 60;
  cfg.sample_counts = {10, 50, 200};
  cfg.seed = 4;
  cfg.threads = 2;
  return cfg;
}

std::string curve_text(const RateCurve& c) {
  std::ostringstream os;
  write_csv(c, os);
  return os.str();
}

}  // namespace

TEST(ExperimentConfig, ValidationRejectsBadValues) {
  ExperimentConfig cfg;
  cfg.episode_count = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sample_counts = {10, 5};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sample_counts = {};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epsilon_margin = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.fixed_alpha = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.depth = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(ExperimentConfig{}.validate());
}

TEST(ExperimentConfig, DepthDefaultsPerProblem) {
  ExperimentConfig cfg;
  cfg.problem = Problem::kGridworldMc;
  EXPECT_EQ(cfg.resolved_depth(), 10);
  cfg.problem = Problem::kGridworldMcts;
  EXPECT_EQ(cfg.resolved_depth(), 25);
  cfg.depth = 7;
  EXPECT_EQ(cfg.resolved_depth(), 7);
}

TEST(ExperimentConfig, ApplyConfigFile) {
  ExperimentConfig cfg;
  const auto kv = KeyValueConfig::parse_string(
      "problem = gridworld-mcts\nepisodes = 12\nsamples = 10, 40\nuct_c = 0.5\nalpha = 0.01\n"
      "welch = printed\ncell.1.1 = 2\nwidth = 4\nheight = 3\n");
  apply_config(cfg, kv);
  EXPECT_EQ(cfg.problem, Problem::kGridworldMcts);
  EXPECT_EQ(cfg.episode_count, 12u);
  EXPECT_EQ(cfg.sample_counts, (std::vector<std::size_t>{10, 40}));
  EXPECT_DOUBLE_EQ(cfg.uct_c, 0.5);
  ASSERT_TRUE(cfg.fixed_alpha);
  EXPECT_DOUBLE_EQ(*cfg.fixed_alpha, 0.01);
  EXPECT_EQ(cfg.welch, WelchForm::kPrinted);
  EXPECT_EQ(cfg.world.width(), 4);
  EXPECT_EQ(cfg.world.state_count(), 12);
  EXPECT_TRUE(cfg.world.is_terminal(cfg.world.state_of({1, 1})));

  apply_config(cfg, KeyValueConfig::parse_string("alpha = opt\n"));
  EXPECT_FALSE(cfg.fixed_alpha);
}

TEST(ExperimentConfig, UnknownKeysAreErrors) {
  ExperimentConfig cfg;
  EXPECT_THROW(apply_config(cfg, KeyValueConfig::parse_string("epsilonn = 0.2\n")), ConfigError);
  EXPECT_THROW(apply_config(cfg, KeyValueConfig::parse_string("episodes = many\n")), ConfigError);
  EXPECT_THROW(apply_config(cfg, KeyValueConfig::parse_string("problem = chess\n")), ConfigError);
}

TEST(TrueValueOracle, BanditReturnsArmMeans) {
  const auto b = sample_bandit_episode(std::uint64_t{2});
  EXPECT_EQ(true_value_oracle(b), b.arm_means);
}

TEST(TrueValueOracle, GridworldAdjacentToGoal) {
  const GridWorld w(10, 10, GridWorld::default_rewards(), 1.0, 0.95);
  const ValueTable t = value_iteration(w);
  EXPECT_NEAR(true_value_oracle(t, w.state_of({7, 7}))[3], 10.0, 1e-12);
}

TEST(TrueValueOracle, MatchesLinearSolve) {
  const GridWorld w;
  const ValueTable t = value_iteration(w);
  const auto q = oracle::policy_evaluation_q(w, t);
  for (State s : w.non_terminal_states()) {
    const auto qs = true_value_oracle(t, s);
    for (std::size_t a = 0; a < qs.size(); ++a) {
      EXPECT_NEAR(qs[a], q[static_cast<std::size_t>(s) * kActionCount + a], 1e-5);
    }
  }
}

TEST(RunExperiment, NoiselessBanditHasNoValueErrorAtFullCoverage) {
  ExperimentConfig cfg = small_bandit();
  cfg.bandit_variance = 0.0;
  cfg.sample_counts = {10};
  const auto out = run_experiment(cfg);
  ASSERT_EQ(out.curve.rows.size(), 2u);
  const RateRow& value = out.curve.rows[0];
  EXPECT_EQ(value.metric, Metric::kValueError);
  EXPECT_EQ(value.n, 10u);
  EXPECT_EQ(value.episodes, cfg.episode_count);
  EXPECT_EQ(value.observed, 0.0);
  // One payout per arm identifies the best arm exactly.
  EXPECT_EQ(out.curve.rows[1].observed, 0.0);
}

TEST(RunExperiment, RowsFollowSampleCountThenMetricOrder) {
  const auto out = run_experiment(small_bandit());
  ASSERT_EQ(out.curve.rows.size(), 6u);
  EXPECT_EQ(out.curve.rows[0].n, 10u);
  EXPECT_EQ(out.curve.rows[1].metric, Metric::kActionError);
  EXPECT_EQ(out.curve.rows[4].n, 200u);
  for (const RateRow& r : out.curve.rows) {
    EXPECT_GE(r.general_mean, 0.0);
    EXPECT_LE(r.general_mean, 1.0);
    EXPECT_LE(r.clt_mean, 1.0);
    EXPECT_EQ(r.episodes, 60u);
  }
}

TEST(RunExperiment, ObservedRateRecountsFromPersistedEpisodes) {
  const auto out = run_experiment(small_bandit());
  std::stringstream ss;
  write_episodes_csv(out.episodes, ss);
  const auto back = parse_episodes_csv(ss);
  ASSERT_EQ(back.size(), out.episodes.size());
  for (const RateRow& row : out.curve.rows) {
    std::size_t hits = 0;
    std::size_t total = 0;
    double general = 0.0;
    for (const EpisodeRecord& r : back) {
      if (r.n != row.n) continue;
      const MetricOutcome& o = row.metric == Metric::kValueError ? r.value_error : r.action_error;
      hits += o.violation;
      general += o.general_bound;
      ++total;
    }
    EXPECT_EQ(total, row.episodes);
    EXPECT_EQ(static_cast<double>(hits) / static_cast<double>(total), row.observed);
    EXPECT_NEAR(general / static_cast<double>(total), row.general_mean, 1e-12);
  }
  EXPECT_EQ(curve_text(aggregate_episodes(back, small_bandit().sample_counts)),
            curve_text(out.curve));
}

TEST(RunExperiment, ResultsIndependentOfThreadCount) {
  ExperimentConfig cfg = small_bandit();
  cfg.threads = 1;
  const std::string one = curve_text(run_experiment(cfg).curve);
  cfg.threads = 4;
  EXPECT_EQ(one, curve_text(run_experiment(cfg).curve));
  cfg.seed = 5;
  EXPECT_NE(one, curve_text(run_experiment(cfg).curve));
}

TEST(RunExperiment, GridworldProblemsRun) {
  for (Problem p : {Problem::kGridworldMc, Problem::kGridworldMcts}) {
    ExperimentConfig cfg;
    cfg.problem = p;
    cfg.episode_count = 20;
    cfg.sample_counts = {10, 100};
    cfg.threads = 2;
    const auto out = run_experiment(cfg);
    EXPECT_EQ(out.curve.rows.size(), 4u);
    EXPECT_EQ(out.episodes.size(), 40u);
  }
}

TEST(Csv, EmptyCurveWritesHeaderOnly) {
  EXPECT_EQ(curve_text({}), std::string(kCurveHeader) + "\n");
}

TEST(Csv, RoundTrip) {
  const auto out = run_experiment(small_bandit());
  std::stringstream ss(curve_text(out.curve));
  const RateCurve back = parse_csv(ss);
  ASSERT_EQ(back.rows.size(), out.curve.rows.size());
  EXPECT_EQ(curve_text(back), curve_text(out.curve));
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    EXPECT_NEAR(back.rows[i].general_mean, out.curve.rows[i].general_mean, 1e-8);
    EXPECT_NEAR(back.rows[i].observed, out.curve.rows[i].observed, 1e-9);
    EXPECT_EQ(back.rows[i].episodes, out.curve.rows[i].episodes);
  }
}

TEST(Csv, FixedPrecisionFormatting) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_real(0.0), "0");
}

TEST(Csv, UnwritablePathReportsPath) {
  const std::string path = "/nonexistent-dir/for/sure/out.csv";
  try {
    emit_csv({}, path);
    FAIL() << "expected an I/O error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
  }
}

TEST(Csv, EmitWritesFile) {
  const auto path = std::filesystem::temp_directory_path() / "mcbounds_emit_test.csv";
  const auto out = run_experiment(small_bandit());
  emit_csv(out.curve, path.string());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), curve_text(out.curve));
  std::filesystem::remove(path);
}
