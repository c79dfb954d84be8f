#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "mcbounds/environments.hpp"
#include "mcbounds/stat_core.hpp"
#include "oracles.hpp"

using namespace mcbounds;

TEST(GaussianBandit, SameSeedSameMeans) {
  const auto a = sample_bandit_episode(std::uint64_t{17});
  const auto b = sample_bandit_episode(std::uint64_t{17});
  EXPECT_EQ(a.arm_means, b.arm_means);
  EXPECT_EQ(a.arm_count(), 10u);
  EXPECT_DOUBLE_EQ(a.payout_variance, 0.5);
  EXPECT_NE(a.arm_means, sample_bandit_episode(std::uint64_t{18}).arm_means);
}

TEST(GaussianBandit, MeansUniformOnSymmetricInterval) {
  std::mt19937_64 rng(1);
  SampleStats all;
  for (int e = 0; e < 100000; ++e) {
    for (double m : sample_bandit_episode(rng).arm_means) {
      ASSERT_GE(m, -1.0);
      ASSERT_LE(m, 1.0);
      all = accumulate(all, m);
    }
  }
  // Var U[-1, 1] = 1/3.
  const double se = std::sqrt((1.0 / 3.0) / static_cast<double>(all.count()));
  EXPECT_LT(std::fabs(all.mean()), 3.0 * se);
}

TEST(GaussianBandit, ZeroVariancePaysTheMean) {
  GaussianBandit b{{0.3, -0.1}, 0.0};
  std::mt19937_64 rng(2);
  EXPECT_EQ(bandit_pull(b, 0, rng), 0.3);
  EXPECT_EQ(bandit_pull(b, 1, rng), -0.1);
}

TEST(GaussianBandit, PayoutMoments) {
  GaussianBandit b{{0.4, 0.0}, 0.5};
  std::mt19937_64 rng(3);
  SampleStats s;
  for (int i = 0; i < 100000; ++i) s = accumulate(s, bandit_pull(b, 0, rng));
  EXPECT_LT(std::fabs(s.mean() - 0.4), 3.0 * std::sqrt(0.5 / 1e5));
  EXPECT_NEAR(s.variance_vn(), 0.5, 0.02);
}

TEST(GaussianBandit, EqualStreamsEqualPayouts) {
  const auto b = sample_bandit_episode(std::uint64_t{5});
  std::mt19937_64 r1(9);
  std::mt19937_64 r2(9);
  EXPECT_EQ(bandit_pull(b, 3, r1), bandit_pull(b, 3, r2));
}

TEST(GaussianBandit, ArmIndexChecked) {
  const auto b = sample_bandit_episode(std::uint64_t{5});
  std::mt19937_64 rng(1);
  EXPECT_THROW(bandit_pull(b, 10, rng), std::out_of_range);
}

namespace {

GridWorld deterministic_world() {
  return GridWorld(10, 10, GridWorld::default_rewards(), 1.0, 0.95);
}

}  // namespace

TEST(GridWorld, DefaultLayout) {
  const GridWorld w;
  EXPECT_EQ(w.state_count(), 100);
  EXPECT_EQ(w.terminal_rewards().size(), 4u);
  EXPECT_DOUBLE_EQ(w.slip_success_prob(), 0.7);
  EXPECT_DOUBLE_EQ(w.discount(), 0.95);
  EXPECT_DOUBLE_EQ(w.max_return(), 10.0);
  EXPECT_DOUBLE_EQ(w.min_return(), -10.0);
  EXPECT_EQ(w.non_terminal_states().size(), 96u);
}

TEST(GridWorld, DeterministicInteriorMove) {
  const GridWorld w = deterministic_world();
  std::mt19937_64 rng(1);
  const State s = w.state_of({4, 4});
  const StepOutcome out = gridworld_step(w, s, Action::kUp, rng);
  EXPECT_EQ(out.next_state, w.state_of({4, 5}));
  EXPECT_DOUBLE_EQ(out.reward, 0.0);
  EXPECT_FALSE(out.terminal);
}

TEST(GridWorld, EnteringGoalPaysAndTerminates) {
  const GridWorld w = deterministic_world();
  std::mt19937_64 rng(1);
  const StepOutcome out = gridworld_step(w, w.state_of({7, 7}), Action::kRight, rng);
  EXPECT_EQ(out.next_state, w.state_of({8, 7}));
  EXPECT_DOUBLE_EQ(out.reward, 10.0);
  EXPECT_TRUE(out.terminal);
}

TEST(GridWorld, WallsKeepAgentInPlace) {
  const GridWorld w = deterministic_world();
  std::mt19937_64 rng(1);
  const State corner = w.state_of({0, 0});
  EXPECT_EQ(gridworld_step(w, corner, Action::kLeft, rng).next_state, corner);
  EXPECT_EQ(gridworld_step(w, corner, Action::kDown, rng).next_state, corner);
}

TEST(GridWorld, SteppingFromTerminalIsRejected) {
  const GridWorld w;
  std::mt19937_64 rng(1);
  EXPECT_THROW(gridworld_step(w, w.state_of({8, 7}), Action::kUp, rng), std::logic_error);
}

TEST(GridWorld, EmpiricalTransitionFrequencies) {
  const GridWorld w;
  std::mt19937_64 rng(10);
  const State s = w.state_of({4, 4});
  constexpr int kSteps = 100000;
  std::array<int, kActionCount> hits{};
  for (int i = 0; i < kSteps; ++i) {
    const State next = gridworld_step(w, s, Action::kUp, rng).next_state;
    for (int k = 0; k < kActionCount; ++k) {
      if (next == w.move(s, kAllActions[k])) ++hits[k];
    }
  }
  const double p_intended = 0.7 + 0.3 / 4;
  const double se = std::sqrt(p_intended * (1 - p_intended) / kSteps);
  EXPECT_LT(std::fabs(hits[0] / double(kSteps) - p_intended), 3 * se);
  const double p_other = 0.3 / 4;
  const double se_other = std::sqrt(p_other * (1 - p_other) / kSteps);
  for (int k = 1; k < kActionCount; ++k) {
    EXPECT_LT(std::fabs(hits[k] / double(kSteps) - p_other), 3 * se_other);
  }
}

TEST(GridWorld, OtherThreeSlipModel) {
  const GridWorld w(10, 10, GridWorld::default_rewards(), 0.7, 0.95, SlipModel::kOtherThree);
  EXPECT_DOUBLE_EQ(w.direction_probability(Action::kUp, Action::kUp), 0.7);
  EXPECT_DOUBLE_EQ(w.direction_probability(Action::kUp, Action::kLeft), 0.1);
  std::mt19937_64 rng(4);
  const State s = w.state_of({4, 4});
  int intended = 0;
  for (int i = 0; i < 100000; ++i) {
    intended += gridworld_step(w, s, Action::kUp, rng).next_state == w.move(s, Action::kUp);
  }
  EXPECT_LT(std::fabs(intended / 1e5 - 0.7), 3 * std::sqrt(0.21 / 1e5));
}

TEST(GridWorld, KernelSumsToOne) {
  for (SlipModel model : {SlipModel::kUniformAll, SlipModel::kOtherThree}) {
    const GridWorld w(10, 10, GridWorld::default_rewards(), 0.7, 0.95, model);
    for (State s = 0; s < w.state_count(); ++s) {
      for (Action a : kAllActions) {
        double total = 0.0;
        for (const Transition& t : w.transitions(s, a)) total += t.probability;
        EXPECT_NEAR(total, 1.0, 1e-15);
      }
    }
  }
}

TEST(ValueIteration, ZeroRewardsGiveZeroValues) {
  const GridWorld w(5, 4, {{{1, 1}, 0.0}}, 0.7, 0.95);
  const ValueTable t = value_iteration(w, 1e-6);
  for (double q : t.q_values) EXPECT_EQ(q, 0.0);
}

TEST(ValueIteration, OneStepAnalyticSolution) {
  const GridWorld w(2, 1, {{{1, 0}, 4.5}}, 1.0, 0.9);
  const ValueTable t = value_iteration(w, 1e-9);
  EXPECT_NEAR(t.q(0, Action::kRight), 4.5, 1e-12);
  EXPECT_NEAR(t.v(0), 4.5, 1e-12);
  EXPECT_EQ(t.greedy(0), Action::kRight);
  EXPECT_DOUBLE_EQ(t.v(1), 0.0);
  // Bumping the wall then moving right: 0.9 * 4.5.
  EXPECT_NEAR(t.q(0, Action::kLeft), 0.9 * 4.5, 1e-9);
}

TEST(ValueIteration, MatchesLinearSolvePolicyEvaluation) {
  const GridWorld w;
  const ValueTable t = value_iteration(w, kDefaultBellmanTolerance);
  EXPECT_LT(t.final_residual, 1e-6);
  const auto q = oracle::policy_evaluation_q(w, t);
  double worst = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) worst = std::max(worst, std::fabs(q[i] - t.q_values[i]));
  EXPECT_LT(worst, 1e-5);
}

TEST(ValueIteration, ValueIsMaxOverActions) {
  const GridWorld w;
  const ValueTable t = value_iteration(w);
  for (State s = 0; s < w.state_count(); ++s) {
    if (w.is_terminal(s)) {
      EXPECT_EQ(t.v(s), 0.0);
      continue;
    }
    double best = -1e300;
    for (Action a : kAllActions) best = std::max(best, t.q(s, a));
    EXPECT_EQ(t.v(s), best);
    EXPECT_EQ(t.q(s, t.greedy(s)), best);
    EXPECT_LE(std::fabs(t.v(s)), 10.0);
  }
}

TEST(EpsilonGreedy, ZeroExplorationIsGreedy) {
  const GridWorld w;
  const ValueTable t = value_iteration(w);
  std::mt19937_64 rng(1);
  for (State s : w.non_terminal_states()) {
    EXPECT_EQ(epsilon_greedy_action(t, s, 0.0, rng), t.greedy(s));
  }
}

TEST(EpsilonGreedy, FullExplorationIsUniform) {
  const GridWorld w;
  const ValueTable t = value_iteration(w);
  std::mt19937_64 rng(6);
  std::array<int, kActionCount> counts{};
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    ++counts[static_cast<std::size_t>(epsilon_greedy_action(t, 0, 1.0, rng))];
  }
  double chi2 = 0.0;
  const double expected = kDraws / 4.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99.9% quantile of chi-square with 3 degrees of freedom.
  EXPECT_LT(chi2, 16.266);
}

TEST(EpsilonGreedy, DeterministicUnderSeed) {
  const GridWorld w;
  const ValueTable t = value_iteration(w);
  std::mt19937_64 a(3);
  std::mt19937_64 b(3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(epsilon_greedy_action(t, 11, 0.5, a), epsilon_greedy_action(t, 11, 0.5, b));
  }
}

TEST(NoisyLeaf, TerminalIsExactlyZero) {
  const GridWorld w;
  const ValueTable t = value_iteration(w);
  std::mt19937_64 rng(1);
  EXPECT_EQ(noisy_leaf_estimate(t, w.state_of({8, 7}), rng), 0.0);
}

TEST(NoisyLeaf, BoundedZeroMeanNoise) {
  const GridWorld w;
  const ValueTable t = value_iteration(w);
  std::mt19937_64 rng(12);
  const State s = w.state_of({3, 5});
  SampleStats stats;
  for (int i = 0; i < 100000; ++i) {
    const double est = noisy_leaf_estimate(t, s, rng);
    ASSERT_LE(std::fabs(est - t.v(s)), 0.1);
    stats = accumulate(stats, est);
  }
  // Var U[-0.1, 0.1] = 0.01 / 3.
  EXPECT_LT(std::fabs(stats.mean() - t.v(s)), 3.0 * std::sqrt(0.01 / 3.0 / 1e5));
}

TEST(GridWorldConfig, ParsesLayoutFile) {
  const auto cfg = KeyValueConfig::parse_string(
      "# layout\nwidth = 6\nheight = 5\ncell.5.4 = 10\ncell.0.0 = -10\nslip = 0.8\n"
      "discount = 0.9\nseed = 3\n");
  const GridWorld w = gridworld_from_config(cfg);
  EXPECT_EQ(w.width(), 6);
  EXPECT_EQ(w.height(), 5);
  EXPECT_DOUBLE_EQ(w.slip_success_prob(), 0.8);
  EXPECT_DOUBLE_EQ(w.discount(), 0.9);
  EXPECT_TRUE(w.is_terminal(w.state_of({5, 4})));
  EXPECT_DOUBLE_EQ(w.entry_reward(w.state_of({0, 0})), -10.0);
}

TEST(GridWorldConfig, RejectsMalformedInput) {
  EXPECT_THROW(gridworld_from_config(KeyValueConfig::parse_string("cell.x.1 = 3\n")), ConfigError);
  EXPECT_THROW(gridworld_from_config(KeyValueConfig::parse_string("cell.20.1 = 3\n")), ConfigError);
  EXPECT_THROW(gridworld_from_config(KeyValueConfig::parse_string("slip = abc\n")), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("width 10\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("width = 1\nwidth = 2\n"), ConfigError);
}
