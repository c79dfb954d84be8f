#pragma once

// Benchmark generative models: a Gaussian multi-armed bandit and a stochastic
// gridworld, plus value iteration for gridworld ground truth and baseline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcbounds/kv_config.hpp"

namespace mcbounds {

// ---------------------------------------------------------------------------
// Gaussian bandit

struct GaussianBandit {
  std::vector<double> arm_means;
  double payout_variance = 0.5;

  std::size_t arm_count() const noexcept { return arm_means.size(); }
  std::size_t best_arm() const noexcept {
    return static_cast<std::size_t>(
        std::max_element(arm_means.begin(), arm_means.end()) - arm_means.begin());
  }
};

inline constexpr std::size_t kDefaultArmCount = 10;
inline constexpr double kDefaultPayoutVariance = 0.5;

template <class Rng>
GaussianBandit sample_bandit_episode(Rng& rng, std::size_t arms = kDefaultArmCount,
                                     double payout_variance = kDefaultPayoutVariance) {
  std::uniform_real_distribution<double> mean_dist(-1.0, 1.0);
  GaussianBandit b;
  b.payout_variance = payout_variance;
  b.arm_means.resize(arms);
  for (double& m : b.arm_means) m = mean_dist(rng);
  return b;
}

inline GaussianBandit sample_bandit_episode(std::uint64_t seed,
                                            std::size_t arms = kDefaultArmCount,
                                            double payout_variance = kDefaultPayoutVariance) {
  std::mt19937_64 rng(seed);
  return sample_bandit_episode(rng, arms, payout_variance);
}

template <class Rng>
double bandit_pull(const GaussianBandit& bandit, std::size_t arm, Rng& rng) {
  if (arm >= bandit.arm_count()) throw std::out_of_range("bandit_pull: arm index out of range");
  const double mean = bandit.arm_means[arm];
  if (bandit.payout_variance <= 0.0) return mean;
  std::normal_distribution<double> payout(mean, std::sqrt(bandit.payout_variance));
  return payout(rng);
}

// ---------------------------------------------------------------------------
// Gridworld

enum class Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kActionCount = 4;
inline constexpr std::array<Action, kActionCount> kAllActions{Action::kUp, Action::kDown,
                                                              Action::kLeft, Action::kRight};

inline const char* to_string(Action a) {
  switch (a) {
    case Action::kUp: return "up";
    case Action::kDown: return "down";
    case Action::kLeft: return "left";
    case Action::kRight: return "right";
  }
  return "?";
}

enum class SlipModel {
  kUniformAll,     // slip picks any of the four directions
  kOtherThree,     // slip picks one of the three unintended directions
};

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

using State = int;

struct StepOutcome {
  State next_state;
  double reward;
  bool terminal;
};

struct Transition {
  State next_state;
  double probability;
};

class GridWorld {
 public:
  // Terminal cells are spread over the four quadrants; the coordinates are a
  // pinned choice for reproducibility.
  static std::map<Cell, double> default_rewards() {
    return {{{8, 7}, 10.0}, {{2, 8}, 3.0}, {{6, 2}, -10.0}, {{1, 3}, -5.0}};
  }

  GridWorld() : GridWorld(10, 10, default_rewards()) {}

  GridWorld(int width, int height, std::map<Cell, double> terminal_rewards,
            double slip_success_prob = 0.7, double discount = 0.95,
            SlipModel slip_model = SlipModel::kUniformAll)
      : width_(width),
        height_(height),
        slip_success_prob_(slip_success_prob),
        discount_(discount),
        slip_model_(slip_model),
        terminal_rewards_(std::move(terminal_rewards)) {
    if (width_ < 1 || height_ < 1) throw std::invalid_argument("gridworld: empty grid");
    if (!(slip_success_prob_ >= 0.0 && slip_success_prob_ <= 1.0)) {
      throw std::invalid_argument("gridworld: slip probability must be in [0, 1]");
    }
    if (!(discount_ >= 0.0 && discount_ < 1.0)) {
      throw std::invalid_argument("gridworld: discount must be in [0, 1)");
    }
    reward_.assign(state_count(), 0.0);
    terminal_.assign(state_count(), false);
    for (const auto& [cell, r] : terminal_rewards_) {
      if (!in_bounds(cell)) throw std::invalid_argument("gridworld: reward cell out of bounds");
      reward_[state_of(cell)] = r;
      terminal_[state_of(cell)] = true;
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int state_count() const noexcept { return width_ * height_; }
  double slip_success_prob() const noexcept { return slip_success_prob_; }
  double discount() const noexcept { return discount_; }
  SlipModel slip_model() const noexcept { return slip_model_; }
  const std::map<Cell, double>& terminal_rewards() const noexcept { return terminal_rewards_; }

  bool in_bounds(Cell c) const noexcept {
    return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
  }
  State state_of(Cell c) const noexcept { return c.y * width_ + c.x; }
  Cell cell_of(State s) const noexcept { return {s % width_, s / width_}; }
  bool is_terminal(State s) const { return terminal_.at(static_cast<std::size_t>(s)); }
  double entry_reward(State s) const { return reward_.at(static_cast<std::size_t>(s)); }

  /// Deterministic move; walls keep the agent in place.
  State move(State s, Action a) const noexcept {
    Cell c = cell_of(s);
    switch (a) {
      case Action::kUp: ++c.y; break;
      case Action::kDown: --c.y; break;
      case Action::kLeft: --c.x; break;
      case Action::kRight: ++c.x; break;
    }
    return in_bounds(c) ? state_of(c) : s;
  }

  /// Probability that the executed direction is `executed` given `intended`.
  double direction_probability(Action intended, Action executed) const noexcept {
    const double slip = 1.0 - slip_success_prob_;
    if (slip_model_ == SlipModel::kUniformAll) {
      return (intended == executed ? slip_success_prob_ : 0.0) + slip / kActionCount;
    }
    return intended == executed ? slip_success_prob_ : slip / (kActionCount - 1);
  }

  /// Exact kernel; entries may repeat a next state (e.g. wall bumps).
  std::array<Transition, kActionCount> transitions(State s, Action a) const noexcept {
    std::array<Transition, kActionCount> out{};
    for (int k = 0; k < kActionCount; ++k) {
      out[k] = {move(s, kAllActions[k]), direction_probability(a, kAllActions[k])};
    }
    return out;
  }

  std::vector<State> non_terminal_states() const {
    std::vector<State> out;
    for (State s = 0; s < state_count(); ++s) {
      if (!terminal_[static_cast<std::size_t>(s)]) out.push_back(s);
    }
    return out;
  }

  /// Bounds on any discounted return: a single terminal reward, zero elsewhere.
  double min_return() const noexcept {
    double lo = 0.0;
    for (const auto& [c, r] : terminal_rewards_) lo = std::min(lo, r);
    return lo;
  }
  double max_return() const noexcept {
    double hi = 0.0;
    for (const auto& [c, r] : terminal_rewards_) hi = std::max(hi, r);
    return hi;
  }

 private:
  int width_;
  int height_;
  double slip_success_prob_;
  double discount_;
  SlipModel slip_model_;
  std::map<Cell, double> terminal_rewards_;
  std::vector<double> reward_;
  std::vector<bool> terminal_;
};

template <class Rng>
StepOutcome gridworld_step(const GridWorld& world, State state, Action action, Rng& rng) {
  if (state < 0 || state >= world.state_count()) {
    throw std::out_of_range("gridworld_step: state out of range");
  }
  if (world.is_terminal(state)) {
    throw std::logic_error("gridworld_step: cannot step from a terminal state");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Action executed = action;
  if (unit(rng) >= world.slip_success_prob()) {
    if (world.slip_model() == SlipModel::kUniformAll) {
      std::uniform_int_distribution<int> pick(0, kActionCount - 1);
      executed = kAllActions[static_cast<std::size_t>(pick(rng))];
    } else {
      std::uniform_int_distribution<int> pick(0, kActionCount - 2);
      int k = pick(rng);
      if (k >= static_cast<int>(action)) ++k;
      executed = kAllActions[static_cast<std::size_t>(k)];
    }
  }
  const State next = world.move(state, executed);
  const bool terminal = world.is_terminal(next);
  return {next, terminal ? world.entry_reward(next) : 0.0, terminal};
}

// ---------------------------------------------------------------------------
// Value iteration

/// Tabular Q*/V*/greedy policy. Terminal states hold zeros.
struct ValueTable {
  int state_count = 0;
  std::vector<double> q_values;  // state-major, kActionCount per state
  std::vector<double> v_values;
  std::vector<Action> greedy_action;
  std::vector<bool> terminal;
  double final_residual = 0.0;
  int sweeps = 0;

  double q(State s, Action a) const {
    return q_values.at(static_cast<std::size_t>(s) * kActionCount + static_cast<std::size_t>(a));
  }
  double v(State s) const { return v_values.at(static_cast<std::size_t>(s)); }
  Action greedy(State s) const { return greedy_action.at(static_cast<std::size_t>(s)); }
  bool is_terminal(State s) const { return terminal.at(static_cast<std::size_t>(s)); }
  double max_abs_value() const {
    double m = 0.0;
    for (double v : v_values) m = std::max(m, std::fabs(v));
    return m;
  }
};

inline constexpr double kDefaultBellmanTolerance = 1e-6;

namespace detail {

// Reward is collected on entering a terminal cell; terminal values are zero.
inline double backup(const GridWorld& world, const std::vector<double>& v, State s, Action a) {
  double q = 0.0;
  for (const Transition& t : world.transitions(s, a)) {
    const std::size_t ns = static_cast<std::size_t>(t.next_state);
    q += t.probability * (world.entry_reward(t.next_state) + world.discount() * v[ns]);
  }
  return q;
}

}  // namespace detail

inline ValueTable value_iteration(const GridWorld& world,
                                  double residual_tolerance = kDefaultBellmanTolerance,
                                  int max_sweeps = 1000000) {
  if (!(residual_tolerance > 0.0)) {
    throw std::invalid_argument("value_iteration: residual tolerance must be > 0");
  }
  const int n = world.state_count();
  ValueTable table;
  table.state_count = n;
  table.v_values.assign(static_cast<std::size_t>(n), 0.0);
  table.terminal.resize(static_cast<std::size_t>(n));
  for (State s = 0; s < n; ++s) table.terminal[static_cast<std::size_t>(s)] = world.is_terminal(s);

  std::vector<double> next(static_cast<std::size_t>(n), 0.0);
  double residual = std::numeric_limits<double>::infinity();
  while (residual >= residual_tolerance && table.sweeps < max_sweeps) {
    residual = 0.0;
    for (State s = 0; s < n; ++s) {
      const std::size_t si = static_cast<std::size_t>(s);
      if (table.terminal[si]) {
        next[si] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (Action a : kAllActions) best = std::max(best, detail::backup(world, table.v_values, s, a));
      next[si] = best;
      residual = std::max(residual, std::fabs(best - table.v_values[si]));
    }
    table.v_values.swap(next);
    ++table.sweeps;
  }
  table.final_residual = residual;

  table.q_values.assign(static_cast<std::size_t>(n) * kActionCount, 0.0);
  table.greedy_action.assign(static_cast<std::size_t>(n), Action::kUp);
  for (State s = 0; s < n; ++s) {
    const std::size_t si = static_cast<std::size_t>(s);
    if (table.terminal[si]) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (Action a : kAllActions) {
      const double q = detail::backup(world, table.v_values, s, a);
      table.q_values[si * kActionCount + static_cast<std::size_t>(a)] = q;
      if (q > best) {
        best = q;
        table.greedy_action[si] = a;
      }
    }
    table.v_values[si] = best;
  }
  return table;
}

inline constexpr double kDefaultExploreEpsilon = 0.1;
inline constexpr double kLeafNoiseHalfWidth = 0.1;

template <class Rng>
Action epsilon_greedy_action(const ValueTable& table, State state, double epsilon_explore,
                             Rng& rng) {
  if (table.is_terminal(state)) {
    throw std::logic_error("epsilon_greedy_action: terminal state");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon_explore) {
    std::uniform_int_distribution<int> pick(0, kActionCount - 1);
    return kAllActions[static_cast<std::size_t>(pick(rng))];
  }
  return table.greedy(state);
}

/// Baseline value plus Uniform(-0.1, 0.1) noise; exactly 0 at terminal states.
template <class Rng>
double noisy_leaf_estimate(const ValueTable& table, State state, Rng& rng) {
  if (table.is_terminal(state)) return 0.0;
  std::uniform_real_distribution<double> noise(-kLeafNoiseHalfWidth, kLeafNoiseHalfWidth);
  return table.v(state) + noise(rng);
}

// ---------------------------------------------------------------------------
// Plain-text layout files:
//   width = 10
//   height = 10
//   cell.8.7 = 10
//   slip = 0.7
//   discount = 0.95
//   slip_model = uniform_all | other_three
// `seed` is accepted and ignored here; the harness consumes it.

inline bool is_gridworld_key(const std::string& key) {
  return key == "width" || key == "height" || key == "slip" || key == "discount" ||
         key == "slip_model" || key.rfind("cell.", 0) == 0;
}

inline GridWorld gridworld_from_config(const KeyValueConfig& cfg) {
  const int width = cfg.get_int("width").value_or(10);
  const int height = cfg.get_int("height").value_or(10);
  const double slip = cfg.get_double("slip").value_or(0.7);
  const double discount = cfg.get_double("discount").value_or(0.95);
  SlipModel model = SlipModel::kUniformAll;
  if (auto m = cfg.get("slip_model")) {
    if (*m == "uniform_all") model = SlipModel::kUniformAll;
    else if (*m == "other_three") model = SlipModel::kOtherThree;
    else throw ConfigError("slip_model must be uniform_all or other_three, got '" + *m + "'");
  }
  std::map<Cell, double> rewards;
  for (const auto& [key, value] : cfg.entries()) {
    if (key.rfind("cell.", 0) != 0) continue;
    const auto dot = key.find('.', 5);
    if (dot == std::string::npos) throw ConfigError("malformed reward cell key '" + key + "'");
    Cell c;
    try {
      c.x = std::stoi(key.substr(5, dot - 5));
      c.y = std::stoi(key.substr(dot + 1));
    } catch (const std::exception&) {
      throw ConfigError("malformed reward cell key '" + key + "'");
    }
    rewards[c] = parse_double(key, value);
  }
  if (rewards.empty()) rewards = GridWorld::default_rewards();
  try {
    return GridWorld(width, height, std::move(rewards), slip, discount, model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace mcbounds
