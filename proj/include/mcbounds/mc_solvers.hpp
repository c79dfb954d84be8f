#pragma once

// Monte Carlo search procedures with per-trajectory bookkeeping: a softmax
// root sampler with baseline rollouts, and UCT tree search with noisy leaf
// evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mcbounds/bound_engine.hpp"
#include "mcbounds/environments.hpp"
#include "mcbounds/stat_core.hpp"

namespace mcbounds {

struct TrajectoryRecord {
  std::size_t root_action = 0;
  double discounted_return = 0.0;
  int depth = 0;                  // steps before the leaf estimate is injected
  double leaf_estimate = 0.0;
  bool terminal = false;
  double discount_weight = 1.0;   // discount^depth

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

struct SearchResult {
  std::vector<std::vector<TrajectoryRecord>> trajectories;  // per root action
  std::vector<ActionSampleSummary> summaries;
  std::size_t recommended_action = 0;
  std::size_t total_samples = 0;

  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// How returns are turned into summaries.
struct SummaryOptions {
  std::optional<double> range_override;  // theoretical return range for b
  std::optional<double> q_min;           // value bounds for the leaf error
  std::optional<double> q_max;
};

inline SummaryOptions gridworld_summary_options(const GridWorld& world) {
  const double lo = world.min_return();
  const double hi = world.max_return();
  return {hi - lo, lo, hi};
}

/// Mean over trajectories of discount^H * worst-case leaf error; terminal
/// trajectories contribute nothing.
inline double compute_zeta(std::span<const TrajectoryRecord> records, double q_min, double q_max) {
  if (records.empty()) throw std::domain_error("compute_zeta: empty trajectory list");
  double total = 0.0;
  for (const TrajectoryRecord& r : records) {
    if (r.terminal) continue;
    const double err = std::max(q_max - r.leaf_estimate, r.leaf_estimate - q_min);
    total += r.discount_weight * std::max(0.0, err);
  }
  return total / static_cast<double>(records.size());
}

inline std::vector<double> softmax_weights(std::span<const double> estimates, double tau) {
  if (estimates.empty()) throw std::invalid_argument("softmax_weights: no actions");
  if (!(tau > 0.0)) throw std::invalid_argument("softmax_weights: tau must be > 0");
  const double top = *std::max_element(estimates.begin(), estimates.end());
  std::vector<double> w(estimates.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp((estimates[i] - top) / tau);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

/// Argmax of sampled action means, lowest index on ties. Empty if nothing was
/// sampled.
inline std::optional<std::size_t> best_sampled_action(std::span<const ActionSampleSummary> s,
                                                      std::optional<std::size_t> exclude = {}) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].n == 0 || (exclude && *exclude == i)) continue;
    if (!best || s[i].mean > s[*best].mean) best = i;
  }
  return best;
}

namespace detail {

inline void finalize(SearchResult& result, const SummaryOptions& opt) {
  result.summaries.clear();
  result.total_samples = 0;
  for (const auto& records : result.trajectories) {
    SampleStats stats;
    for (const TrajectoryRecord& r : records) stats = accumulate(stats, r.discounted_return);
    double zeta = 0.0;
    if (!records.empty() && opt.q_min && opt.q_max) {
      zeta = compute_zeta(records, *opt.q_min, *opt.q_max);
    }
    result.summaries.push_back(make_summary(stats, zeta, opt.range_override, opt.q_min, opt.q_max));
    result.total_samples += records.size();
  }
  result.recommended_action = best_sampled_action(result.summaries).value_or(0);
}

// Root action for the softmax sampler: never-sampled actions first (uniformly),
// then a softmax draw over the current means.
template <class Rng>
std::size_t draw_root_action(const std::vector<SampleStats>& stats, double tau, Rng& rng) {
  std::vector<std::size_t> unsampled;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].empty()) unsampled.push_back(i);
  }
  if (!unsampled.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, unsampled.size() - 1);
    return unsampled[pick(rng)];
  }
  std::vector<double> means(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) means[i] = stats[i].mean();
  const std::vector<double> w = softmax_weights(means, tau);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cumulative += w[i];
    if (u < cumulative) return i;
  }
  return w.size() - 1;
}

}  // namespace detail

inline constexpr double kDefaultTemperature = 10.0;

/// Softmax root sampling on a bandit: each payout is a terminal, depth-0
/// trajectory, so every summary carries zeta = 0.
template <class Rng>
SearchResult simple_mc_search(const GaussianBandit& bandit, std::size_t total_samples, double tau,
                              Rng& rng) {
  if (total_samples < 1) throw std::invalid_argument("simple_mc_search: need >= 1 sample");
  SearchResult result;
  result.trajectories.resize(bandit.arm_count());
  std::vector<SampleStats> stats(bandit.arm_count());
  for (std::size_t k = 0; k < total_samples; ++k) {
    const std::size_t arm = detail::draw_root_action(stats, tau, rng);
    const double payout = bandit_pull(bandit, arm, rng);
    stats[arm] = accumulate(stats[arm], payout);
    result.trajectories[arm].push_back({arm, payout, 0, 0.0, true, 1.0});
  }
  detail::finalize(result, {});
  return result;
}

struct RolloutBaseline {
  const ValueTable* table = nullptr;
  double explore_epsilon = kDefaultExploreEpsilon;
};

/// Softmax root sampling on the gridworld; after the root action the rollout
/// follows the epsilon-greedy baseline for at most `depth` steps in total and
/// closes with a noisy baseline leaf estimate.
template <class Rng>
SearchResult simple_mc_search(const GridWorld& world, State root, std::size_t total_samples,
                              int depth, const RolloutBaseline& baseline, double tau, Rng& rng,
                              std::optional<SummaryOptions> summary = std::nullopt) {
  if (total_samples < 1) throw std::invalid_argument("simple_mc_search: need >= 1 sample");
  if (depth < 1) throw std::invalid_argument("simple_mc_search: depth must be >= 1");
  if (baseline.table == nullptr) throw std::invalid_argument("simple_mc_search: no baseline");
  const ValueTable& table = *baseline.table;
  const double gamma = world.discount();

  SearchResult result;
  result.trajectories.resize(kActionCount);
  std::vector<SampleStats> stats(kActionCount);
  for (std::size_t k = 0; k < total_samples; ++k) {
    const std::size_t root_action = detail::draw_root_action(stats, tau, rng);
    State s = root;
    Action a = kAllActions[root_action];
    double ret = 0.0;
    double weight = 1.0;
    int t = 0;
    bool terminal = false;
    double leaf = 0.0;
    while (true) {
      const StepOutcome out = gridworld_step(world, s, a, rng);
      ret += weight * out.reward;
      weight *= gamma;
      ++t;
      s = out.next_state;
      if (out.terminal) {
        terminal = true;
        break;
      }
      if (t >= depth) {
        leaf = noisy_leaf_estimate(table, s, rng);
        break;
      }
      a = epsilon_greedy_action(table, s, baseline.explore_epsilon, rng);
    }
    ret += weight * leaf;
    stats[root_action] = accumulate(stats[root_action], ret);
    result.trajectories[root_action].push_back(
        {root_action, ret, t, leaf, terminal, std::pow(gamma, t)});
  }
  detail::finalize(result, summary.value_or(gridworld_summary_options(world)));
  return result;
}

inline constexpr double kDefaultUctExploration = 1.0;
inline constexpr int kDefaultUctMaxDepth = 25;

namespace detail {

struct UctEdge {
  std::size_t visits = 0;
  double mean = 0.0;
  std::vector<std::pair<State, std::size_t>> children;  // next state -> node index
};

struct UctNode {
  State state = 0;
  std::size_t visits = 0;
  std::array<UctEdge, kActionCount> edges{};
};

// Unvisited actions first; otherwise argmax mean + c sqrt(ln N / n_a).
// Lowest index wins ties.
inline std::size_t uct_select(const UctNode& node, double c) {
  for (std::size_t a = 0; a < kActionCount; ++a) {
    if (node.edges[a].visits == 0) return a;
  }
  const double log_n = std::log(static_cast<double>(node.visits));
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < kActionCount; ++a) {
    const UctEdge& e = node.edges[a];
    const double score = e.mean + c * std::sqrt(log_n / static_cast<double>(e.visits));
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

}  // namespace detail

/// UCT with one node expansion per simulation. New nodes (or nodes at
/// `max_depth`) are valued with the noisy baseline leaf estimate; backups
/// keep running means. No tree reuse across calls.
template <class Rng>
SearchResult mcts_uct_search(const GridWorld& world, State root, std::size_t total_samples,
                             int max_depth, double exploration_c, const ValueTable& baseline,
                             Rng& rng, std::optional<SummaryOptions> summary = std::nullopt) {
  if (total_samples < 1) throw std::invalid_argument("mcts_uct_search: need >= 1 sample");
  if (max_depth < 1) throw std::invalid_argument("mcts_uct_search: max_depth must be >= 1");
  if (!(exploration_c >= 0.0)) throw std::invalid_argument("mcts_uct_search: c must be >= 0");
  if (world.is_terminal(root)) throw std::logic_error("mcts_uct_search: terminal root");
  const double gamma = world.discount();

  std::vector<detail::UctNode> nodes;
  nodes.reserve(total_samples + 1);
  nodes.push_back({});
  nodes[0].state = root;

  struct PathStep {
    std::size_t node;
    std::size_t action;
    double reward;
  };
  std::vector<PathStep> path;
  path.reserve(static_cast<std::size_t>(max_depth));

  SearchResult result;
  result.trajectories.resize(kActionCount);

  for (std::size_t sim = 0; sim < total_samples; ++sim) {
    path.clear();
    std::size_t node = 0;
    int depth = 0;
    double leaf = 0.0;
    bool terminal = false;
    while (true) {
      if (depth >= max_depth) {
        leaf = noisy_leaf_estimate(baseline, nodes[node].state, rng);
        break;
      }
      const std::size_t a = detail::uct_select(nodes[node], exploration_c);
      const StepOutcome out = gridworld_step(world, nodes[node].state, kAllActions[a], rng);
      path.push_back({node, a, out.reward});
      ++depth;
      if (out.terminal) {
        terminal = true;
        break;
      }
      auto& children = nodes[node].edges[a].children;
      auto it = std::find_if(children.begin(), children.end(),
                             [&](const auto& c) { return c.first == out.next_state; });
      if (it == children.end()) {
        const std::size_t idx = nodes.size();
        nodes.push_back({});
        nodes[idx].state = out.next_state;
        nodes[node].edges[a].children.emplace_back(out.next_state, idx);
        leaf = noisy_leaf_estimate(baseline, out.next_state, rng);
        break;
      }
      node = it->second;
    }

    double g = leaf;
    for (auto step = path.rbegin(); step != path.rend(); ++step) {
      g = step->reward + gamma * g;
      detail::UctNode& n = nodes[step->node];
      detail::UctEdge& e = n.edges[step->action];
      ++n.visits;
      ++e.visits;
      e.mean += (g - e.mean) / static_cast<double>(e.visits);
    }
    const std::size_t root_action = path.front().action;
    result.trajectories[root_action].push_back(
        {root_action, g, depth, leaf, terminal, std::pow(gamma, depth)});
  }
  detail::finalize(result, summary.value_or(gridworld_summary_options(world)));
  return result;
}

}  // namespace mcbounds
