#pragma once

// Episode sweeps that compare bounds and estimates against observed error
// rates, and the CSV formats that carry the results.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mcbounds/bound_engine.hpp"
#include "mcbounds/environments.hpp"
#include "mcbounds/kv_config.hpp"
#include "mcbounds/mc_solvers.hpp"
#include "mcbounds/stat_core.hpp"

namespace mcbounds {

enum class Problem { kBandit, kGridworldMc, kGridworldMcts };

inline const char* to_string(Problem p) {
  switch (p) {
    case Problem::kBandit: return "bandit";
    case Problem::kGridworldMc: return "gridworld-mc";
    case Problem::kGridworldMcts: return "gridworld-mcts";
  }
  return "?";
}

inline Problem parse_problem(const std::string& s) {
  if (s == "bandit") return Problem::kBandit;
  if (s == "gridworld-mc") return Problem::kGridworldMc;
  if (s == "gridworld-mcts") return Problem::kGridworldMcts;
  throw ConfigError("unknown problem '" + s + "'");
}

inline const std::vector<std::size_t>& default_sample_counts() {
  static const std::vector<std::size_t> counts{10, 20, 50, 100, 200, 500, 1000, 2000};
  return counts;
}

struct ExperimentConfig {
  Problem problem = Problem::kBandit;
  std::size_t episode_count = 1000;
  std::vector<std::size_t> sample_counts = default_sample_counts();
  double epsilon_margin = 0.1;
  std::optional<int> depth;  // default: 10 for gridworld-mc, 25 for gridworld-mcts
  double tau = kDefaultTemperature;
  double uct_c = kDefaultUctExploration;
  std::uint64_t seed = 1;
  std::optional<double> fixed_alpha;  // unset: optimized per bound
  WelchForm welch = WelchForm::kSatterthwaite;

  std::size_t bandit_arms = kDefaultArmCount;
  double bandit_variance = kDefaultPayoutVariance;
  double explore_epsilon = kDefaultExploreEpsilon;
  GridWorld world{};

  unsigned threads = 0;  // 0: hardware concurrency
  std::string out_path;
  std::string keep_episodes_path;

  int resolved_depth() const {
    if (depth) return *depth;
    return problem == Problem::kGridworldMcts ? kDefaultUctMaxDepth : 10;
  }

  void validate() const {
    if (episode_count < 1) throw ConfigError("episodes must be >= 1");
    if (sample_counts.empty()) throw ConfigError("samples: at least one sample count required");
    for (std::size_t n : sample_counts) {
      if (n < 10) throw ConfigError("samples: every sample count must be >= 10");
    }
    if (!(epsilon_margin > 0.0)) throw ConfigError("epsilon must be > 0");
    if (resolved_depth() < 1) throw ConfigError("depth must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(uct_c >= 0.0)) throw ConfigError("uct-c must be >= 0");
    if (fixed_alpha && !(*fixed_alpha > 0.0 && *fixed_alpha < 1.0)) {
      throw ConfigError("alpha must lie in (0, 1) or be 'opt'");
    }
    if (bandit_arms < 2) throw ConfigError("bandit-arms must be >= 2");
    if (!(bandit_variance >= 0.0)) throw ConfigError("bandit-variance must be >= 0");
    if (!(explore_epsilon >= 0.0 && explore_epsilon <= 1.0)) {
      throw ConfigError("explore-epsilon must lie in [0, 1]");
    }
  }
};

inline std::vector<std::size_t> parse_sample_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    const long long v = parse_integer("samples", t);
    if (v < 0) throw ConfigError("samples: negative sample count");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("samples: empty list");
  return out;
}

inline std::optional<double> parse_alpha(const std::string& text) {
  if (text == "opt" || text == "optimized") return std::nullopt;
  return parse_double("alpha", text);
}

/// Applies a key-value file onto `cfg`. Keys match the CLI flag names
/// (underscores are accepted for dashes); gridworld layout keys are read too.
inline void apply_config(ExperimentConfig& cfg, const KeyValueConfig& kv) {
  bool has_world_keys = false;
  for (const auto& [raw_key, value] : kv.entries()) {
    if (is_gridworld_key(raw_key)) {
      has_world_keys = true;
      continue;
    }
    std::string key = raw_key;
    for (char& c : key) if (c == '_') c = '-';
    if (key == "problem") cfg.problem = parse_problem(value);
    else if (key == "episodes") cfg.episode_count = static_cast<std::size_t>(parse_integer(key, value));
    else if (key == "samples") cfg.sample_counts = parse_sample_counts(value);
    else if (key == "epsilon") cfg.epsilon_margin = parse_double(key, value);
    else if (key == "depth") cfg.depth = static_cast<int>(parse_integer(key, value));
    else if (key == "tau") cfg.tau = parse_double(key, value);
    else if (key == "uct-c") cfg.uct_c = parse_double(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    else if (key == "alpha") cfg.fixed_alpha = parse_alpha(value);
    else if (key == "welch") {
      if (value == "satterthwaite") cfg.welch = WelchForm::kSatterthwaite;
      else if (value == "printed") cfg.welch = WelchForm::kPrinted;
      else throw ConfigError("welch must be satterthwaite or printed");
    }
    else if (key == "bandit-arms") cfg.bandit_arms = static_cast<std::size_t>(parse_integer(key, value));
    else if (key == "bandit-variance") cfg.bandit_variance = parse_double(key, value);
    else if (key == "explore-epsilon") cfg.explore_epsilon = parse_double(key, value);
    else if (key == "threads") cfg.threads = static_cast<unsigned>(parse_integer(key, value));
    else if (key == "out") cfg.out_path = value;
    else if (key == "keep-episodes") cfg.keep_episodes_path = value;
    else throw ConfigError("unknown configuration key '" + raw_key + "'");
  }
  if (has_world_keys) cfg.world = gridworld_from_config(kv);
}

// ---------------------------------------------------------------------------
// Results

enum class Metric { kValueError, kActionError };

inline const char* to_string(Metric m) {
  return m == Metric::kValueError ? "value_error" : "action_error";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "value_error") return Metric::kValueError;
  if (s == "action_error") return Metric::kActionError;
  throw std::runtime_error("unknown metric '" + s + "'");
}

struct MetricOutcome {
  double general_bound = 1.0;
  double clt_bound = 1.0;
  double t_estimate = 1.0;
  bool violation = false;
};

/// One (episode, sample count) evaluation.
struct EpisodeRecord {
  std::size_t episode = 0;
  std::size_t n = 0;
  std::size_t best_action = 0;
  std::size_t runner_up = 0;
  bool informative = false;  // both compared actions had >= 2 samples
  MetricOutcome value_error;
  MetricOutcome action_error;
};

struct RateRow {
  std::size_t n = 0;
  Metric metric = Metric::kValueError;
  double general_mean = 0.0;
  double general_se = 0.0;
  double clt_mean = 0.0;
  double clt_se = 0.0;
  double t_mean = 0.0;
  double t_se = 0.0;
  double observed = 0.0;
  double observed_se = 0.0;
  std::size_t episodes = 0;
};

struct RateCurve {
  std::vector<RateRow> rows;
};

struct ExperimentOutput {
  RateCurve curve;
  std::vector<EpisodeRecord> episodes;  // episode-major, then sample-count order
};

/// Per-action ground truth: arm means for the bandit.
inline std::vector<double> true_value_oracle(const GaussianBandit& bandit) {
  return bandit.arm_means;
}

/// Per-action ground truth: value-iteration q-values at `root`.
inline std::vector<double> true_value_oracle(const ValueTable& table, State root) {
  std::vector<double> q;
  q.reserve(kActionCount);
  for (Action a : kAllActions) q.push_back(table.q(root, a));
  return q;
}

namespace detail {

// Independent stream per (seed, episode, purpose).
inline std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t episode,
                                      std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

inline EpisodeRecord evaluate_search(const SearchResult& search, const std::vector<double>& truth,
                                     const ExperimentConfig& cfg) {
  EpisodeRecord rec;
  rec.best_action = search.recommended_action;
  const auto runner = best_sampled_action(search.summaries, rec.best_action);
  rec.runner_up = runner.value_or(rec.best_action);

  const ActionSampleSummary& best = search.summaries[rec.best_action];
  rec.value_error.violation = best.mean - truth[rec.best_action] >= cfg.epsilon_margin;
  rec.action_error.violation =
      runner && truth[*runner] - truth[rec.best_action] >= cfg.epsilon_margin;

  rec.informative = runner && best.n >= 2 && search.summaries[*runner].n >= 2;
  if (rec.informative) {
    ReportOptions opt;
    opt.fixed_alpha = cfg.fixed_alpha;
    opt.welch = cfg.welch;
    const ReportPair rp =
        full_report(search.summaries, rec.best_action, rec.runner_up, cfg.epsilon_margin, opt);
    rec.value_error.general_bound = rp.value_error.general_bound;
    rec.value_error.clt_bound = rp.value_error.clt_bound;
    rec.value_error.t_estimate = rp.value_error.t_estimate;
    rec.action_error.general_bound = rp.action_error.general_bound;
    rec.action_error.clt_bound = rp.action_error.clt_bound;
    rec.action_error.t_estimate = rp.action_error.t_estimate;
  }
  return rec;
}

struct ProblemContext {
  const ExperimentConfig& cfg;
  std::optional<ValueTable> table;  // gridworld only
  std::vector<State> start_states;
};

inline std::vector<EpisodeRecord> run_episode(const ProblemContext& ctx, std::size_t episode) {
  const ExperimentConfig& cfg = ctx.cfg;
  std::mt19937_64 instance_rng = derived_stream(cfg.seed, episode, 0);
  std::vector<EpisodeRecord> out;
  out.reserve(cfg.sample_counts.size());

  if (cfg.problem == Problem::kBandit) {
    const GaussianBandit bandit =
        sample_bandit_episode(instance_rng, cfg.bandit_arms, cfg.bandit_variance);
    const std::vector<double> truth = true_value_oracle(bandit);
    for (std::size_t k = 0; k < cfg.sample_counts.size(); ++k) {
      std::mt19937_64 rng = derived_stream(cfg.seed, episode, k + 1);
      const SearchResult search = simple_mc_search(bandit, cfg.sample_counts[k], cfg.tau, rng);
      EpisodeRecord rec = evaluate_search(search, truth, cfg);
      rec.episode = episode;
      rec.n = cfg.sample_counts[k];
      out.push_back(rec);
    }
    return out;
  }

  const ValueTable& table = *ctx.table;
  std::uniform_int_distribution<std::size_t> pick(0, ctx.start_states.size() - 1);
  const State root = ctx.start_states[pick(instance_rng)];
  const std::vector<double> truth = true_value_oracle(table, root);
  for (std::size_t k = 0; k < cfg.sample_counts.size(); ++k) {
    std::mt19937_64 rng = derived_stream(cfg.seed, episode, k + 1);
    const std::size_t n = cfg.sample_counts[k];
    SearchResult search;
    if (cfg.problem == Problem::kGridworldMc) {
      search = simple_mc_search(cfg.world, root, n, cfg.resolved_depth(),
                                RolloutBaseline{&table, cfg.explore_epsilon}, cfg.tau, rng);
    } else {
      search = mcts_uct_search(cfg.world, root, n, cfg.resolved_depth(), cfg.uct_c, table, rng);
    }
    EpisodeRecord rec = evaluate_search(search, truth, cfg);
    rec.episode = episode;
    rec.n = n;
    out.push_back(rec);
  }
  return out;
}

inline double standard_error(const SampleStats& s) {
  if (s.count() < 2) return 0.0;
  return std::sqrt(s.unbiased_variance() / static_cast<double>(s.count()));
}

}  // namespace detail

/// Aggregates per-episode records into one row per (n, metric), in the order
/// of `sample_counts`. Records are folded in vector order.
inline RateCurve aggregate_episodes(const std::vector<EpisodeRecord>& records,
                                    const std::vector<std::size_t>& sample_counts) {
  RateCurve curve;
  for (std::size_t n : sample_counts) {
    for (Metric m : {Metric::kValueError, Metric::kActionError}) {
      SampleStats general, clt, t, observed;
      for (const EpisodeRecord& r : records) {
        if (r.n != n) continue;
        const MetricOutcome& o = m == Metric::kValueError ? r.value_error : r.action_error;
        general = accumulate(general, o.general_bound);
        clt = accumulate(clt, o.clt_bound);
        t = accumulate(t, o.t_estimate);
        observed = accumulate(observed, o.violation ? 1.0 : 0.0);
      }
      if (observed.empty()) continue;
      RateRow row;
      row.n = n;
      row.metric = m;
      row.general_mean = general.mean();
      row.general_se = detail::standard_error(general);
      row.clt_mean = clt.mean();
      row.clt_se = detail::standard_error(clt);
      row.t_mean = t.mean();
      row.t_se = detail::standard_error(t);
      std::size_t violations = 0;
      for (const EpisodeRecord& r : records) {
        if (r.n != n) continue;
        violations += (m == Metric::kValueError ? r.value_error : r.action_error).violation;
      }
      row.episodes = observed.count();
      row.observed = static_cast<double>(violations) / static_cast<double>(row.episodes);
      row.observed_se = detail::standard_error(observed);
      curve.rows.push_back(row);
    }
  }
  return curve;
}

/// Runs the configured sweep. Episodes run in parallel; results do not depend
/// on scheduling.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::ProblemContext ctx{cfg, std::nullopt, {}};
  if (cfg.problem != Problem::kBandit) {
    ctx.table = value_iteration(cfg.world, kDefaultBellmanTolerance);
    ctx.start_states = cfg.world.non_terminal_states();
    if (ctx.start_states.empty()) throw ConfigError("gridworld has no non-terminal start cell");
  }

  std::vector<std::vector<EpisodeRecord>> per_episode(cfg.episode_count);
  unsigned workers = cfg.threads != 0 ? cfg.threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cfg.episode_count)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    while (true) {
      const std::size_t e = next.fetch_add(1);
      if (e >= cfg.episode_count) return;
      try {
        per_episode[e] = detail::run_episode(ctx, e);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.episode_count;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentOutput out;
  out.episodes.reserve(cfg.episode_count * cfg.sample_counts.size());
  for (auto& recs : per_episode) {
    out.episodes.insert(out.episodes.end(), recs.begin(), recs.end());
  }
  out.curve = aggregate_episodes(out.episodes, cfg.sample_counts);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCurveHeader =
    "n,metric,general_mean,general_se,clt_mean,clt_se,t_mean,t_se,observed,observed_se,episodes";

inline std::string format_real(double v, int digits = 9) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline void write_csv(const RateCurve& curve, std::ostream& out) {
  out << kCurveHeader << '\n';
  for (const RateRow& r : curve.rows) {
    out << r.n << ',' << to_string(r.metric) << ',' << format_real(r.general_mean) << ','
        << format_real(r.general_se) << ',' << format_real(r.clt_mean) << ','
        << format_real(r.clt_se) << ',' << format_real(r.t_mean) << ',' << format_real(r.t_se)
        << ',' << format_real(r.observed) << ',' << format_real(r.observed_se) << ','
        << r.episodes << '\n';
  }
}

inline void emit_csv(const RateCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(curve, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

inline RateCurve parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader) {
    throw std::runtime_error("rate curve CSV: unexpected header");
  }
  RateCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 11) throw std::runtime_error("rate curve CSV: expected 11 fields");
    RateRow r;
    r.n = static_cast<std::size_t>(std::stoull(f[0]));
    r.metric = parse_metric(f[1]);
    r.general_mean = std::stod(f[2]);
    r.general_se = std::stod(f[3]);
    r.clt_mean = std::stod(f[4]);
    r.clt_se = std::stod(f[5]);
    r.t_mean = std::stod(f[6]);
    r.t_se = std::stod(f[7]);
    r.observed = std::stod(f[8]);
    r.observed_se = std::stod(f[9]);
    r.episodes = static_cast<std::size_t>(std::stoull(f[10]));
    curve.rows.push_back(r);
  }
  return curve;
}

inline constexpr const char* kEpisodeHeader =
    "episode,n,best,runner_up,informative,metric,general,clt,t,violation";

/// Per-episode records; reals use 17 significant digits so aggregates can be
/// recomputed exactly.
inline void write_episodes_csv(const std::vector<EpisodeRecord>& records, std::ostream& out) {
  out << kEpisodeHeader << '\n';
  for (const EpisodeRecord& r : records) {
    for (Metric m : {Metric::kValueError, Metric::kActionError}) {
      const MetricOutcome& o = m == Metric::kValueError ? r.value_error : r.action_error;
      out << r.episode << ',' << r.n << ',' << r.best_action << ',' << r.runner_up << ','
          << (r.informative ? 1 : 0) << ',' << to_string(m) << ','
          << format_real(o.general_bound, 17) << ',' << format_real(o.clt_bound, 17) << ','
          << format_real(o.t_estimate, 17) << ',' << (o.violation ? 1 : 0) << '\n';
    }
  }
}

inline void emit_episodes_csv(const std::vector<EpisodeRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_episodes_csv(records, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<EpisodeRecord> parse_episodes_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kEpisodeHeader) {
    throw std::runtime_error("episode CSV: unexpected header");
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw std::runtime_error("episode CSV: expected 10 fields");
    const std::size_t episode = std::stoull(f[0]);
    const std::size_t n = std::stoull(f[1]);
    if (out.empty() || out.back().episode != episode || out.back().n != n) {
      EpisodeRecord r;
      r.episode = episode;
      r.n = n;
      r.best_action = std::stoull(f[2]);
      r.runner_up = std::stoull(f[3]);
      r.informative = f[4] == "1";
      out.push_back(r);
    }
    MetricOutcome& o =
        parse_metric(f[5]) == Metric::kValueError ? out.back().value_error : out.back().action_error;
    o.general_bound = std::stod(f[6]);
    o.clt_bound = std::stod(f[7]);
    o.t_estimate = std::stod(f[8]);
    o.violation = f[9] == "1";
  }
  return out;
}

}  // namespace mcbounds
