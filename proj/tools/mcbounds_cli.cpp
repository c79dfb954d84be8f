// mcbounds: episode sweeps for Monte Carlo search error bounds.
//
//   mcbounds bandit --episodes 1000 --samples 10,20,50 --out bandit.csv
//   mcbounds gridworld-mc --depth 10 --config grid.cfg --out grid.csv
//   mcbounds gridworld-mcts --depth 25 --uct-c 1.0 --alpha opt
//
// Settings are layered: built-in defaults, then --config, then flags.
// Exit codes: 0 success, 2 invalid configuration, 1 runtime failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mcbounds/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;

struct FlagValues {
  std::string config_path;
  std::size_t episodes = 0;
  std::string samples;
  double epsilon = 0.0;
  int depth = 0;
  double tau = 0.0;
  double uct_c = 0.0;
  std::uint64_t seed = 0;
  std::string alpha;
  std::string welch;
  std::string out;
  std::string keep_episodes;
  unsigned threads = 0;
  double bandit_variance = 0.0;
  double explore_epsilon = 0.0;
};

void add_flags(CLI::App& sub, FlagValues& f) {
  sub.add_option("--config", f.config_path, "key = value configuration file");
  sub.add_option("--episodes", f.episodes, "number of episodes");
  sub.add_option("--samples", f.samples, "comma-separated total sample counts");
  sub.add_option("--epsilon", f.epsilon, "error margin");
  sub.add_option("--depth", f.depth, "rollout depth (mc) or max tree depth (mcts)");
  sub.add_option("--tau", f.tau, "softmax temperature");
  sub.add_option("--uct-c", f.uct_c, "UCT exploration constant");
  sub.add_option("--seed", f.seed, "master seed");
  sub.add_option("--alpha", f.alpha, "fixed significance in (0,1), or 'opt'");
  sub.add_option("--welch", f.welch, "degrees of freedom form: satterthwaite | printed");
  sub.add_option("--out", f.out, "rate curve CSV path (stdout if omitted)");
  sub.add_option("--keep-episodes", f.keep_episodes, "per-episode record CSV path");
  sub.add_option("--threads", f.threads, "worker threads (0 = hardware)");
  sub.add_option("--bandit-variance", f.bandit_variance, "bandit payout variance");
  sub.add_option("--explore-epsilon", f.explore_epsilon, "baseline exploration rate");
}

mcbounds::ExperimentConfig build_config(const CLI::App& sub, mcbounds::Problem problem,
                                        const FlagValues& f) {
  using namespace mcbounds;
  ExperimentConfig cfg;
  cfg.problem = problem;
  if (!f.config_path.empty()) {
    apply_config(cfg, KeyValueConfig::load(f.config_path));
    cfg.problem = problem;
  }
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--episodes")) cfg.episode_count = f.episodes;
  if (given("--samples")) cfg.sample_counts = parse_sample_counts(f.samples);
  if (given("--epsilon")) cfg.epsilon_margin = f.epsilon;
  if (given("--depth")) cfg.depth = f.depth;
  if (given("--tau")) cfg.tau = f.tau;
  if (given("--uct-c")) cfg.uct_c = f.uct_c;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--alpha")) cfg.fixed_alpha = parse_alpha(f.alpha);
  if (given("--welch")) {
    KeyValueConfig kv;
    kv.set("welch", f.welch);
    apply_config(cfg, kv);
  }
  if (given("--out")) cfg.out_path = f.out;
  if (given("--keep-episodes")) cfg.keep_episodes_path = f.keep_episodes;
  if (given("--threads")) cfg.threads = f.threads;
  if (given("--bandit-variance")) cfg.bandit_variance = f.bandit_variance;
  if (given("--explore-epsilon")) cfg.explore_epsilon = f.explore_epsilon;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical error bounds for Monte Carlo search"};
  app.require_subcommand(1);

  FlagValues flags;
  struct Entry {
    const char* name;
    mcbounds::Problem problem;
    const char* help;
  };
  const Entry entries[] = {
      {"bandit", mcbounds::Problem::kBandit, "10-arm Gaussian bandit, softmax MC solver"},
      {"gridworld-mc", mcbounds::Problem::kGridworldMc, "gridworld, softmax MC with baseline rollouts"},
      {"gridworld-mcts", mcbounds::Problem::kGridworldMcts, "gridworld, UCT tree search"},
  };
  std::vector<std::pair<CLI::App*, mcbounds::Problem>> subs;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_flags(*sub, flags);
    subs.emplace_back(sub, e.problem);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  mcbounds::ExperimentConfig cfg;
  try {
    for (auto& [sub, problem] : subs) {
      if (sub->parsed()) cfg = build_config(*sub, problem, flags);
    }
  } catch (const mcbounds::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const mcbounds::ExperimentOutput result = mcbounds::run_experiment(cfg);
    if (cfg.out_path.empty()) {
      mcbounds::write_csv(result.curve, std::cout);
    } else {
      mcbounds::emit_csv(result.curve, cfg.out_path);
    }
    if (!cfg.keep_episodes_path.empty()) {
      mcbounds::emit_episodes_csv(result.episodes, cfg.keep_episodes_path);
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "%s: %zu episodes x %zu sample counts in %.2fs\n",
                 mcbounds::to_string(cfg.problem), cfg.episode_count, cfg.sample_counts.size(),
                 secs);
  } catch (const mcbounds::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
