#pragma once

// Empirical error-probability bounds and t-based estimates for Monte Carlo
// action-value estimates.
//
// Two error events are covered for a recommended action i:
//   value error   P(Qbar_i - Q_i >= eps)
//   action error  P(Q_j >= Q_i + eps) for a competing action j
// Each has a general (bounded-returns) bound, a CLT bound with a Berry-Esseen
// penalty, and a Student-t estimate without an upper-bound guarantee.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcbounds/nelder_mead.hpp"
#include "mcbounds/stat_core.hpp"

namespace mcbounds {

inline constexpr double kBerryEsseenConstant = 0.4748;
inline constexpr double kMinRange = 1e-9;

class InsufficientSamples : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Per-action sufficient statistics for every bound.
struct ActionSampleSummary {
  std::size_t n = 0;           // trajectory count
  double mean = 0.0;           // value estimate
  double variance_vn = 0.0;    // 1/n sample variance
  double range_b = 1.0;        // boundedness constant
  double zeta = 0.0;           // rollout bias upper bound
  double value_floor = 0.0;
  double value_ceiling = 0.0;

  double unbiased_variance() const noexcept {
    return n < 2 ? 0.0 : variance_vn * static_cast<double>(n) / static_cast<double>(n - 1);
  }

  friend bool operator==(const ActionSampleSummary&, const ActionSampleSummary&) = default;
};

/// Builds a summary from raw statistics. The observed sample range is used for
/// b unless `range_override` is given; b is floored at kMinRange.
inline ActionSampleSummary make_summary(const SampleStats& stats, double zeta,
                                        std::optional<double> range_override = std::nullopt,
                                        std::optional<double> value_floor = std::nullopt,
                                        std::optional<double> value_ceiling = std::nullopt) {
  ActionSampleSummary s;
  s.n = stats.count();
  s.mean = stats.mean();
  s.variance_vn = stats.variance_vn();
  s.range_b = std::max(range_override.value_or(stats.range()), kMinRange);
  s.zeta = std::max(0.0, zeta);
  s.value_floor = value_floor.value_or(stats.empty() ? 0.0 : stats.min_value());
  s.value_ceiling = value_ceiling.value_or(stats.empty() ? 0.0 : stats.max_value());
  return s;
}

struct BoundReport {
  double general_bound = 1.0;
  double clt_bound = 1.0;
  double t_estimate = 1.0;
  double alpha_general = 0.5;
  double alpha_clt = 0.5;
  double epsilon = 0.0;
};

struct ReportPair {
  BoundReport value_error;   // recommended action overestimated by >= eps
  BoundReport action_error;  // runner-up better than recommended by >= eps
};

enum class WelchForm {
  kSatterthwaite,  // classical Welch-Satterthwaite with n-1 denominators
  kPrinted,        // (v_i/n_i + v_j/n_j)^2 / (v_i^2/n_i^2 + v_j^2/n_j^2)
};

namespace detail {

inline void require_samples(const ActionSampleSummary& s) {
  if (s.n < 2) {
    throw InsufficientSamples("bound evaluation needs n >= 2, got n = " + std::to_string(s.n));
  }
}

inline void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("significance alpha must lie in (0, 1)");
  }
}

inline double positive_part(double x) noexcept { return x > 0.0 ? x : 0.0; }

inline double clamp_probability(double p) noexcept {
  if (std::isnan(p)) return 1.0;
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Closed forms with the variance bound supplied directly.

inline double general_value_bound_given_variance(double n, double gap, double variance_bound,
                                                 double alpha) {
  const double g = detail::positive_part(gap);
  if (g == 0.0) return 1.0;
  if (variance_bound <= 0.0) return detail::clamp_probability(alpha);
  return detail::clamp_probability(std::exp(-n * g * g / (2.0 * variance_bound)) + alpha);
}

inline double general_action_bound_given_variance(double n_i, double variance_i, double n_j,
                                                  double variance_j, double gap, double alpha) {
  const double g = detail::positive_part(gap);
  if (g == 0.0) return 1.0;
  const double denom = 2.0 * (n_i * variance_i + n_j * variance_j);
  if (denom <= 0.0) return detail::clamp_probability(alpha);
  return detail::clamp_probability(std::exp(-n_i * n_j * g * g / denom) + alpha);
}

/// 1 - Phi(gap; 0, mean_variance) + alpha + C / sample_count.
inline double clt_bound_given_variance(double gap, double mean_variance, double alpha,
                                       double sample_count) {
  double tail;
  if (mean_variance > 0.0) {
    tail = 1.0 - normal_cdf(gap, 0.0, mean_variance);
  } else {
    tail = gap > 0.0 ? 0.0 : (gap < 0.0 ? 1.0 : 0.5);
  }
  return detail::clamp_probability(tail + alpha + kBerryEsseenConstant / sample_count);
}

// ---------------------------------------------------------------------------
// Summary-level operations.

/// Empirical-Bernstein style upper bound on the return variance:
/// b^2 * (sqrt(V_n)/b + sqrt(-ln(alpha)/(n-1)))^2.
inline double variance_upper_bound(const ActionSampleSummary& s, double alpha) {
  detail::require_samples(s);
  detail::require_alpha(alpha);
  const double b = std::max(s.range_b, kMinRange);
  const double root = std::sqrt(std::max(0.0, s.variance_vn)) / b +
                      std::sqrt(-std::log(alpha) / static_cast<double>(s.n - 1));
  return std::max(b * b * root * root, s.variance_vn);
}

inline double general_value_error_bound(const ActionSampleSummary& s, double epsilon,
                                        double alpha) {
  const double var = variance_upper_bound(s, alpha);
  return general_value_bound_given_variance(static_cast<double>(s.n), epsilon - s.zeta, var,
                                            alpha);
}

/// Action error for j over the recommended i; delta = mean_i - mean_j.
inline double general_action_error_bound(const ActionSampleSummary& si,
                                         const ActionSampleSummary& sj, double epsilon,
                                         double alpha) {
  const double var_i = variance_upper_bound(si, alpha);
  const double var_j = variance_upper_bound(sj, alpha);
  const double gap = (si.mean - sj.mean) + epsilon - si.zeta - sj.zeta;
  return general_action_bound_given_variance(static_cast<double>(si.n), var_i,
                                             static_cast<double>(sj.n), var_j, gap, alpha);
}

inline double clt_value_error_bound(const ActionSampleSummary& s, double epsilon, double alpha) {
  const double var = variance_upper_bound(s, alpha);
  const double n = static_cast<double>(s.n);
  return clt_bound_given_variance(epsilon - s.zeta, var / n, alpha, n);
}

inline double clt_action_error_bound(const ActionSampleSummary& si, const ActionSampleSummary& sj,
                                     double epsilon, double alpha) {
  const double ni = static_cast<double>(si.n);
  const double nj = static_cast<double>(sj.n);
  const double mean_variance =
      variance_upper_bound(si, alpha) / ni + variance_upper_bound(sj, alpha) / nj;
  const double gap = (si.mean - sj.mean) + epsilon - si.zeta - sj.zeta;
  return clt_bound_given_variance(gap, mean_variance, alpha, ni + nj);
}

namespace detail {

// 1 - T(gap / se) with the point-mass convention for se == 0.
inline double t_tail(double gap, double se, double dof) {
  if (!(se > 0.0)) return gap > 0.0 ? 0.0 : (gap < 0.0 ? 1.0 : 0.5);
  return clamp_probability(1.0 - student_t_cdf(gap / se, dof));
}

}  // namespace detail

/// Student-t estimate of the value-error probability; SE = s / sqrt(n).
inline double t_value_error_estimate(const ActionSampleSummary& s, double epsilon) {
  detail::require_samples(s);
  const double se = std::sqrt(s.unbiased_variance() / static_cast<double>(s.n));
  return detail::t_tail(epsilon - s.zeta, se, static_cast<double>(s.n - 1));
}

inline double welch_dof(double v_i, std::size_t n_i, double v_j, std::size_t n_j,
                        WelchForm form = WelchForm::kSatterthwaite) {
  if (n_i < 2 || n_j < 2) throw InsufficientSamples("welch_dof needs n >= 2 in both samples");
  if (v_i < 0.0 || v_j < 0.0) throw std::domain_error("welch_dof: negative variance");
  if (v_i == 0.0 && v_j == 0.0) throw std::domain_error("welch_dof: both variances are zero");
  const double ni = static_cast<double>(n_i);
  const double nj = static_cast<double>(n_j);
  const double ai = v_i / ni;
  const double aj = v_j / nj;
  const double num = (ai + aj) * (ai + aj);
  if (form == WelchForm::kPrinted) return num / (ai * ai + aj * aj);
  return num / (ai * ai / (ni - 1.0) + aj * aj / (nj - 1.0));
}

inline double t_action_error_estimate(const ActionSampleSummary& si,
                                      const ActionSampleSummary& sj, double epsilon,
                                      WelchForm form = WelchForm::kSatterthwaite) {
  detail::require_samples(si);
  detail::require_samples(sj);
  const double vi = si.unbiased_variance();
  const double vj = sj.unbiased_variance();
  const double se =
      std::sqrt(vi / static_cast<double>(si.n) + vj / static_cast<double>(sj.n));
  const double gap = (si.mean - sj.mean) + epsilon - si.zeta - sj.zeta;
  if (!(se > 0.0)) return detail::t_tail(gap, 0.0, 1.0);
  return detail::t_tail(gap, se, welch_dof(vi, si.n, vj, sj.n, form));
}

// ---------------------------------------------------------------------------
// Significance optimization.

struct AlphaOptimum {
  double alpha;
  double value;
};

inline constexpr double kAlphaFloor = 1e-12;
inline constexpr double kFixedAlphaProbe = 0.05;

/// Minimizes bound(alpha) over (0, 1): a log-spaced seed scan followed by
/// Nelder-Mead refinement in logit(alpha).
template <class Bound>
AlphaOptimum optimize_alpha(Bound&& bound) {
  auto alpha_of = [](double u) {
    const double a = 1.0 / (1.0 + std::exp(-u));
    return std::clamp(a, kAlphaFloor, 1.0 - kAlphaFloor);
  };
  AlphaOptimum best{kFixedAlphaProbe, bound(kFixedAlphaProbe)};
  auto consider = [&](double alpha) {
    const double v = bound(alpha);
    if (v < best.value) best = {alpha, v};
    return v;
  };

  constexpr int kSeeds = 48;
  const double lo = std::log(1e-9);
  const double hi = std::log(0.95);
  for (int k = 0; k < kSeeds; ++k) {
    consider(std::exp(lo + (hi - lo) * k / (kSeeds - 1)));
  }

  const double u0 = std::log(best.alpha / (1.0 - best.alpha));
  NelderMeadOptions opt;
  opt.initial_step = 0.4;
  opt.max_evaluations = 200;
  nelder_mead_1d([&](double u) { return consider(alpha_of(u)); }, u0, opt);
  return best;
}

struct ReportOptions {
  std::optional<double> fixed_alpha;  // unset: optimize alpha per bound
  WelchForm welch = WelchForm::kSatterthwaite;
};

namespace detail {

template <class Bound>
AlphaOptimum resolve_alpha(Bound&& bound, const ReportOptions& opt) {
  if (opt.fixed_alpha) return {*opt.fixed_alpha, bound(*opt.fixed_alpha)};
  return optimize_alpha(bound);
}

}  // namespace detail

/// Value-error report for `best` and action-error report for `best` vs
/// `runner_up`.
inline ReportPair full_report(std::span<const ActionSampleSummary> summaries, std::size_t best,
                              std::size_t runner_up, double epsilon,
                              const ReportOptions& opt = {}) {
  if (summaries.size() < 2) throw std::invalid_argument("full_report needs >= 2 actions");
  if (best >= summaries.size() || runner_up >= summaries.size() || best == runner_up) {
    throw std::invalid_argument("full_report: invalid best / runner-up indices");
  }
  if (opt.fixed_alpha) detail::require_alpha(*opt.fixed_alpha);
  const ActionSampleSummary& si = summaries[best];
  const ActionSampleSummary& sj = summaries[runner_up];
  detail::require_samples(si);
  detail::require_samples(sj);

  ReportPair out;
  {
    BoundReport& r = out.value_error;
    r.epsilon = epsilon;
    const auto g = detail::resolve_alpha(
        [&](double a) { return general_value_error_bound(si, epsilon, a); }, opt);
    const auto c = detail::resolve_alpha(
        [&](double a) { return clt_value_error_bound(si, epsilon, a); }, opt);
    r.general_bound = g.value;
    r.alpha_general = g.alpha;
    r.clt_bound = c.value;
    r.alpha_clt = c.alpha;
    r.t_estimate = t_value_error_estimate(si, epsilon);
  }
  {
    BoundReport& r = out.action_error;
    r.epsilon = epsilon;
    const auto g = detail::resolve_alpha(
        [&](double a) { return general_action_error_bound(si, sj, epsilon, a); }, opt);
    const auto c = detail::resolve_alpha(
        [&](double a) { return clt_action_error_bound(si, sj, epsilon, a); }, opt);
    r.general_bound = g.value;
    r.alpha_general = g.alpha;
    r.clt_bound = c.value;
    r.alpha_clt = c.alpha;
    r.t_estimate = t_action_error_estimate(si, sj, epsilon, opt.welch);
  }
  return out;
}

}  // namespace mcbounds
