#pragma once

// Streaming sample statistics and the two CDFs every bound is built from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mcbounds {

/// Single-pass (Welford) summary of a stream of reals.
///
/// A default-constructed value is the empty summary; all accessors other than
/// `count()` require at least one accumulated sample.
class SampleStats {
 public:
  SampleStats() = default;

  std::size_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  double mean() const noexcept { return mean_; }
  double min_value() const noexcept { return min_; }
  double max_value() const noexcept { return max_; }
  double range() const noexcept { return count_ == 0 ? 0.0 : max_ - min_; }

  /// Sample variance with a 1/n denominator.
  double variance_vn() const noexcept {
    return count_ == 0 ? 0.0 : std::max(0.0, m2_ / static_cast<double>(count_));
  }

  /// Unbiased sample variance, 1/(n-1) denominator. Zero for n < 2.
  double unbiased_variance() const noexcept {
    return count_ < 2 ? 0.0 : std::max(0.0, m2_ / static_cast<double>(count_ - 1));
  }

  friend SampleStats accumulate(SampleStats stats, double x) noexcept;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
};

inline SampleStats accumulate(SampleStats stats, double x) noexcept {
  ++stats.count_;
  const double delta = x - stats.mean_;
  stats.mean_ += delta / static_cast<double>(stats.count_);
  stats.m2_ += delta * (x - stats.mean_);
  stats.min_ = std::min(stats.min_, x);
  stats.max_ = std::max(stats.max_, x);
  // Keep the mean inside the observed span despite rounding.
  stats.mean_ = std::clamp(stats.mean_, stats.min_, stats.max_);
  return stats;
}

template <class Range>
SampleStats summarize(const Range& values) noexcept {
  SampleStats stats;
  for (double x : values) stats = accumulate(stats, x);
  return stats;
}

/// Gaussian CDF with the given mean and variance.
inline double normal_cdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw std::domain_error("normal_cdf: variance must be > 0");
  const double z = (x - mean) / std::sqrt(2.0 * variance);
  return std::clamp(0.5 * std::erfc(-z), 0.0, 1.0);
}

inline double normal_cdf(double x) { return normal_cdf(x, 0.0, 1.0); }

namespace detail {

// Modified Lentz evaluation of the incomplete beta continued fraction.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 20000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double md = m;
    const double m2 = 2.0 * md;
    double aa = md * (b - md) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + md) * (qab + md) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("beta_continued_fraction: no convergence");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b). `one_minus_x` must equal 1 - x; it is
/// passed separately so callers can supply it without cancellation.
inline double regularized_incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_continued_fraction(b, a, one_minus_x) / b;
}

inline double regularized_incomplete_beta(double a, double b, double x) {
  return regularized_incomplete_beta(a, b, x, 1.0 - x);
}

/// Student t CDF; `dof` may be fractional.
inline double student_t_cdf(double x, double dof) {
  if (!(dof > 0.0)) throw std::domain_error("student_t_cdf: dof must be > 0");
  if (std::isnan(x)) return x;
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  if (x == 0.0) return 0.5;
  const double t2 = x * x;
  const double denom = dof + t2;
  // Tail mass P(|T| > |x|) = I_{dof/(dof+x^2)}(dof/2, 1/2).
  const double tail = regularized_incomplete_beta(0.5 * dof, 0.5, dof / denom, t2 / denom);
  const double half_tail = 0.5 * tail;
  return std::clamp(x > 0 ? 1.0 - half_tail : half_tail, 0.0, 1.0);
}

}  // namespace mcbounds
