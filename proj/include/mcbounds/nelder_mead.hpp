#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace mcbounds {

struct ScalarMinimum {
  double x;
  double value;
  int evaluations;
};

struct NelderMeadOptions {
  double initial_step = 0.5;
  double x_tolerance = 1e-10;
  double f_tolerance = 1e-14;
  int max_evaluations = 400;
  // Standard reflection / expansion / contraction / shrink coefficients.
  double reflect = 1.0;
  double expand = 2.0;
  double contract = 0.5;
  double shrink = 0.5;
};

/// One-dimensional Nelder-Mead simplex minimization of `f` starting at `x0`.
template <class F>
ScalarMinimum nelder_mead_1d(F&& f, double x0, const NelderMeadOptions& opt = {}) {
  std::array<double, 2> x{x0, x0 + opt.initial_step};
  std::array<double, 2> fx{f(x[0]), f(x[1])};
  int evals = 2;

  auto order = [&] {
    if (fx[1] < fx[0]) {
      std::swap(x[0], x[1]);
      std::swap(fx[0], fx[1]);
    }
  };

  while (evals < opt.max_evaluations) {
    order();
    if (std::fabs(x[1] - x[0]) < opt.x_tolerance) break;
    if (std::fabs(fx[1] - fx[0]) < opt.f_tolerance && std::fabs(x[1] - x[0]) < 1e-6) break;

    // With two vertices the centroid of the best face is the best vertex.
    const double centroid = x[0];
    const double xr = centroid + opt.reflect * (centroid - x[1]);
    const double fr = f(xr);
    ++evals;

    if (fr < fx[0]) {
      const double xe = centroid + opt.expand * (xr - centroid);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        x[1] = xe;
        fx[1] = fe;
      } else {
        x[1] = xr;
        fx[1] = fr;
      }
      continue;
    }
    // fr >= best; with one non-best vertex, reflection only helps if it beats worst.
    if (fr < fx[1]) {
      const double xc = centroid + opt.contract * (xr - centroid);
      const double fc = f(xc);
      ++evals;
      if (fc <= fr) {
        x[1] = xc;
        fx[1] = fc;
      } else {
        x[1] = xr;
        fx[1] = fr;
      }
      continue;
    }
    const double xc = centroid + opt.contract * (x[1] - centroid);
    const double fc = f(xc);
    ++evals;
    if (fc < fx[1]) {
      x[1] = xc;
      fx[1] = fc;
      continue;
    }
    x[1] = x[0] + opt.shrink * (x[1] - x[0]);
    fx[1] = f(x[1]);
    ++evals;
  }
  order();
  return {x[0], fx[0], evals};
}

}  // namespace mcbounds
