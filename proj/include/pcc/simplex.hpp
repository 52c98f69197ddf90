#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "pcc/errors.hpp"

// Nelder-Mead simplex minimizer. Derivative free and fully deterministic:
// vertex ordering breaks value ties lexicographically on coordinates, so a
// given start always walks the same path.

namespace pcc {

struct SimplexOptions {
  std::vector<double> scale;    ///< per-coordinate scale for the stop test
  double diameter_tol = 1e-10;  ///< stop when the scaled diameter drops below this
  int max_iterations = 20000;
  double initial_step = 0.1;    ///< first simplex edge, in scale units
};

struct SimplexResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline bool vertex_less(double fa, const std::vector<double>& xa, double fb,
                        const std::vector<double>& xb) {
  if (fa != fb) return fa < fb;
  return std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(), xb.end());
}

}  // namespace detail

template <typename F>
SimplexResult nelder_mead(F&& f, const std::vector<double>& x0, const SimplexOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0) throw Error("nelder_mead needs at least one dimension");
  if (opt.scale.size() != n) throw Error("scale dimension mismatch");

  std::vector<std::vector<double>> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += opt.initial_step * opt.scale[i];
  for (std::size_t i = 0; i <= n; ++i) fs[i] = f(xs[i]);

  std::vector<std::size_t> idx(n + 1);
  auto reorder = [&] {
    for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return detail::vertex_less(fs[a], xs[a], fs[b], xs[b]);
    });
  };

  auto scaled_diameter = [&] {
    double d = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double lo = xs[0][c], hi = xs[0][c];
      for (std::size_t i = 1; i <= n; ++i) {
        lo = std::min(lo, xs[i][c]);
        hi = std::max(hi, xs[i][c]);
      }
      d = std::max(d, (hi - lo) / opt.scale[c]);
    }
    return d;
  };

  SimplexResult result;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    reorder();
    if (scaled_diameter() < opt.diameter_tol) {
      result.converged = true;
      break;
    }
    const std::size_t best = idx[0], worst = idx[n], second_worst = idx[n - 1];

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t c = 0; c < n; ++c) centroid[c] += xs[i][c];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double coeff) {
      std::vector<double> x(n);
      for (std::size_t c = 0; c < n; ++c)
        x[c] = centroid[c] + coeff * (xs[worst][c] - centroid[c]);
      return x;
    };

    const std::vector<double> reflected = blend(-1.0);
    const double f_reflected = f(reflected);

    if (detail::vertex_less(f_reflected, reflected, fs[best], xs[best])) {
      const std::vector<double> expanded = blend(-2.0);
      const double f_expanded = f(expanded);
      if (detail::vertex_less(f_expanded, expanded, f_reflected, reflected)) {
        xs[worst] = expanded;
        fs[worst] = f_expanded;
      } else {
        xs[worst] = reflected;
        fs[worst] = f_reflected;
      }
      continue;
    }
    if (detail::vertex_less(f_reflected, reflected, fs[second_worst], xs[second_worst])) {
      xs[worst] = reflected;
      fs[worst] = f_reflected;
      continue;
    }

    const bool outside = detail::vertex_less(f_reflected, reflected, fs[worst], xs[worst]);
    const std::vector<double> contracted = blend(outside ? -0.5 : 0.5);
    const double f_contracted = f(contracted);
    const bool accept = outside
                            ? detail::vertex_less(f_contracted, contracted, f_reflected, reflected)
                            : detail::vertex_less(f_contracted, contracted, fs[worst], xs[worst]);
    if (accept) {
      xs[worst] = contracted;
      fs[worst] = f_contracted;
      continue;
    }

    // shrink toward the best vertex
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t c = 0; c < n; ++c) xs[i][c] = xs[best][c] + 0.5 * (xs[i][c] - xs[best][c]);
      fs[i] = f(xs[i]);
    }
  }

  reorder();
  result.x = xs[idx[0]];
  result.value = fs[idx[0]];
  result.iterations = it;
  return result;
}

}  // namespace pcc
