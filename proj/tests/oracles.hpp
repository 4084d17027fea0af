#pragma once

// Reference implementations for the test suites, deliberately independent of
// the library numerics: plain bisection instead of Newton polish, composite
// Simpson instead of adaptive quadrature, closed forms where they exist.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

// Root of log(x) = c x on (e, inf), c in (0, 1/e).
inline long double bisect_upper_branch(long double c) {
  long double lo = std::exp(1.0L);
  long double hi = 1e7L;
  for (int i = 0; i < 240; ++i) {
    const long double mid = 0.5L * (lo + hi);
    if (std::log(mid) - c * mid > 0.0L) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5L * (lo + hi);
}

// Composite Simpson over n panels; n must be even.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    acc += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

inline std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

inline double log_mean_exp(const std::vector<double>& w) {
  const double shift = *std::max_element(w.begin(), w.end());
  double acc = 0.0;
  for (double x : w) acc += std::exp(x - shift);
  return shift + std::log(acc / static_cast<double>(w.size()));
}

// Minimal C >= 0 with log(1/r) <= r^-alpha + C for all r > 0.  The interior
// critical point of log(1/r) - r^-alpha sits at r = alpha^(1/alpha), so
// C = max(0, -(1 + log alpha) / alpha).
inline double riesz_domination(double alpha) {
  return std::max(0.0, -(1.0 + std::log(alpha)) / alpha);
}

// E |Z|^-a for standard normal Z and a < 1.
inline double abs_normal_neg_moment(double a) {
  return std::pow(2.0, -0.5 * a) * std::tgamma(0.5 * (1.0 - a)) /
         std::sqrt(std::numbers::pi);
}

}  // namespace oracle
