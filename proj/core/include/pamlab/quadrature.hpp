#pragma once

// Adaptive quadrature wrappers with a deterministic evaluation budget.
// Backed by GSL QAGS/QAGIU; failures surface as QuadratureError instead of
// aborting the process.

#include <cstddef>
#include <functional>

namespace pamlab::quad {

struct Options {
  double epsabs = 0.0;
  double epsrel = 1e-8;           // matches the mollification contract
  std::size_t max_evals = 1'000'000;
  std::size_t limit = 2000;       // adaptive subinterval cap
};

struct Result {
  double value = 0.0;
  double abserr = 0.0;
  std::size_t evals = 0;
};

using Fn = std::function<double(double)>;

// Integrate f over [a, b]; integrable endpoint singularities are fine.
Result integrate(const Fn& f, double a, double b, const Options& opt = {});

// Integrate f over [a, +inf).
Result integrate_to_inf(const Fn& f, double a, const Options& opt = {});

// 1-D maximization of a unimodal function on [a, b] by golden-section search.
struct MaxResult {
  double argmax = 0.0;
  double value = 0.0;
};
MaxResult golden_max(const Fn& f, double a, double b, double xtol = 1e-13);

}  // namespace pamlab::quad
