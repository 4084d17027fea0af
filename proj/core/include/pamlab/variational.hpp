#pragma once

// Discrete variational principle on a periodic grid: maximize
//
//   J(g) = 1/2 [ Q(g) - D(g) ],   Q = h^{2d} sum_u q_u (K conv q)_u,
//                                 D = (h^{d-2}/4) sum_axis sum_u (g_{u+e} - g_{u-e})^2
//
// over g >= 0 with h^d sum g^2 = 1, where q = g^2 and K holds min-image
// samples of the kernel (cell averages around the origin for singular
// kernels, so the quartic term stays finite).  The circular convolution
// runs through FFTW; the ascent is projected gradient with backtracking
// line search, restarted from a constant profile and Gaussian bumps of
// shrinking width.

#include <cstddef>
#include <memory>
#include <vector>

#include "pamlab/errors.hpp"
#include "pamlab/kernels.hpp"

namespace pamlab {

struct GridSpec {
  GridSpec(int dim, std::size_t n, double h);  // dim in {1,2}, n a power of
                                               // two >= 16, 0 < h < 1
  int dim;
  std::size_t n;  // points per axis
  double h;       // grid spacing
  double length() const { return h * static_cast<double>(n); }
  std::size_t size() const { return dim == 1 ? n : n * n; }
};

struct MaximizeOptions {
  double tol = 1e-9;            // relative energy gain over the stall window
  std::size_t max_iters = 20000;
  std::size_t stall_window = 25;
  std::size_t n_restarts = 4;
  double init_step = 0.1;
};

struct VariationalResult {
  double energy = 0.0;     // J at the returned profile
  double quartic = 0.0;    // Q
  double dirichlet = 0.0;  // D
  std::size_t iterations = 0;
  std::size_t restart_index = 0;
  bool converged = false;
  std::vector<double> g;
};

// Thrown when no restart reaches the stall criterion; carries the best
// profile seen so the caller can still inspect it.
class NotConverged : public NumericalError {
 public:
  NotConverged(const std::string& what, VariationalResult best)
      : NumericalError(what), best_(std::move(best)) {}
  const VariationalResult& best() const { return best_; }

 private:
  VariationalResult best_;
};

class VariationalProblem {
 public:
  VariationalProblem(const StationaryKernel& kernel, const GridSpec& grid);
  ~VariationalProblem();
  VariationalProblem(const VariationalProblem&) = delete;
  VariationalProblem& operator=(const VariationalProblem&) = delete;

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& kernel_samples() const { return K_; }

  // Objective pieces at an arbitrary profile (no normalization applied).
  // Evaluation reuses per-instance FFT buffers, so a single instance must
  // not be shared across threads.
  double energy(const std::vector<double>& g) const;
  double quartic(const std::vector<double>& g) const;
  double dirichlet(const std::vector<double>& g) const;
  std::vector<double> gradient(const std::vector<double>& g) const;

  // Q recomputed from spectral data: an exact finite sum for cosine-atom
  // kernels, a Riemann sum over the reciprocal lattice for kernels with an
  // analytic radial density.  ConfigError when neither exists.
  double quartic_spectral(const std::vector<double>& g) const;

  VariationalResult maximize(const MaximizeOptions& opts = {}) const;

 private:
  void build_kernel_samples(const StationaryKernel& kernel);
  void convolve(const std::vector<double>& q) const;  // fills conv_

  StationaryKernel kernel_;
  GridSpec grid_;
  std::vector<double> K_;
  struct Fft;
  std::unique_ptr<Fft> fft_;
  mutable std::vector<double> conv_;
};

// Feasibility envelope for the maximized energy: the constant profile gives
// a lower bound, half the sup of the (bounded) kernel an upper bound, and a
// mollified family must have energies nondecreasing as eps shrinks.  With
// an empty eps list the base kernel must be bounded and only its own bounds
// are checked; a singular base requires a nonempty eps list and is checked
// through its mollifications.
struct EnvelopeRow {
  double eps = 0.0;  // 0 marks the unsmoothed base kernel
  double energy = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool bounds_pass = false;
};

struct EnvelopeReport {
  std::vector<EnvelopeRow> rows;  // decreasing eps, base row (if any) last
  bool monotone = false;
  bool all_pass = false;
};

EnvelopeReport envelope_checks(const StationaryKernel& base,
                               const GridSpec& grid,
                               const std::vector<double>& eps_list = {},
                               const MaximizeOptions& opts = {});

}  // namespace pamlab
