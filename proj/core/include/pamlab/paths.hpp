#pragma once

// Brownian replica ensembles on a uniform time grid, and the two quadratic
// path functionals built on them:
//
//   pairwise    S = delta^2 sum_{j,k} sum_{i,i'} gamma(B_j(tau_i) - B_k(tau_i'))
//   spectral    S = sum_a w_a | delta sum_j sum_i e^{i xi_a . B_j(tau_i)} |^2
//
// Both use the midpoint times tau_i = (i - 1/2) delta, so for cosine-atom
// kernels they are the same number up to rounding.  Sampling is counter
// based: path j draws from substream(seed, j), node increments first, then
// bridge refinements, so ensembles are reproducible for any worker count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pamlab/kernels.hpp"

namespace pamlab {

struct TimeGrid {
  TimeGrid(double t, std::size_t n_steps);
  double t = 0.0;
  std::size_t n = 0;
  double delta() const { return t / static_cast<double>(n); }
  double node_time(std::size_t i) const {
    return delta() * static_cast<double>(i);
  }
  // Midpoint of step i, for i in 1..n.
  double midpoint_time(std::size_t i) const {
    return delta() * (static_cast<double>(i) - 0.5);
  }
};

class BrownianEnsemble {
 public:
  BrownianEnsemble(std::size_t n_paths, int dim, TimeGrid grid,
                   std::vector<double> start, std::uint64_t seed,
                   int workers = 1);

  std::size_t n_paths() const { return n_paths_; }
  int dim() const { return dim_; }
  const TimeGrid& grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& start() const { return start_; }

  // Node position i in 0..n of path j; pointer to dim() doubles.
  const double* node(std::size_t j, std::size_t i) const {
    return nodes_.data() + (j * (grid_.n + 1) + i) * dim_;
  }
  // Midpoint position of step i in 1..n of path j.
  const double* midpoint(std::size_t j, std::size_t i) const {
    return midpoints_.data() + (j * grid_.n + (i - 1)) * dim_;
  }
  const std::vector<double>& nodes_flat() const { return nodes_; }
  const std::vector<double>& midpoints_flat() const { return midpoints_; }

  // Largest pairwise distance the midpoint cloud can contain (bounding-box
  // diagonal).
  double midpoint_diameter() const;

  // Binary snapshot: seed, path count, dim, step count as little-endian
  // 64-bit integers, horizon t as a 64-bit float, then node positions as
  // 64-bit floats path-major.  Midpoints are regenerated from the seed on
  // load.  Derived ensembles (rescale) have no generating seed and refuse
  // to dump.
  bool dumpable() const { return sampled_; }
  void dump(std::ostream& out) const;
  static BrownianEnsemble load(std::istream& in);

  // Diffusive rescaling: B~(s) = sigma^{-1/2} B(sigma s) on the grid with
  // horizon t/sigma and the same step count, node for node.
  static BrownianEnsemble rescale(const BrownianEnsemble& src, double sigma);

 private:
  BrownianEnsemble() : grid_(1.0, 1) {}
  void generate_midpoints(int workers);

  std::size_t n_paths_ = 0;
  int dim_ = 1;
  TimeGrid grid_;
  std::vector<double> start_;
  std::uint64_t seed_ = 0;
  bool sampled_ = true;
  std::vector<double> nodes_;      // [path][node][component]
  std::vector<double> midpoints_;  // [path][step-1][component]
};

// How to handle a kernel that diverges at zero separation inside the
// pairwise functional: replace it by its mollification.  A missing width
// means "one grid step", eps = delta.
struct SingularPolicy {
  std::optional<double> mollify_eps;
};

// Pairwise functional evaluator with the kernel fixed up front, so the
// radial table (needed for quadrature-backed kernels) is built once and
// shared across many ensembles.  Separations beyond r_max fall back to
// direct kernel evaluation.
class PairwiseFunctional {
 public:
  PairwiseFunctional(const StationaryKernel& kernel, double r_max,
                     std::size_t table_size = 4096);
  double operator()(const BrownianEnsemble& e, int workers = 1) const;
  const StationaryKernel& kernel() const { return kernel_; }

 private:
  enum class Mode { kAtoms, kTable, kDirect };
  StationaryKernel kernel_;
  Mode mode_;
  std::optional<RadialEvaluator> table_;
  std::vector<double> w_;                    // atoms only
  std::vector<std::vector<double>> xi_;      // atoms only
  double gamma0_ = 0.0;
};

// One-shot pairwise functional.  Singular kernels require a policy; bounded
// kernels with a policy are mollified all the same.
double double_time_functional(const BrownianEnsemble& e,
                              const StationaryKernel& kernel,
                              std::optional<SingularPolicy> policy = {},
                              int workers = 1);

// Midpoint-rule amplitudes A_a = delta sum_j sum_i e^{i xi_a . B_j(tau_i)}.
struct AtomAmplitudes {
  std::vector<double> re;
  std::vector<double> im;
  double power(std::size_t a) const { return re[a] * re[a] + im[a] * im[a]; }
};

AtomAmplitudes spectral_amplitudes(const BrownianEnsemble& e,
                                   const std::vector<std::vector<double>>& freqs,
                                   int workers = 1);

// S = sum_a w_a |A_a|^2 for a cosine-atom kernel (weights carry any scale
// and mollification damping).
double spectral_functional(const BrownianEnsemble& e,
                           const StationaryKernel& kernel, int workers = 1);

}  // namespace pamlab
