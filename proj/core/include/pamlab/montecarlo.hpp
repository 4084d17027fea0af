#pragma once

// Monte Carlo estimators for exponential path functionals:
// log E[exp(c S) prod_j u0(B_j(t))] with S the pairwise functional of a
// replica ensemble.  Every estimate is log-domain with a max-shift, carries
// a delta-method standard error, and is reproducible: sample m uses the
// ensemble seed substream(seed, m), so results do not depend on the worker
// count.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pamlab/kernels.hpp"
#include "pamlab/paths.hpp"

namespace pamlab {

struct InitialCondition {
  std::function<double(const std::vector<double>&)> f;
  bool is_one = false;
  static InitialCondition one();
  static InitialCondition constant(double c);  // c > 0
};

struct MomentEstimate {
  double log_value = 0.0;
  double stderr_ = 0.0;        // standard error of log_value
  double ess = 0.0;            // sum of normalized weights, max weight = 1
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double mean_exponent = 0.0;  // Jensen lower bound on log_value
  double max_weight_share = 0.0;
  bool ess_warning = false;    // ess fell below 1% of n_samples
};

struct ExpMomentConfig {
  std::size_t n_replicas;      // paths per sample
  int dim;
  TimeGrid grid;
  std::size_t n_samples;       // >= 100
  std::uint64_t seed;
  int workers = 1;
  std::optional<SingularPolicy> policy{};
  InitialCondition u0 = InitialCondition::one();
  std::vector<double> start{};  // empty means the origin
};

// log E[exp(S/2) prod_j u0(B_j(t))].
MomentEstimate exp_moment(const StationaryKernel& kernel,
                          const ExpMomentConfig& cfg);

// Same, for the covariance log_+(T/|x-y|) + g; the policy mollifies only
// the log part, g must be symmetric and bounded.
MomentEstimate exp_moment(const CovarianceKernel& cov,
                          const ExpMomentConfig& cfg);

// log E[exp(S / (2 m t))], the flat-normalized weight used by the growth
// comparisons (m = n_replicas, t = horizon); u0 is ignored.
MomentEstimate normalized_exp_moment(const StationaryKernel& kernel,
                                     const ExpMomentConfig& cfg);

// Two-horizon factorization test: with W(tau) = S_tau / tau,
//   log E exp W(t1 + t2)  <=  log E exp W(t1) + log E exp W(t2)
// up to Monte Carlo error.  The three estimates use independent seed
// substreams 1, 2, 3.
struct SubmultConfig {
  std::size_t m_paths;
  int dim;
  double t1;
  double t2;
  std::size_t n_samples;
  std::uint64_t seed;
  std::size_t steps_per_unit = 64;
  int workers = 1;
  std::optional<SingularPolicy> policy{};
};

struct SubmultReport {
  MomentEstimate joint, left, right;
  double lhs = 0.0, rhs = 0.0;
  double lhs_stderr = 0.0, rhs_stderr = 0.0;
  bool pass = false;
};

SubmultReport submult_check(const StationaryKernel& kernel,
                            const SubmultConfig& cfg);

// Block-iteration test: log E exp(S_{nt} / n) <= n log E exp(S_t).
struct IteratedConfig {
  std::size_t m_paths;
  int dim;
  double t;
  std::size_t n_blocks;
  std::size_t n_samples;
  std::uint64_t seed;
  std::size_t steps_per_unit = 64;
  int workers = 1;
  std::optional<SingularPolicy> policy{};
};

struct IteratedReport {
  MomentEstimate joint, single_block;
  double lhs = 0.0, rhs = 0.0;
  double lhs_stderr = 0.0, rhs_stderr = 0.0;
  bool pass = false;
};

IteratedReport iterated_check(const StationaryKernel& kernel,
                              const IteratedConfig& cfg);

// Smoothing comparison on shared ensembles: with the flat-normalized weight
// W_eps = S(gamma_eps) / (2 m t), estimates must grow as eps shrinks.  Rows
// are ordered by decreasing eps; for bounded kernels a final eps = 0 row is
// the unsmoothed reference.  Cosine-atom kernels satisfy the ordering
// sample by sample (spectral damping shrinks every term); radial kernels
// are compared through paired differences.
struct MollifyOrderConfig {
  std::size_t m_paths;
  int dim;
  TimeGrid grid;
  std::vector<double> eps_list;
  std::size_t n_samples;
  std::uint64_t seed;
  int workers = 1;
};

struct MollifyOrderRow {
  double eps = 0.0;
  MomentEstimate estimate;
  double diff_from_prev = 0.0;   // this row minus the previous (larger-eps) row
  double diff_stderr = 0.0;
  bool pathwise = false;         // ordering held for every sample
  bool pass = false;
};

struct MollifyOrderReport {
  std::vector<MollifyOrderRow> rows;
  bool all_pass = false;
};

MollifyOrderReport mollification_ordering(const StationaryKernel& kernel,
                                          const MollifyOrderConfig& cfg);

// Growth-rate table: for each replica count N, the plain-horizon moment
// estimate normalized by N lambda_N, against the limit t^2/2.  Failures
// (unsolvable rates, degenerate weights) are recorded in the status column
// instead of aborting the sweep.
struct TheoremRow {
  std::size_t N = 0;
  double lambda = 0.0;
  double log_moment = 0.0;
  double stderr_ = 0.0;
  double normalized = 0.0;  // log_moment / (N lambda)
  double target = 0.0;      // t^2 / 2
  double gap = 0.0;
  double ess = 0.0;
  double max_weight_share = 0.0;
  std::string status = "ok";
};

struct TheoremTableConfig {
  std::vector<std::size_t> Ns;
  int dim;
  double t;
  std::size_t n_steps;
  std::size_t n_samples;
  std::uint64_t seed;
  int workers = 1;
  std::optional<SingularPolicy> policy{};
};

std::vector<TheoremRow> theorem_table(const StationaryKernel& kernel,
                                      const TheoremTableConfig& cfg);

}  // namespace pamlab
