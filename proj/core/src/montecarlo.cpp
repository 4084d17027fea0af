#include "pamlab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pamlab/errors.hpp"
#include "pamlab/parallel.hpp"
#include "pamlab/rates.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t steps_for(double t, std::size_t steps_per_unit) {
  const double n = std::llround(t * static_cast<double>(steps_per_unit));
  return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

// Envelope for the largest pairwise separation an ensemble will produce;
// overshoots beyond it only cost a direct quadrature per evaluation.
double generous_r_max(const TimeGrid& grid, int dim, std::size_t m_paths,
                      std::size_t n_samples, const std::vector<double>& start) {
  const double draws = static_cast<double>(n_samples) *
                           static_cast<double>(m_paths) *
                           static_cast<double>(grid.n) * dim +
                       2.0;
  const double tail = std::sqrt(2.0 * std::log(draws)) + 6.0;
  double start_norm = 0.0;
  for (double c : start) start_norm += c * c;
  return 2.0 * (std::sqrt(grid.t * dim) * tail + std::sqrt(start_norm)) + 1.0;
}

MomentEstimate summarize(const std::vector<double>& W, std::uint64_t seed) {
  const std::size_t M = W.size();
  double shift = -std::numeric_limits<double>::infinity();
  for (double w : W) shift = std::max(shift, w);
  double sum_w = 0.0;
  double sum_W = 0.0;
  std::vector<double> w(M);
  for (std::size_t i = 0; i < M; ++i) {
    w[i] = std::exp(W[i] - shift);
    sum_w += w[i];
    sum_W += W[i];
  }
  const double mean_w = sum_w / static_cast<double>(M);
  double ss = 0.0;
  for (double v : w) ss += (v - mean_w) * (v - mean_w);
  const double sd = std::sqrt(ss / static_cast<double>(M - 1));

  MomentEstimate est;
  est.log_value = shift + std::log(mean_w);
  est.stderr_ = sd / (std::sqrt(static_cast<double>(M)) * mean_w);
  est.ess = sum_w;  // the largest normalized weight is exactly 1
  est.n_samples = M;
  est.seed = seed;
  est.mean_exponent = sum_W / static_cast<double>(M);
  est.max_weight_share = 1.0 / sum_w;
  if (est.max_weight_share > 0.99) {
    throw DegenerateWeights(
        "a single sample carries " + fmt_g(100.0 * est.max_weight_share) +
            "% of the total weight; the estimator has effectively one sample",
        est.max_weight_share);
  }
  est.ess_warning = est.ess < 0.01 * static_cast<double>(M);
  return est;
}

StationaryKernel effective_kernel(const StationaryKernel& kernel,
                                  const std::optional<SingularPolicy>& policy,
                                  double default_eps) {
  if (policy) return kernel.mollify(policy->mollify_eps.value_or(default_eps));
  if (kernel.singular_at_zero()) {
    throw SingularityError(
        "kernel diverges at zero separation; pass a singular-kernel policy");
  }
  return kernel;
}

void validate_common(const ExpMomentConfig& cfg) {
  if (cfg.n_replicas == 0) throw ConfigError("need at least one replica path");
  if (cfg.dim < 1) throw ConfigError("dimension must be >= 1");
  if (cfg.n_samples < 100) {
    throw ConfigError("moment estimation needs at least 100 samples");
  }
  if (cfg.workers < 1) throw ConfigError("worker count must be >= 1");
  if (!cfg.start.empty() &&
      cfg.start.size() != static_cast<std::size_t>(cfg.dim)) {
    throw ConfigError("start point has wrong dimension");
  }
}

std::vector<double> resolved_start(const ExpMomentConfig& cfg) {
  return cfg.start.empty() ? std::vector<double>(cfg.dim, 0.0) : cfg.start;
}

// W samples coeff * S, plus the terminal initial-condition factor when
// requested.  Sample s draws its ensemble from substream(seed, s).
std::vector<double> sample_weights(const StationaryKernel& effective,
                                   const ExpMomentConfig& cfg, double coeff,
                                   bool apply_u0) {
  const std::vector<double> start = resolved_start(cfg);
  const PairwiseFunctional F(
      effective,
      generous_r_max(cfg.grid, cfg.dim, cfg.n_replicas, cfg.n_samples, start));
  std::vector<double> W(cfg.n_samples);
  parallel_for(cfg.n_samples, cfg.workers, [&](std::size_t s) {
    const BrownianEnsemble e(cfg.n_replicas, cfg.dim, cfg.grid, start,
                             rng::substream(cfg.seed, s).key);
    double w = coeff * F(e);
    if (apply_u0 && !cfg.u0.is_one) {
      std::vector<double> x(cfg.dim);
      for (std::size_t j = 0; j < cfg.n_replicas; ++j) {
        const double* node = e.node(j, cfg.grid.n);
        std::copy(node, node + cfg.dim, x.begin());
        const double v = cfg.u0.f(x);
        if (!(v > 0.0)) {
          throw NumericalError("initial condition must be strictly positive");
        }
        w += std::log(v);
      }
    }
    W[s] = w;
  });
  return W;
}

}  // namespace

InitialCondition InitialCondition::one() {
  InitialCondition ic;
  ic.f = [](const std::vector<double>&) { return 1.0; };
  ic.is_one = true;
  return ic;
}

InitialCondition InitialCondition::constant(double c) {
  if (!(c > 0.0)) throw ConfigError("constant initial condition must be positive");
  InitialCondition ic;
  ic.f = [c](const std::vector<double>&) { return c; };
  return ic;
}

MomentEstimate exp_moment(const StationaryKernel& kernel,
                          const ExpMomentConfig& cfg) {
  validate_common(cfg);
  if (kernel.dim() != cfg.dim) {
    throw ConfigError("kernel and config dimensions differ");
  }
  const StationaryKernel eff =
      effective_kernel(kernel, cfg.policy, cfg.grid.delta());
  return summarize(sample_weights(eff, cfg, 0.5, true), cfg.seed);
}

MomentEstimate exp_moment(const CovarianceKernel& cov,
                          const ExpMomentConfig& cfg) {
  validate_common(cfg);
  if (cov.dim() != cfg.dim) {
    throw ConfigError("covariance and config dimensions differ");
  }
  if (!cfg.policy) {
    throw SingularityError(
        "the log part diverges at zero separation; pass a singular-kernel policy");
  }
  const double eps = cfg.policy->mollify_eps.value_or(cfg.grid.delta());
  const StationaryKernel logpart =
      StationaryKernel::log_plus(cov.T(), cfg.dim).mollify(eps);
  if (cov.g_is_zero()) {
    ExpMomentConfig plain = cfg;
    plain.policy.reset();
    return summarize(sample_weights(logpart, plain, 0.5, true), cfg.seed);
  }

  const std::vector<double> start = resolved_start(cfg);
  const RadialEvaluator table(
      logpart,
      generous_r_max(cfg.grid, cfg.dim, cfg.n_replicas, cfg.n_samples, start));
  const double gamma0 = table(0.0);
  const std::size_t d = static_cast<std::size_t>(cfg.dim);
  const std::size_t n = cfg.grid.n;

  std::vector<double> W(cfg.n_samples);
  parallel_for(cfg.n_samples, cfg.workers, [&](std::size_t s) {
    const BrownianEnsemble e(cfg.n_replicas, cfg.dim, cfg.grid, start,
                             rng::substream(cfg.seed, s).key);
    const double* mids = e.midpoints_flat().data();
    const std::size_t m = cfg.n_replicas;
    std::vector<double> vx(d), vy(d);
    const auto value = [&](const double* p, const double* q) {
      double rsq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dx = p[c] - q[c];
        rsq += dx * dx;
      }
      std::copy(p, p + d, vx.begin());
      std::copy(q, q + d, vy.begin());
      return table(std::sqrt(rsq)) + cov.g_eval(vx, vy);
    };
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double* a = mids + j * n * d;
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(a + i * d, a + i * d + d, vx.begin());
        total += gamma0 + cov.g_eval(vx, vx);
        for (std::size_t ip = i + 1; ip < n; ++ip) {
          total += 2.0 * value(a + i * d, a + ip * d);
        }
      }
      for (std::size_t k = j + 1; k < m; ++k) {
        const double* b = mids + k * n * d;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t ip = 0; ip < n; ++ip) {
            total += 2.0 * value(a + i * d, b + ip * d);
          }
        }
      }
    }
    double w = 0.5 * cfg.grid.delta() * cfg.grid.delta() * total;
    if (!cfg.u0.is_one) {
      std::vector<double> x(d);
      for (std::size_t j = 0; j < m; ++j) {
        const double* node = e.node(j, n);
        std::copy(node, node + d, x.begin());
        const double v = cfg.u0.f(x);
        if (!(v > 0.0)) {
          throw NumericalError("initial condition must be strictly positive");
        }
        w += std::log(v);
      }
    }
    W[s] = w;
  });
  return summarize(W, cfg.seed);
}

MomentEstimate normalized_exp_moment(const StationaryKernel& kernel,
                                     const ExpMomentConfig& cfg) {
  validate_common(cfg);
  if (kernel.dim() != cfg.dim) {
    throw ConfigError("kernel and config dimensions differ");
  }
  const StationaryKernel eff =
      effective_kernel(kernel, cfg.policy, cfg.grid.delta());
  const double coeff =
      1.0 / (2.0 * static_cast<double>(cfg.n_replicas) * cfg.grid.t);
  return summarize(sample_weights(eff, cfg, coeff, false), cfg.seed);
}

SubmultReport submult_check(const StationaryKernel& kernel,
                            const SubmultConfig& cfg) {
  if (!(cfg.t1 > 0.0) || !(cfg.t2 > 0.0)) {
    throw ConfigError("both horizons must be positive");
  }
  if (cfg.steps_per_unit == 0) throw ConfigError("steps_per_unit must be >= 1");
  const TimeGrid joint_grid(cfg.t1 + cfg.t2,
                            steps_for(cfg.t1 + cfg.t2, cfg.steps_per_unit));
  const TimeGrid left_grid(cfg.t1, steps_for(cfg.t1, cfg.steps_per_unit));
  const TimeGrid right_grid(cfg.t2, steps_for(cfg.t2, cfg.steps_per_unit));
  // One smoothing width for all three estimates, defaulting to the joint
  // grid's step, so every factor sees the same kernel.
  const StationaryKernel eff =
      effective_kernel(kernel, cfg.policy, joint_grid.delta());

  const auto run = [&](const TimeGrid& grid, double coeff,
                       std::uint64_t sub) -> MomentEstimate {
    ExpMomentConfig ec{cfg.m_paths, cfg.dim, grid, cfg.n_samples,
                       rng::substream(cfg.seed, sub).key};
    ec.workers = cfg.workers;
    return summarize(sample_weights(eff, ec, coeff, false), ec.seed);
  };

  SubmultReport rep;
  rep.joint = run(joint_grid, 1.0 / (cfg.t1 + cfg.t2), 1);
  rep.left = run(left_grid, 1.0 / cfg.t1, 2);
  rep.right = run(right_grid, 1.0 / cfg.t2, 3);
  rep.lhs = rep.joint.log_value;
  rep.rhs = rep.left.log_value + rep.right.log_value;
  rep.lhs_stderr = rep.joint.stderr_;
  rep.rhs_stderr = rep.left.stderr_ + rep.right.stderr_;
  const double tol =
      std::max(3.0 * (rep.lhs_stderr + rep.rhs_stderr),
               1e-12 * std::max(1.0, std::fabs(rep.rhs)));
  rep.pass = rep.lhs <= rep.rhs + tol;
  return rep;
}

IteratedReport iterated_check(const StationaryKernel& kernel,
                              const IteratedConfig& cfg) {
  if (!(cfg.t > 0.0)) throw ConfigError("block horizon must be positive");
  if (cfg.n_blocks < 1) throw ConfigError("need at least one block");
  if (cfg.steps_per_unit == 0) throw ConfigError("steps_per_unit must be >= 1");
  const double total_t = cfg.t * static_cast<double>(cfg.n_blocks);
  const TimeGrid joint_grid(total_t, steps_for(total_t, cfg.steps_per_unit));
  const TimeGrid block_grid(cfg.t, steps_for(cfg.t, cfg.steps_per_unit));
  const StationaryKernel eff =
      effective_kernel(kernel, cfg.policy, joint_grid.delta());

  const auto run = [&](const TimeGrid& grid, double coeff,
                       std::uint64_t sub) -> MomentEstimate {
    ExpMomentConfig ec{cfg.m_paths, cfg.dim, grid, cfg.n_samples,
                       rng::substream(cfg.seed, sub).key};
    ec.workers = cfg.workers;
    return summarize(sample_weights(eff, ec, coeff, false), ec.seed);
  };

  IteratedReport rep;
  rep.joint = run(joint_grid, 1.0 / static_cast<double>(cfg.n_blocks), 1);
  rep.single_block = run(block_grid, 1.0, 2);
  rep.lhs = rep.joint.log_value;
  rep.rhs = static_cast<double>(cfg.n_blocks) * rep.single_block.log_value;
  rep.lhs_stderr = rep.joint.stderr_;
  rep.rhs_stderr =
      static_cast<double>(cfg.n_blocks) * rep.single_block.stderr_;
  const double tol =
      std::max(3.0 * (rep.lhs_stderr + rep.rhs_stderr),
               1e-12 * std::max(1.0, std::fabs(rep.rhs)));
  rep.pass = rep.lhs <= rep.rhs + tol;
  return rep;
}

MollifyOrderReport mollification_ordering(const StationaryKernel& kernel,
                                          const MollifyOrderConfig& cfg) {
  if (cfg.m_paths == 0) throw ConfigError("need at least one replica path");
  if (cfg.dim < 1) throw ConfigError("dimension must be >= 1");
  if (cfg.n_samples < 100) {
    throw ConfigError("moment estimation needs at least 100 samples");
  }
  if (kernel.dim() != cfg.dim) {
    throw ConfigError("kernel and config dimensions differ");
  }
  if (cfg.eps_list.empty()) {
    throw ConfigError("smoothing comparison needs at least one eps");
  }
  std::vector<double> eps = cfg.eps_list;
  for (double e : eps) {
    if (!(e > 0.0)) throw ConfigError("smoothing widths must be positive");
  }
  std::sort(eps.begin(), eps.end(), std::greater<>());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  if (!kernel.singular_at_zero()) eps.push_back(0.0);  // unsmoothed reference

  const std::size_t M = cfg.n_samples;
  const std::vector<double> start(cfg.dim, 0.0);
  std::vector<BrownianEnsemble> ensembles;
  ensembles.reserve(M);
  for (std::size_t s = 0; s < M; ++s) {
    ensembles.emplace_back(cfg.m_paths, cfg.dim, cfg.grid, start,
                           rng::substream(cfg.seed, s).key);
  }

  const std::size_t n_rows = eps.size();
  std::vector<std::vector<double>> S(n_rows, std::vector<double>(M));
  if (kernel.has_atoms()) {
    // One amplitude pass per ensemble; each smoothing level only reweights
    // the same |A_a|^2, which is what makes the ordering exact pathwise.
    const auto& freqs = kernel.atom_freqs();
    const std::size_t na = freqs.size();
    std::vector<double> powers(M * na);
    parallel_for(M, cfg.workers, [&](std::size_t s) {
      const AtomAmplitudes amp = spectral_amplitudes(ensembles[s], freqs, 1);
      for (std::size_t a = 0; a < na; ++a) {
        powers[s * na + a] = amp.power(a);
      }
    });
    for (std::size_t r = 0; r < n_rows; ++r) {
      const std::vector<double> w =
          (eps[r] > 0.0 ? kernel.mollify(eps[r]) : kernel).atom_weights();
      for (std::size_t s = 0; s < M; ++s) {
        double acc = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
          acc += w[a] * powers[s * na + a];
        }
        S[r][s] = acc;
      }
    }
  } else {
    double r_max = 1.0;
    for (const auto& e : ensembles) {
      r_max = std::max(r_max, e.midpoint_diameter() * 1.0001 + 1e-9);
    }
    for (std::size_t r = 0; r < n_rows; ++r) {
      const StationaryKernel k =
          eps[r] > 0.0 ? kernel.mollify(eps[r]) : kernel;
      const PairwiseFunctional F(k, r_max);
      parallel_for(M, cfg.workers,
                   [&](std::size_t s) { S[r][s] = F(ensembles[s], 1); });
    }
  }

  const double coeff =
      1.0 / (2.0 * static_cast<double>(cfg.m_paths) * cfg.grid.t);
  MollifyOrderReport rep;
  rep.all_pass = true;
  std::vector<double> W_prev;
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::vector<double> W(M);
    for (std::size_t s = 0; s < M; ++s) W[s] = coeff * S[r][s];
    MollifyOrderRow row;
    row.eps = eps[r];
    row.estimate = summarize(W, cfg.seed);
    if (r == 0) {
      row.pass = true;
    } else {
      bool pathwise = true;
      for (std::size_t s = 0; s < M; ++s) {
        const double cur = S[r][s];
        const double prev = S[r - 1][s];
        if (cur < prev - 1e-12 * std::max(std::fabs(prev), 1.0)) {
          pathwise = false;
          break;
        }
      }
      row.pathwise = pathwise;
      row.diff_from_prev =
          row.estimate.log_value - rep.rows[r - 1].estimate.log_value;
      // Paired delta-method error for the difference of two log-mean-exp
      // estimates over shared ensembles.
      double shift_a = -std::numeric_limits<double>::infinity();
      double shift_b = shift_a;
      for (std::size_t s = 0; s < M; ++s) {
        shift_a = std::max(shift_a, W[s]);
        shift_b = std::max(shift_b, W_prev[s]);
      }
      double ma = 0.0, mb = 0.0;
      std::vector<double> a(M), b(M);
      for (std::size_t s = 0; s < M; ++s) {
        a[s] = std::exp(W[s] - shift_a);
        b[s] = std::exp(W_prev[s] - shift_b);
        ma += a[s];
        mb += b[s];
      }
      ma /= static_cast<double>(M);
      mb /= static_cast<double>(M);
      double va = 0.0, vb = 0.0, cab = 0.0;
      for (std::size_t s = 0; s < M; ++s) {
        va += (a[s] - ma) * (a[s] - ma);
        vb += (b[s] - mb) * (b[s] - mb);
        cab += (a[s] - ma) * (b[s] - mb);
      }
      const double denom = static_cast<double>(M - 1) * static_cast<double>(M);
      const double var = va / (denom * ma * ma) + vb / (denom * mb * mb) -
                         2.0 * cab / (denom * ma * mb);
      row.diff_stderr = std::sqrt(std::max(0.0, var));
      row.pass = pathwise ||
                 row.diff_from_prev >=
                     -3.0 * row.diff_stderr -
                         1e-12 * std::max(
                                     1.0, std::fabs(rep.rows[r - 1]
                                                        .estimate.log_value));
    }
    rep.all_pass = rep.all_pass && row.pass;
    rep.rows.push_back(std::move(row));
    W_prev = std::move(W);
  }
  return rep;
}

std::vector<TheoremRow> theorem_table(const StationaryKernel& kernel,
                                      const TheoremTableConfig& cfg) {
  if (cfg.Ns.empty()) throw ConfigError("need at least one replica count");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<TheoremRow> rows;
  rows.reserve(cfg.Ns.size());
  for (std::size_t N : cfg.Ns) {
    TheoremRow row;
    row.N = N;
    row.target = 0.5 * cfg.t * cfg.t;
    try {
      row.lambda = lambda_rate(static_cast<double>(N));
      ExpMomentConfig ec{N, cfg.dim, TimeGrid(cfg.t, cfg.n_steps),
                         cfg.n_samples,
                         rng::substream(cfg.seed, static_cast<std::uint64_t>(N))
                             .key};
      ec.workers = cfg.workers;
      ec.policy = cfg.policy;
      const MomentEstimate est = exp_moment(kernel, ec);
      row.log_moment = est.log_value;
      row.stderr_ = est.stderr_;
      row.ess = est.ess;
      row.max_weight_share = est.max_weight_share;
      row.normalized =
          est.log_value / (static_cast<double>(N) * row.lambda);
      row.gap = row.normalized - row.target;
      if (est.ess_warning) row.status = "low-ess";
    } catch (const SolvabilityError& e) {
      row.lambda = nan;
      row.log_moment = nan;
      row.normalized = nan;
      row.gap = nan;
      row.status = std::string("unsolvable: ") + e.what();
    } catch (const DegenerateWeights& e) {
      row.log_moment = nan;
      row.normalized = nan;
      row.gap = nan;
      row.status = std::string("degenerate-weights: ") + e.what();
    } catch (const NumericalError& e) {
      row.log_moment = nan;
      row.normalized = nan;
      row.gap = nan;
      row.status = std::string("numerical: ") + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pamlab
