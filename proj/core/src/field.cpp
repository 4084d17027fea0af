#include "pamlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <gsl/gsl_integration.h>

#include "pamlab/parallel.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gauss-Hermite tensor rule for the doubly smoothed bounded part.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // for weight e^{-z^2}
};

HermiteRule hermite_rule(std::size_t n) {
  gsl_integration_fixed_workspace* w = gsl_integration_fixed_alloc(
      gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0);
  if (w == nullptr) throw NumericalError("Hermite rule allocation failed");
  HermiteRule rule;
  rule.nodes.assign(gsl_integration_fixed_nodes(w),
                    gsl_integration_fixed_nodes(w) + n);
  rule.weights.assign(gsl_integration_fixed_weights(w),
                      gsl_integration_fixed_weights(w) + n);
  gsl_integration_fixed_free(w);
  return rule;
}

}  // namespace

FieldBox::FieldBox(int dim, std::vector<double> center, double half_width,
                   double max_spacing)
    : dim_(dim), center_(std::move(center)), half_width_(half_width) {
  if (dim_ < 1 || dim_ > 3) throw ConfigError("box dimension must be 1..3");
  if (center_.size() != static_cast<std::size_t>(dim_)) {
    throw ConfigError("box center has wrong dimension");
  }
  if (!(half_width_ > 0.0)) throw ConfigError("box half-width must be positive");
  if (!(max_spacing > 0.0)) throw ConfigError("box spacing must be positive");
  const double cells = std::ceil(2.0 * half_width_ / max_spacing);
  n_axis_ = static_cast<std::size_t>(std::max(1.0, cells)) + 1;
  spacing_ = 2.0 * half_width_ / static_cast<double>(n_axis_ - 1);
  size_ = 1;
  for (int c = 0; c < dim_; ++c) size_ *= n_axis_;
}

std::vector<double> FieldBox::point(std::size_t flat) const {
  std::vector<double> x(dim_);
  for (int c = dim_ - 1; c >= 0; --c) {
    const std::size_t i = flat % n_axis_;
    flat /= n_axis_;
    x[c] = center_[c] - half_width_ + spacing_ * static_cast<double>(i);
  }
  return x;
}

bool FieldBox::contains(const std::vector<double>& x) const {
  const double slack = 1e-12 * (1.0 + half_width_);
  for (int c = 0; c < dim_; ++c) {
    if (std::fabs(x[c] - center_[c]) > half_width_ + slack) return false;
  }
  return true;
}

double FieldBox::interpolate(const std::vector<double>& values,
                             const double* x) const {
  std::size_t base[3] = {0, 0, 0};
  double frac[3] = {0.0, 0.0, 0.0};
  for (int c = 0; c < dim_; ++c) {
    double u = (x[c] - (center_[c] - half_width_)) / spacing_;
    u = std::clamp(u, 0.0, static_cast<double>(n_axis_ - 1));
    std::size_t i = static_cast<std::size_t>(u);
    if (i > n_axis_ - 2) i = n_axis_ - 2;
    base[c] = i;
    frac[c] = u - static_cast<double>(i);
  }
  double acc = 0.0;
  for (unsigned corner = 0; corner < (1u << dim_); ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    for (int c = 0; c < dim_; ++c) {
      const bool hi = (corner >> c) & 1u;
      w *= hi ? frac[c] : 1.0 - frac[c];
      flat = flat * n_axis_ + base[c] + (hi ? 1 : 0);
    }
    acc += w * values[flat];
  }
  return acc;
}

MollifiedCovariance build_mollified_covariance(const CovarianceKernel& cov,
                                               double eps, const FieldBox& box,
                                               int workers) {
  if (!(eps > 0.0)) throw ConfigError("smoothing width must be positive");
  if (cov.dim() != box.dim()) {
    throw ConfigError("covariance and box dimensions differ");
  }
  if (!cov.g_is_zero() && cov.dim() != 1) {
    throw ConfigError(
        "a nonzero bounded part is only supported in one dimension");
  }
  const std::size_t P = box.size();
  const int d = box.dim();

  // Stationary part smoothed twice: one heat kernel per argument.
  const StationaryKernel smoothed =
      StationaryKernel::log_plus(cov.T(), d).mollify(2.0 * eps);
  const double r_max = 2.0 * box.half_width() * std::sqrt(double(d)) * 1.0001 +
                       box.spacing();
  const RadialEvaluator table(smoothed, r_max);

  std::vector<std::vector<double>> pts(P);
  for (std::size_t i = 0; i < P; ++i) pts[i] = box.point(i);

  HermiteRule gh;
  double gh_shift = 0.0;
  if (!cov.g_is_zero()) {
    gh = hermite_rule(32);
    gh_shift = std::sqrt(2.0 * eps);
  }

  std::vector<double> K(P * P, 0.0);
  parallel_for(P, workers, [&](std::size_t i) {
    std::vector<double> xu(1), yv(1);
    for (std::size_t j = i; j < P; ++j) {
      double rsq = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = pts[i][c] - pts[j][c];
        rsq += diff * diff;
      }
      double v = table(std::sqrt(rsq));
      if (!cov.g_is_zero()) {
        double acc = 0.0;
        for (std::size_t a = 0; a < gh.nodes.size(); ++a) {
          xu[0] = pts[i][0] + gh_shift * gh.nodes[a];
          double inner = 0.0;
          for (std::size_t b = 0; b < gh.nodes.size(); ++b) {
            yv[0] = pts[j][0] + gh_shift * gh.nodes[b];
            inner += gh.weights[b] * cov.g_eval(xu, yv);
          }
          acc += gh.weights[a] * inner;
        }
        v += acc / kPi;
      }
      K[i * P + j] = v;
      K[j * P + i] = v;
    }
  });

  Eigen::Map<Eigen::MatrixXd> M(K.data(), static_cast<Eigen::Index>(P),
                                static_cast<Eigen::Index>(P));
  Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
  const double trace = sym.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("covariance eigendecomposition failed");
  }
  const double min_eig = es.eigenvalues()(0);
  const double jitter = std::max(0.0, -min_eig) + 1e-10 * trace;
  sym.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance factorization failed after jitter");
  }
  Eigen::MatrixXd L = llt.matrixL();

  MollifiedCovariance mc{cov, eps, box, std::vector<double>(P * P),
                         std::vector<double>(P * P, 0.0), min_eig, trace,
                         jitter};
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j < P; ++j) {
      mc.matrix[i * P + j] = sym(static_cast<Eigen::Index>(i),
                                 static_cast<Eigen::Index>(j));
      if (j <= i) {
        mc.chol[i * P + j] = L(static_cast<Eigen::Index>(i),
                               static_cast<Eigen::Index>(j));
      }
    }
  }
  return mc;
}

FieldSample sample_field(const MollifiedCovariance& mc, std::uint64_t seed) {
  const std::size_t P = mc.box.size();
  rng::Stream st = rng::substream(seed, 0);
  std::vector<double> z(P);
  for (std::size_t j = 0; j < P; ++j) z[j] = st.normal(j);
  FieldSample out;
  out.seed = seed;
  out.values.assign(P, 0.0);
  for (std::size_t i = 0; i < P; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      acc += mc.chol[i * P + j] * z[j];
    }
    out.values[i] = acc;
  }
  return out;
}

FKEstimate fk_solution(const FieldBox& box, const std::vector<double>& field,
                       const TimeGrid& grid, const std::vector<double>& start,
                       std::size_t n_paths, const InitialCondition& u0,
                       std::uint64_t seed, int workers) {
  if (field.size() != box.size()) {
    throw ConfigError("field values do not match the box grid");
  }
  if (start.size() != static_cast<std::size_t>(box.dim())) {
    throw ConfigError("start point has wrong dimension");
  }
  if (!box.contains(start)) {
    throw ConfigError("start point lies outside the sampled box");
  }
  if (n_paths < 1) throw ConfigError("need at least one path");

  const BrownianEnsemble e(n_paths, box.dim(), grid, start, seed, workers);
  const std::size_t n = grid.n;
  const double delta = grid.delta();
  std::vector<double> W(n_paths, 0.0);
  std::vector<std::size_t> exits(n_paths, 0);
  parallel_for(n_paths, workers, [&](std::size_t j) {
    double acc = 0.0;
    std::size_t out = 0;
    std::vector<double> probe(box.dim());
    for (std::size_t i = 1; i <= n; ++i) {
      const double* p = e.midpoint(j, i);
      probe.assign(p, p + box.dim());
      if (!box.contains(probe)) ++out;
      acc += box.interpolate(field, p);  // clamps internally
    }
    double w = delta * acc;
    if (!u0.is_one) {
      const double* term = e.node(j, n);
      const double v = u0.f(std::vector<double>(term, term + box.dim()));
      if (!(v > 0.0)) {
        throw NumericalError("initial condition must be positive");
      }
      w += std::log(v);
    }
    W[j] = w;
    exits[j] = out;
  });
  std::size_t total_exits = 0;
  for (std::size_t x : exits) total_exits += x;
  const double frac = static_cast<double>(total_exits) /
                      static_cast<double>(n_paths * n);
  if (frac > 0.01) {
    throw CoverageError("too many path steps left the field box", frac);
  }

  double shift = W[0];
  for (double w : W) shift = std::max(shift, w);
  double acc = 0.0;
  for (double w : W) acc += std::exp(w - shift);
  const double mean_e = acc / static_cast<double>(n_paths);
  double var = 0.0;
  for (double w : W) {
    const double dev = std::exp(w - shift) - mean_e;
    var += dev * dev;
  }
  FKEstimate out;
  out.n_paths = n_paths;
  out.u_value = std::exp(shift) * mean_e;
  if (n_paths > 1) {
    var /= static_cast<double>(n_paths - 1);
    out.stderr_ = std::exp(shift) *
                  std::sqrt(var / static_cast<double>(n_paths));
  }
  return out;
}

CrosscheckReport replica_crosscheck(const CovarianceKernel& cov,
                                    const CrosscheckConfig& cfg) {
  if (cfg.n_replicas < 1 || cfg.n_replicas > 3) {
    throw ConfigError("replica count must be 1..3");
  }
  if (!cov.g_is_zero()) {
    throw ConfigError(
        "the cross-check requires a vanishing bounded part; the replica side "
        "cannot smooth a general g");
  }
  if (!(cfg.t > 0.0) || cfg.t > 0.5) {
    throw ConfigError("horizon must lie in (0, 0.5]");
  }
  if (!(cfg.eps > 0.0)) throw ConfigError("smoothing width must be positive");
  if (cfg.m_fields < 2) throw ConfigError("need at least two field samples");
  if (cfg.m_paths < 2) throw ConfigError("need at least two paths per field");
  std::vector<double> start = cfg.start;
  if (start.empty()) start.assign(cfg.dim, 0.0);
  if (start.size() != static_cast<std::size_t>(cfg.dim)) {
    throw ConfigError("start point has wrong dimension");
  }
  const std::size_t n_steps =
      cfg.n_steps > 0 ? cfg.n_steps
                      : static_cast<std::size_t>(std::max(
                            1.0, std::round(cfg.t * static_cast<double>(
                                                        cfg.steps_per_unit))));
  const TimeGrid grid(cfg.t, n_steps);

  const double half_width = 4.0 * std::sqrt(cfg.t) + 2.0 * cov.T();
  const FieldBox box(cfg.dim, start, half_width, 0.5 * cfg.eps);
  const MollifiedCovariance mc =
      build_mollified_covariance(cov, cfg.eps, box, cfg.workers);

  // Side A: freeze whole fields, average the N-th power of the frozen-field
  // solution.  Outer loop parallel, inner path loop serial per field.
  const std::size_t K = cfg.m_fields;
  const int N = cfg.n_replicas;
  std::vector<double> powers(K, 0.0);
  std::vector<double> biases(K, 0.0);
  parallel_for(K, cfg.workers, [&](std::size_t k) {
    const std::uint64_t field_seed =
        rng::substream(rng::substream(cfg.seed, 1).key, k).key;
    const std::uint64_t path_seed =
        rng::substream(rng::substream(cfg.seed, 2).key, k).key;
    const FieldSample sample = sample_field(mc, field_seed);
    const FKEstimate fk = fk_solution(box, sample.values, grid, start,
                                      cfg.m_paths, cfg.u0, path_seed, 1);
    powers[k] = std::pow(fk.u_value, N);
    // Leading bias of u^N from inner-loop noise: C(N,2) u^{N-2} var(u-hat).
    biases[k] = 0.5 * N * (N - 1) *
                std::pow(fk.u_value, N - 2) * fk.stderr_ * fk.stderr_;
  });
  double mean_a = 0.0;
  for (double p : powers) mean_a += p;
  mean_a /= static_cast<double>(K);
  double var_a = 0.0;
  for (double p : powers) var_a += (p - mean_a) * (p - mean_a);
  var_a /= static_cast<double>(K - 1);
  double bias_a = 0.0;
  for (double b : biases) bias_a += b;
  bias_a /= static_cast<double>(K);
  if (!(mean_a > 0.0)) {
    throw NumericalError("field-side moment estimate is not positive");
  }

  CrosscheckReport rep;
  rep.log_a = std::log(mean_a);
  rep.stderr_a = std::sqrt(var_a / static_cast<double>(K)) / mean_a;
  rep.nesting_bias = bias_a / mean_a;
  rep.min_eig_before_jitter = mc.min_eig_before_jitter;
  rep.jitter = mc.jitter;

  // Side B: replica functional with the kernel smoothed at twice the width.
  const StationaryKernel kernel_b =
      StationaryKernel::log_plus(cov.T(), cfg.dim).mollify(2.0 * cfg.eps);
  ExpMomentConfig bcfg{static_cast<std::size_t>(N), cfg.dim, grid,
                       cfg.m_replica_samples, rng::substream(cfg.seed, 3).key};
  bcfg.workers = cfg.workers;
  bcfg.u0 = cfg.u0;
  bcfg.start = start;
  const MomentEstimate side_b = exp_moment(kernel_b, bcfg);
  rep.log_b = side_b.log_value;
  rep.stderr_b = side_b.stderr_;

  const double combined = std::hypot(rep.stderr_a, rep.stderr_b);
  rep.gap_sigmas = std::fabs(rep.log_a - rep.log_b) /
                   std::max(combined, 1e-300);
  rep.pass = rep.gap_sigmas <= 3.0;
  return rep;
}

}  // namespace pamlab
