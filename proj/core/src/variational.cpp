#include "pamlab/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <mutex>
#include <utility>

#include <fftw3.h>

#include "pamlab/quadrature.hpp"

namespace pamlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 8-point Gauss-Legendre rule on [-1, 1], for cell averages of singular
// kernels away from the origin cell.
constexpr double kGlx[8] = {-0.9602898564975363, -0.7966664774136267,
                            -0.5255324099163290, -0.1834346424956498,
                            0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
constexpr double kGlw[8] = {0.1012285362903763, 0.2223810344533745,
                            0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

double signed_min_image(std::size_t v, std::size_t n, double h) {
  const double m = v <= n / 2 ? static_cast<double>(v)
                              : static_cast<double>(v) - static_cast<double>(n);
  return m * h;
}

// Exact cell averages on [a, b] for the two closed-form singular profiles.
double riesz_cell_average(double alpha, double a, double b) {
  const double p = 1.0 - alpha;  // alpha < 1 in d = 1
  return (std::pow(b, p) - std::pow(a, p)) / (p * (b - a));
}

double logplus_cell_average(double T, double a, double b) {
  const auto F = [T](double r) {
    return r <= 0.0 ? 0.0 : r * (std::log(T / r) + 1.0);
  };
  if (a >= T) return 0.0;
  return (F(std::min(b, T)) - F(a)) / (b - a);
}

}  // namespace

GridSpec::GridSpec(int dim_, std::size_t n_, double h_)
    : dim(dim_), n(n_), h(h_) {
  if (dim != 1 && dim != 2) throw ConfigError("grid dimension must be 1 or 2");
  if (n < 16 || (n & (n - 1)) != 0) {
    throw ConfigError("grid size must be a power of two, at least 16");
  }
  if (!(h > 0.0) || !(h < 1.0)) {
    throw ConfigError("grid spacing must lie in (0, 1)");
  }
}

struct VariationalProblem::Fft {
  std::size_t n_real = 0;
  std::size_t n_cplx = 0;
  double* in = nullptr;
  double* out = nullptr;
  fftw_complex* freq = nullptr;
  fftw_complex* khat = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Fft(const GridSpec& grid) {
    const int n = static_cast<int>(grid.n);
    n_real = grid.size();
    n_cplx = grid.dim == 1 ? grid.n / 2 + 1 : grid.n * (grid.n / 2 + 1);
    in = fftw_alloc_real(n_real);
    out = fftw_alloc_real(n_real);
    freq = fftw_alloc_complex(n_cplx);
    khat = fftw_alloc_complex(n_cplx);
    std::lock_guard<std::mutex> lock(fftw_mutex());  // planner is not thread-safe
    if (grid.dim == 1) {
      fwd = fftw_plan_dft_r2c_1d(n, in, freq, FFTW_ESTIMATE);
      inv = fftw_plan_dft_c2r_1d(n, freq, out, FFTW_ESTIMATE);
    } else {
      fwd = fftw_plan_dft_r2c_2d(n, n, in, freq, FFTW_ESTIMATE);
      inv = fftw_plan_dft_c2r_2d(n, n, freq, out, FFTW_ESTIMATE);
    }
  }

  ~Fft() {
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_destroy_plan(fwd);
      fftw_destroy_plan(inv);
    }
    fftw_free(in);
    fftw_free(out);
    fftw_free(freq);
    fftw_free(khat);
  }
};

VariationalProblem::VariationalProblem(const StationaryKernel& kernel,
                                       const GridSpec& grid)
    : kernel_(kernel), grid_(grid) {
  if (kernel_.dim() != grid_.dim) {
    throw ConfigError("kernel and grid dimensions differ");
  }
  build_kernel_samples(kernel);
  fft_ = std::make_unique<Fft>(grid_);
  conv_.resize(grid_.size());
  std::memcpy(fft_->in, K_.data(), K_.size() * sizeof(double));
  fftw_execute(fft_->fwd);
  std::memcpy(fft_->khat, fft_->freq, fft_->n_cplx * sizeof(fftw_complex));
}

VariationalProblem::~VariationalProblem() = default;

void VariationalProblem::build_kernel_samples(const StationaryKernel& kernel) {
  const std::size_t n = grid_.n;
  const double h = grid_.h;
  K_.resize(grid_.size());

  if (!kernel.singular_at_zero()) {
    if (kernel.quadrature_backed()) {
      const double r_max =
          grid_.length() * std::sqrt(static_cast<double>(grid_.dim)) * 0.51 +
          1.0;
      const RadialEvaluator table(kernel, r_max);
      if (grid_.dim == 1) {
        for (std::size_t v = 0; v < n; ++v) {
          K_[v] = table(std::fabs(signed_min_image(v, n, h)));
        }
      } else {
        for (std::size_t v0 = 0; v0 < n; ++v0) {
          const double y = signed_min_image(v0, n, h);
          for (std::size_t v1 = 0; v1 < n; ++v1) {
            const double x = signed_min_image(v1, n, h);
            K_[v0 * n + v1] = table(std::sqrt(x * x + y * y));
          }
        }
      }
      return;
    }
    std::vector<double> dx(grid_.dim);
    if (grid_.dim == 1) {
      for (std::size_t v = 0; v < n; ++v) {
        dx[0] = signed_min_image(v, n, h);
        K_[v] = kernel(dx);
      }
    } else {
      for (std::size_t v0 = 0; v0 < n; ++v0) {
        dx[1] = signed_min_image(v0, n, h);
        for (std::size_t v1 = 0; v1 < n; ++v1) {
          dx[0] = signed_min_image(v1, n, h);
          K_[v0 * n + v1] = kernel(dx);
        }
      }
    }
    return;
  }

  // Singular kernel: replace point samples by cell averages so the origin
  // cell is finite.  Closed forms in one dimension, quadrature otherwise.
  const KernelFamily fam = kernel.base_family();
  const double scale = kernel.scale_factor();
  if (grid_.dim == 1) {
    const auto cell = [&](double lo, double hi) -> double {
      switch (fam) {
        case KernelFamily::kRiesz:
          return scale * riesz_cell_average(kernel.param_alpha(), lo, hi);
        case KernelFamily::kLogPlus:
          return scale * logplus_cell_average(kernel.param_T(), lo, hi);
        default: {
          quad::Options opt;
          opt.epsrel = 1e-10;
          const auto f = [&kernel](double r) { return kernel.at_radius(r); };
          return quad::integrate(f, lo, hi, opt).value / (hi - lo);
        }
      }
    };
    for (std::size_t v = 0; v < n; ++v) {
      const double r0 = std::fabs(signed_min_image(v, n, h));
      if (v == 0) {
        K_[v] = cell(0.0, 0.5 * h);
      } else {
        K_[v] = cell(r0 - 0.5 * h, r0 + 0.5 * h);
      }
    }
    return;
  }

  // d = 2: equal-area polar average on the origin cell, tensor Gauss on the
  // rest.
  quad::Options opt;
  opt.epsrel = 1e-10;
  const double r_eq = h / std::sqrt(kPi);
  const auto polar = [&](double r) { return kernel.at_radius(r) * r; };
  const double zero_cell =
      2.0 * kPi * quad::integrate(polar, 0.0, r_eq, opt).value / (h * h);
  for (std::size_t v0 = 0; v0 < n; ++v0) {
    const double y0 = signed_min_image(v0, n, h);
    for (std::size_t v1 = 0; v1 < n; ++v1) {
      if (v0 == 0 && v1 == 0) {
        K_[0] = zero_cell;
        continue;
      }
      const double x0 = signed_min_image(v1, n, h);
      double acc = 0.0;
      for (int a = 0; a < 8; ++a) {
        const double x = x0 + 0.5 * h * kGlx[a];
        for (int b = 0; b < 8; ++b) {
          const double y = y0 + 0.5 * h * kGlx[b];
          acc += kGlw[a] * kGlw[b] *
                 kernel.at_radius(std::sqrt(x * x + y * y));
        }
      }
      K_[v0 * n + v1] = 0.25 * acc;  // Gauss weights sum to 2 per axis
    }
  }
}

void VariationalProblem::convolve(const std::vector<double>& q) const {
  std::memcpy(fft_->in, q.data(), q.size() * sizeof(double));
  fftw_execute(fft_->fwd);
  for (std::size_t i = 0; i < fft_->n_cplx; ++i) {
    const double re = fft_->freq[i][0];
    const double im = fft_->freq[i][1];
    const double kre = fft_->khat[i][0];
    const double kim = fft_->khat[i][1];
    fft_->freq[i][0] = re * kre - im * kim;
    fft_->freq[i][1] = re * kim + im * kre;
  }
  fftw_execute(fft_->inv);
  const double norm = 1.0 / static_cast<double>(fft_->n_real);
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    conv_[i] = fft_->out[i] * norm;
  }
}

double VariationalProblem::quartic(const std::vector<double>& g) const {
  const std::size_t N = grid_.size();
  if (g.size() != N) throw ConfigError("profile has wrong grid size");
  std::vector<double> q(N);
  for (std::size_t i = 0; i < N; ++i) q[i] = g[i] * g[i];
  convolve(q);
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) acc += q[i] * conv_[i];
  return acc * std::pow(grid_.h, 2 * grid_.dim);
}

double VariationalProblem::dirichlet(const std::vector<double>& g) const {
  const std::size_t N = grid_.size();
  if (g.size() != N) throw ConfigError("profile has wrong grid size");
  const std::size_t n = grid_.n;
  double acc = 0.0;
  if (grid_.dim == 1) {
    for (std::size_t u = 0; u < n; ++u) {
      const double diff = g[(u + 1) % n] - g[(u + n - 1) % n];
      acc += diff * diff;
    }
  } else {
    for (std::size_t i0 = 0; i0 < n; ++i0) {
      const std::size_t up = ((i0 + 1) % n) * n;
      const std::size_t dn = ((i0 + n - 1) % n) * n;
      const std::size_t row = i0 * n;
      for (std::size_t i1 = 0; i1 < n; ++i1) {
        const double dx = g[row + (i1 + 1) % n] - g[row + (i1 + n - 1) % n];
        const double dy = g[up + i1] - g[dn + i1];
        acc += dx * dx + dy * dy;
      }
    }
  }
  return acc * 0.25 * std::pow(grid_.h, grid_.dim - 2);
}

double VariationalProblem::energy(const std::vector<double>& g) const {
  return 0.5 * (quartic(g) - dirichlet(g));
}

std::vector<double> VariationalProblem::gradient(
    const std::vector<double>& g) const {
  const std::size_t N = grid_.size();
  if (g.size() != N) throw ConfigError("profile has wrong grid size");
  std::vector<double> q(N);
  for (std::size_t i = 0; i < N; ++i) q[i] = g[i] * g[i];
  convolve(q);
  const double cq = 2.0 * std::pow(grid_.h, 2 * grid_.dim);
  const double cd = 0.25 * std::pow(grid_.h, grid_.dim - 2);
  std::vector<double> grad(N);
  const std::size_t n = grid_.n;
  if (grid_.dim == 1) {
    for (std::size_t u = 0; u < n; ++u) {
      const double lap =
          2.0 * g[u] - g[(u + 2) % n] - g[(u + n - 2) % n];
      grad[u] = cq * conv_[u] * g[u] - cd * lap;
    }
  } else {
    for (std::size_t i0 = 0; i0 < n; ++i0) {
      const std::size_t up2 = ((i0 + 2) % n) * n;
      const std::size_t dn2 = ((i0 + n - 2) % n) * n;
      const std::size_t row = i0 * n;
      for (std::size_t i1 = 0; i1 < n; ++i1) {
        const double lap = 4.0 * g[row + i1] - g[row + (i1 + 2) % n] -
                           g[row + (i1 + n - 2) % n] - g[up2 + i1] -
                           g[dn2 + i1];
        grad[row + i1] = cq * conv_[row + i1] * g[row + i1] - cd * lap;
      }
    }
  }
  return grad;
}

double VariationalProblem::quartic_spectral(
    const std::vector<double>& g) const {
  const std::size_t N = grid_.size();
  if (g.size() != N) throw ConfigError("profile has wrong grid size");
  const std::size_t n = grid_.n;
  const double h = grid_.h;
  const double hd = std::pow(h, grid_.dim);
  std::vector<double> q(N);
  for (std::size_t i = 0; i < N; ++i) q[i] = g[i] * g[i];

  if (kernel_.has_atoms()) {
    const std::vector<double> w = kernel_.atom_weights();
    const auto& freqs = kernel_.atom_freqs();
    double acc = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
      double re = 0.0, im = 0.0;
      if (grid_.dim == 1) {
        for (std::size_t u = 0; u < n; ++u) {
          const double phase = freqs[a][0] * (h * static_cast<double>(u));
          re += q[u] * std::cos(phase);
          im += q[u] * std::sin(phase);
        }
      } else {
        for (std::size_t i0 = 0; i0 < n; ++i0) {
          for (std::size_t i1 = 0; i1 < n; ++i1) {
            const double phase =
                freqs[a][0] * (h * static_cast<double>(i1)) +
                freqs[a][1] * (h * static_cast<double>(i0));
            re += q[i0 * n + i1] * std::cos(phase);
            im += q[i0 * n + i1] * std::sin(phase);
          }
        }
      }
      acc += w[a] * (hd * re * hd * re + hd * im * hd * im);
    }
    return acc;
  }

  const std::optional<SpectralDensity> sd = kernel_.spectral_density();
  if (!sd) {
    throw ConfigError("kernel has neither atoms nor an analytic density");
  }
  // Riemann sum over the reciprocal lattice xi_k = (2 pi / L) k up to the
  // Nyquist frequency, with a radial cell average on the zero bin.
  std::memcpy(fft_->in, q.data(), q.size() * sizeof(double));
  fftw_execute(fft_->fwd);
  const double L = grid_.length();
  const double dxi = 2.0 * kPi / L;
  quad::Options opt;
  opt.epsrel = 1e-10;
  double acc = 0.0;
  if (grid_.dim == 1) {
    const double zero_bin =
        2.0 * quad::integrate(sd->w, 0.0, 0.5 * dxi, opt).value;
    for (std::size_t k = 0; k <= n / 2; ++k) {
      const double re = fft_->freq[k][0];
      const double im = fft_->freq[k][1];
      const double power = hd * hd * (re * re + im * im);
      const double mult = (k == 0 || k == n / 2) ? 1.0 : 2.0;
      const double weight =
          k == 0 ? zero_bin : sd->w(dxi * static_cast<double>(k)) * dxi;
      acc += mult * weight * power;
    }
  } else {
    const double r_eq = dxi / std::sqrt(kPi);
    const auto polar = [&](double rho) { return sd->w(rho) * rho; };
    const double zero_bin =
        2.0 * kPi * quad::integrate(polar, 0.0, r_eq, opt).value;
    const std::size_t nc = n / 2 + 1;
    for (std::size_t k0 = 0; k0 < n; ++k0) {
      const double s0 =
          k0 <= n / 2 ? static_cast<double>(k0)
                      : static_cast<double>(k0) - static_cast<double>(n);
      for (std::size_t k1 = 0; k1 < nc; ++k1) {
        const double re = fft_->freq[k0 * nc + k1][0];
        const double im = fft_->freq[k0 * nc + k1][1];
        const double power = hd * hd * (re * re + im * im);
        const double mult = (k1 == 0 || k1 == n / 2) ? 1.0 : 2.0;
        const double rho =
            dxi * std::sqrt(s0 * s0 + static_cast<double>(k1 * k1));
        const double weight = (k0 == 0 && k1 == 0)
                                  ? zero_bin
                                  : sd->w(rho) * dxi * dxi;
        acc += mult * weight * power;
      }
    }
  }
  return acc;
}

VariationalResult VariationalProblem::maximize(
    const MaximizeOptions& opts) const {
  if (!(opts.tol > 0.0)) throw ConfigError("tolerance must be positive");
  if (opts.stall_window < 1) throw ConfigError("stall window must be >= 1");
  if (opts.n_restarts < 1) throw ConfigError("need at least one restart");
  if (!(opts.init_step > 0.0)) throw ConfigError("initial step must be positive");
  const std::size_t N = grid_.size();
  const double hd = std::pow(grid_.h, grid_.dim);
  const double L = grid_.length();

  const auto normalize = [&](std::vector<double>& g) -> bool {
    double s = 0.0;
    for (double v : g) s += v * v;
    s *= hd;
    if (!(s > 0.0)) return false;
    const double inv = 1.0 / std::sqrt(s);
    for (double& v : g) v *= inv;
    return true;
  };

  const auto initial_profile = [&](std::size_t r) -> std::vector<double> {
    std::vector<double> g(N, 1.0);
    if (r == 0) return g;
    const double width = L / std::pow(2.0, static_cast<double>(r) + 1.0);
    const double c = 0.5 * L;
    const std::size_t n = grid_.n;
    for (std::size_t i = 0; i < N; ++i) {
      double rsq = 0.0;
      if (grid_.dim == 1) {
        const double x = grid_.h * static_cast<double>(i) - c;
        rsq = x * x;
      } else {
        const double x = grid_.h * static_cast<double>(i % n) - c;
        const double y = grid_.h * static_cast<double>(i / n) - c;
        rsq = x * x + y * y;
      }
      g[i] = std::exp(-rsq / (2.0 * width * width));
    }
    return g;
  };

  VariationalResult best;
  bool have_best = false;
  for (std::size_t r = 0; r < opts.n_restarts; ++r) {
    std::vector<double> g = initial_profile(r);
    if (!normalize(g)) throw NumericalError("initial profile vanished");
    double J = energy(g);
    double eta = opts.init_step;
    std::vector<double> history{J};
    bool converged = false;
    std::size_t iter = 0;
    while (iter < opts.max_iters) {
      ++iter;
      std::vector<double> t = gradient(g);
      double ip = 0.0;
      for (std::size_t i = 0; i < N; ++i) ip += t[i] * g[i];
      ip *= hd;
      double tn = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        t[i] -= ip * g[i];
        tn += t[i] * t[i];
      }
      tn = std::sqrt(tn * hd);
      if (tn <= 1e-13 * std::max(1.0, std::fabs(J))) {
        converged = true;  // stationary on the sphere
        break;
      }
      bool accepted = false;
      while (eta > 1e-18) {
        std::vector<double> trial(N);
        for (std::size_t i = 0; i < N; ++i) {
          trial[i] = std::max(0.0, g[i] + eta * t[i]);
        }
        if (!normalize(trial)) {
          eta *= 0.5;
          continue;
        }
        const double Jt = energy(trial);
        if (Jt > J) {
          g = std::move(trial);
          J = Jt;
          eta *= 1.5;
          accepted = true;
          break;
        }
        eta *= 0.5;
      }
      if (!accepted) {
        converged = true;  // no uphill step exists at line-search resolution
        break;
      }
      history.push_back(J);
      if (history.size() > opts.stall_window) {
        const double past = history[history.size() - 1 - opts.stall_window];
        if (J - past <= opts.tol * std::max(1.0, std::fabs(J))) {
          converged = true;
          break;
        }
      }
    }
    VariationalResult cand;
    cand.energy = J;
    cand.quartic = quartic(g);
    cand.dirichlet = dirichlet(g);
    cand.iterations = iter;
    cand.restart_index = r;
    cand.converged = converged;
    cand.g = std::move(g);
    const bool take =
        !have_best ||
        (cand.converged && !best.converged) ||
        (cand.converged == best.converged && cand.energy > best.energy);
    if (take) {
      best = std::move(cand);
      have_best = true;
    }
  }
  if (!best.converged) {
    throw NotConverged("no restart reached the stall criterion", best);
  }
  return best;
}

EnvelopeReport envelope_checks(const StationaryKernel& base,
                               const GridSpec& grid,
                               const std::vector<double>& eps_list,
                               const MaximizeOptions& opts) {
  std::vector<double> eps = eps_list;
  for (double e : eps) {
    if (!(e > 0.0)) throw ConfigError("smoothing widths must be positive");
  }
  std::sort(eps.begin(), eps.end(), std::greater<>());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  std::vector<std::pair<double, StationaryKernel>> kernels;
  for (double e : eps) kernels.emplace_back(e, base.mollify(e));
  if (!base.singular_at_zero()) kernels.emplace_back(0.0, base);
  if (kernels.empty()) {
    throw ConfigError("a singular kernel needs a nonempty eps list");
  }

  EnvelopeReport rep;
  rep.all_pass = true;
  for (const auto& [e, k] : kernels) {
    const VariationalProblem problem(k, grid);
    const VariationalResult res = problem.maximize(opts);
    std::vector<double> flat(grid.size(),
                             std::pow(grid.length(), -0.5 * grid.dim));
    EnvelopeRow row;
    row.eps = e;
    row.energy = res.energy;
    row.lower = problem.energy(flat);
    row.upper = 0.5 * k.sup_bound();
    const double slack = 1e-9 * std::max(1.0, std::fabs(res.energy)) + 1e-12;
    row.bounds_pass =
        res.energy >= row.lower - slack && res.energy <= row.upper + slack;
    rep.all_pass = rep.all_pass && row.bounds_pass;
    rep.rows.push_back(row);
  }
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const double prev = rep.rows[i - 1].energy;
    const double slack = 1e-6 * std::max(1.0, std::fabs(prev));
    if (rep.rows[i].energy < prev - slack) rep.monotone = false;
  }
  rep.all_pass = rep.all_pass && rep.monotone;
  return rep;
}

}  // namespace pamlab
