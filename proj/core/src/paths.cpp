#include "pamlab/paths.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "pamlab/errors.hpp"
#include "pamlab/parallel.hpp"
#include "pamlab/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "ensemble snapshots assume a little-endian host");

namespace pamlab {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

void put_f64(std::ostream& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw IoError("truncated ensemble snapshot");
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

double get_f64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw IoError("truncated ensemble snapshot");
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace

TimeGrid::TimeGrid(double t_, std::size_t n_steps) : t(t_), n(n_steps) {
  if (!(t > 0.0)) throw ConfigError("time horizon must be positive");
  if (n == 0) throw ConfigError("time grid needs at least one step");
}

BrownianEnsemble::BrownianEnsemble(std::size_t n_paths, int dim, TimeGrid grid,
                                   std::vector<double> start,
                                   std::uint64_t seed, int workers)
    : n_paths_(n_paths),
      dim_(dim),
      grid_(grid),
      start_(std::move(start)),
      seed_(seed) {
  if (n_paths_ == 0) throw ConfigError("ensemble needs at least one path");
  if (dim_ < 1) throw ConfigError("ensemble dimension must be >= 1");
  if (start_.size() != static_cast<std::size_t>(dim_)) {
    throw ConfigError("start point has wrong dimension");
  }
  const std::size_t n = grid_.n;
  const std::size_t d = static_cast<std::size_t>(dim_);
  nodes_.resize(n_paths_ * (n + 1) * d);
  midpoints_.resize(n_paths_ * n * d);
  const double sqrt_delta = std::sqrt(grid_.delta());
  parallel_for(n_paths_, workers, [&](std::size_t j) {
    const rng::Stream stream = rng::substream(seed_, j);
    double* path = nodes_.data() + j * (n + 1) * d;
    for (std::size_t c = 0; c < d; ++c) path[c] = start_[c];
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        path[i * d + c] = path[(i - 1) * d + c] +
                          sqrt_delta * stream.normal((i - 1) * d + c);
      }
    }
  });
  generate_midpoints(workers);
}

void BrownianEnsemble::generate_midpoints(int workers) {
  const std::size_t n = grid_.n;
  const std::size_t d = static_cast<std::size_t>(dim_);
  // Bridge midpoint between adjacent nodes: mean is the node average and
  // the conditional standard deviation is sqrt(delta)/2.
  const double half_sd = 0.5 * std::sqrt(grid_.delta());
  parallel_for(n_paths_, workers, [&](std::size_t j) {
    const rng::Stream stream = rng::substream(seed_, j);
    const double* path = nodes_.data() + j * (n + 1) * d;
    double* mids = midpoints_.data() + j * n * d;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        const double avg =
            0.5 * (path[(i - 1) * d + c] + path[i * d + c]);
        mids[(i - 1) * d + c] =
            avg + half_sd * stream.normal(n * d + (i - 1) * d + c);
      }
    }
  });
}

double BrownianEnsemble::midpoint_diameter() const {
  const std::size_t d = static_cast<std::size_t>(dim_);
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < midpoints_.size(); p += d) {
    for (std::size_t c = 0; c < d; ++c) {
      lo[c] = std::min(lo[c], midpoints_[p + c]);
      hi[c] = std::max(hi[c], midpoints_[p + c]);
    }
  }
  double sq = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double w = hi[c] - lo[c];
    sq += w * w;
  }
  return std::sqrt(sq);
}

void BrownianEnsemble::dump(std::ostream& out) const {
  if (!sampled_) {
    throw IoError("derived ensemble has no generating seed and cannot be dumped");
  }
  put_u64(out, seed_);
  put_u64(out, n_paths_);
  put_u64(out, static_cast<std::uint64_t>(dim_));
  put_u64(out, grid_.n);
  put_f64(out, grid_.t);
  for (double v : nodes_) put_f64(out, v);
  if (!out) throw IoError("short write while dumping ensemble");
}

BrownianEnsemble BrownianEnsemble::load(std::istream& in) {
  BrownianEnsemble e;
  e.seed_ = get_u64(in);
  e.n_paths_ = get_u64(in);
  const std::uint64_t dim = get_u64(in);
  const std::uint64_t n = get_u64(in);
  const double t = get_f64(in);
  if (e.n_paths_ == 0 || dim == 0 || dim > 1024 || n == 0 ||
      !std::isfinite(t) || t <= 0.0) {
    throw IoError("corrupt ensemble snapshot header");
  }
  e.dim_ = static_cast<int>(dim);
  e.grid_ = TimeGrid(t, n);
  const std::size_t d = static_cast<std::size_t>(dim);
  e.nodes_.resize(e.n_paths_ * (n + 1) * d);
  for (double& v : e.nodes_) v = get_f64(in);
  e.start_.assign(e.nodes_.begin(), e.nodes_.begin() + d);
  // Cheap consistency check: the first stored increment must match the
  // seed's regeneration to well below any statistical scale.
  {
    const rng::Stream stream = rng::substream(e.seed_, 0);
    const double sqrt_delta = std::sqrt(e.grid_.delta());
    for (std::size_t c = 0; c < d; ++c) {
      const double expect = e.nodes_[c] + sqrt_delta * stream.normal(c);
      if (std::fabs(expect - e.nodes_[d + c]) > 1e-9) {
        throw IoError("ensemble snapshot does not match its seed");
      }
    }
  }
  e.midpoints_.resize(e.n_paths_ * n * d);
  e.generate_midpoints(1);
  return e;
}

BrownianEnsemble BrownianEnsemble::rescale(const BrownianEnsemble& src,
                                           double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("rescale factor must be positive");
  BrownianEnsemble e;
  e.n_paths_ = src.n_paths_;
  e.dim_ = src.dim_;
  e.grid_ = TimeGrid(src.grid_.t / sigma, src.grid_.n);
  e.seed_ = src.seed_;
  e.sampled_ = false;
  const double f = 1.0 / std::sqrt(sigma);
  e.start_.resize(src.start_.size());
  for (std::size_t c = 0; c < src.start_.size(); ++c) {
    e.start_[c] = f * src.start_[c];
  }
  e.nodes_.resize(src.nodes_.size());
  for (std::size_t i = 0; i < src.nodes_.size(); ++i) {
    e.nodes_[i] = f * src.nodes_[i];
  }
  e.midpoints_.resize(src.midpoints_.size());
  for (std::size_t i = 0; i < src.midpoints_.size(); ++i) {
    e.midpoints_[i] = f * src.midpoints_[i];
  }
  return e;
}

PairwiseFunctional::PairwiseFunctional(const StationaryKernel& kernel,
                                       double r_max, std::size_t table_size)
    : kernel_(kernel), mode_(Mode::kDirect) {
  if (kernel_.singular_at_zero()) {
    throw SingularityError(
        "pairwise functional hits zero separation on the diagonal; "
        "mollify the kernel or pass a singular-kernel policy");
  }
  if (kernel_.has_atoms()) {
    mode_ = Mode::kAtoms;
    w_ = kernel_.atom_weights();
    xi_ = kernel_.atom_freqs();
  } else if (kernel_.quadrature_backed()) {
    mode_ = Mode::kTable;
    table_.emplace(kernel_, r_max, table_size);
  }
  gamma0_ = kernel_.at_radius(0.0);
}

double PairwiseFunctional::operator()(const BrownianEnsemble& e,
                                      int workers) const {
  if (e.dim() != kernel_.dim()) {
    throw ConfigError("ensemble and kernel dimensions differ");
  }
  const std::size_t m = e.n_paths();
  const std::size_t n = e.grid().n;
  const std::size_t d = static_cast<std::size_t>(e.dim());
  const double* mids = e.midpoints_flat().data();
  const std::size_t stride = n * d;

  std::vector<std::pair<std::size_t, std::size_t>> slots;
  slots.reserve(m * (m + 1) / 2);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = j; k < m; ++k) slots.emplace_back(j, k);
  }
  std::vector<double> partial(slots.size());

  const auto pair_sum = [&](const double* a, const double* b,
                            std::size_t i_lo_excl) -> double {
    // Sum of gamma over all (i, i') with a fixed, or the strict upper
    // triangle when the two paths coincide.
    double acc = 0.0;
    switch (mode_) {
      case Mode::kAtoms: {
        for (std::size_t i = 0; i < n; ++i) {
          const double* p = a + i * d;
          const std::size_t start = i_lo_excl ? i + 1 : 0;
          for (std::size_t ip = start; ip < n; ++ip) {
            const double* q = b + ip * d;
            for (std::size_t at = 0; at < w_.size(); ++at) {
              double phase = 0.0;
              for (std::size_t c = 0; c < d; ++c) {
                phase += xi_[at][c] * (p[c] - q[c]);
              }
              acc += w_[at] * std::cos(phase);
            }
          }
        }
        return acc;
      }
      case Mode::kTable: {
        const RadialEvaluator& tab = *table_;
        for (std::size_t i = 0; i < n; ++i) {
          const double* p = a + i * d;
          const std::size_t start = i_lo_excl ? i + 1 : 0;
          for (std::size_t ip = start; ip < n; ++ip) {
            const double* q = b + ip * d;
            double rsq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const double dx = p[c] - q[c];
              rsq += dx * dx;
            }
            acc += tab(std::sqrt(rsq));
          }
        }
        return acc;
      }
      case Mode::kDirect: {
        std::vector<double> dx(d);
        for (std::size_t i = 0; i < n; ++i) {
          const double* p = a + i * d;
          const std::size_t start = i_lo_excl ? i + 1 : 0;
          for (std::size_t ip = start; ip < n; ++ip) {
            const double* q = b + ip * d;
            for (std::size_t c = 0; c < d; ++c) dx[c] = p[c] - q[c];
            acc += kernel_(dx.data());
          }
        }
        return acc;
      }
    }
    return acc;
  };

  parallel_for(slots.size(), workers, [&](std::size_t s) {
    const auto [j, k] = slots[s];
    const double* a = mids + j * stride;
    const double* b = mids + k * stride;
    if (j == k) {
      partial[s] = gamma0_ * static_cast<double>(n) + 2.0 * pair_sum(a, b, 1);
    } else {
      partial[s] = 2.0 * pair_sum(a, b, 0);
    }
  });

  // Fixed reduction order keeps the result independent of the worker count.
  double total = 0.0;
  for (double p : partial) total += p;
  const double delta = e.grid().delta();
  return delta * delta * total;
}

double double_time_functional(const BrownianEnsemble& e,
                              const StationaryKernel& kernel,
                              std::optional<SingularPolicy> policy,
                              int workers) {
  StationaryKernel effective = kernel;
  if (policy) {
    effective = kernel.mollify(policy->mollify_eps.value_or(e.grid().delta()));
  } else if (kernel.singular_at_zero()) {
    throw SingularityError(
        "kernel diverges at zero separation; pass a singular-kernel policy");
  }
  const PairwiseFunctional f(effective, e.midpoint_diameter() * 1.0001 + 1e-9);
  return f(e, workers);
}

AtomAmplitudes spectral_amplitudes(
    const BrownianEnsemble& e, const std::vector<std::vector<double>>& freqs,
    int workers) {
  const std::size_t m = e.n_paths();
  const std::size_t n = e.grid().n;
  const std::size_t d = static_cast<std::size_t>(e.dim());
  const std::size_t na = freqs.size();
  for (const auto& f : freqs) {
    if (f.size() != d) throw ConfigError("frequency has wrong dimension");
  }
  const double* mids = e.midpoints_flat().data();
  std::vector<double> partial(m * 2 * na, 0.0);
  parallel_for(m, workers, [&](std::size_t j) {
    double* out = partial.data() + j * 2 * na;
    const double* path = mids + j * n * d;
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = path + i * d;
      for (std::size_t a = 0; a < na; ++a) {
        double phase = 0.0;
        for (std::size_t c = 0; c < d; ++c) phase += freqs[a][c] * p[c];
        out[2 * a] += std::cos(phase);
        out[2 * a + 1] += std::sin(phase);
      }
    }
  });
  AtomAmplitudes amp;
  amp.re.assign(na, 0.0);
  amp.im.assign(na, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double* in = partial.data() + j * 2 * na;
    for (std::size_t a = 0; a < na; ++a) {
      amp.re[a] += in[2 * a];
      amp.im[a] += in[2 * a + 1];
    }
  }
  const double delta = e.grid().delta();
  for (std::size_t a = 0; a < na; ++a) {
    amp.re[a] *= delta;
    amp.im[a] *= delta;
  }
  return amp;
}

double spectral_functional(const BrownianEnsemble& e,
                           const StationaryKernel& kernel, int workers) {
  if (!kernel.has_atoms()) {
    throw ConfigError("spectral functional needs a cosine-atom kernel");
  }
  if (e.dim() != kernel.dim()) {
    throw ConfigError("ensemble and kernel dimensions differ");
  }
  const std::vector<double> w = kernel.atom_weights();
  const AtomAmplitudes amp = spectral_amplitudes(e, kernel.atom_freqs(), workers);
  double s = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) s += w[a] * amp.power(a);
  return s;
}

}  // namespace pamlab
