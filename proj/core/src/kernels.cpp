#include "pamlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include <Eigen/Dense>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include "pamlab/errors.hpp"
#include "pamlab/quadrature.hpp"

namespace pamlab {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Half-width of the Gaussian window for mollification quadratures, in units
// of sqrt(eps); exp(-12^2/2) ~ 5e-32 is far below every tolerance in use.
constexpr double kWindowSigmas = 12.0;

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_int(long long v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld", v);
  return buf;
}

double surface_area(int d) {  // |S^{d-1}|
  return 2.0 * std::pow(kPi, 0.5 * d) / gsl_sf_gamma(0.5 * d);
}

// Radial heat kernel: gamma_eps(R) = int_0^inf gamma(r) K_d(r, R, eps) dr,
// obtained by integrating p_eps over the sphere of radius r.
double heat_radial_kernel(int d, double r, double R, double eps) {
  if (R < 1e-8 * std::sqrt(eps)) {
    return surface_area(d) * std::pow(2.0 * kPi * eps, -0.5 * d) *
           std::pow(r, d - 1) * std::exp(-r * r / (2.0 * eps));
  }
  const double dm = r - R;
  const double dp = r + R;
  switch (d) {
    case 1:
      return (std::exp(-dm * dm / (2.0 * eps)) +
              std::exp(-dp * dp / (2.0 * eps))) /
             std::sqrt(2.0 * kPi * eps);
    case 2:
      return (r / eps) * std::exp(-dm * dm / (2.0 * eps)) *
             gsl_sf_bessel_I0_scaled(r * R / eps);
    case 3:
      return std::pow(2.0 * kPi * eps, -1.5) * (2.0 * kPi * eps * r / R) *
             (std::exp(-dm * dm / (2.0 * eps)) -
              std::exp(-dp * dp / (2.0 * eps)));
    default: {
      const double nu = 0.5 * (d - 2);
      const double kappa = r * R / eps;
      return std::pow(r, d - 1) * std::pow(eps, -0.5 * d) *
             std::pow(kappa, -nu) * std::exp(-dm * dm / (2.0 * eps)) *
             gsl_sf_bessel_Inu_scaled(nu, kappa);
    }
  }
}

// Radial profile of the level-2 potential; used to evaluate the screened
// pairing int gamma(x) G_2(x) dx without a spectral density.
double g2_profile(int d, double r) {
  switch (d) {
    case 1:
      return 0.5 * std::exp(-r);
    case 2:
      return gsl_sf_bessel_K0(r) / (2.0 * kPi);
    case 3:
      return std::exp(-r) / (4.0 * kPi * r);
    default:
      return std::pow(2.0 * kPi, -0.5 * d) * std::pow(r, 1.0 - 0.5 * d) *
             gsl_sf_bessel_Knu(0.5 * d - 1.0, r);
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const std::vector<double>& a) { return dot(a, a); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double to_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError("bad numeric value for " + what + ": '" + s + "'");
  }
  return v;
}

int to_int(const std::string& s, const std::string& what) {
  const double v = to_double(s, what);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw ConfigError("expected integer for " + what + ": '" + s + "'");
  }
  return i;
}

}  // namespace

struct StationaryKernel::Node {
  KernelFamily fam;
  int dim = 1;
  double a = 0.0;    // riesz alpha | logplus T | truncpower M | bessel s
  double l = 0.0;    // truncpower exponent
  double factor = 1.0;  // scaled wrapper
  double eps = 0.0;     // mollified wrapper
  std::vector<double> w;
  std::vector<std::vector<double>> xi;
  std::shared_ptr<const Node> base;
};

namespace {

using Node = StationaryKernel::Node;

bool is_wrapper(const Node& n) {
  return n.fam == KernelFamily::kScaled || n.fam == KernelFamily::kMollified;
}

// Wrapper chains flatten exactly: scaling commutes with convolution and
// mollifications compose by eps-addition.
struct Flat {
  const Node* base = nullptr;  // family node at the bottom of the chain
  double scale = 1.0;
  double eps = 0.0;
};

Flat flatten(const Node& n) {
  Flat f;
  const Node* cur = &n;
  while (is_wrapper(*cur)) {
    f.scale *= cur->factor;
    f.eps += cur->eps;
    cur = cur->base.get();
  }
  f.base = cur;
  return f;
}

// Unscaled radial profile of a base family node; throws on the r = 0
// singularity instead of returning inf.
double base_profile(const Node& n, double r) {
  switch (n.fam) {
    case KernelFamily::kRiesz:
      if (r == 0.0) {
        throw SingularityError("kernel value diverges at zero separation");
      }
      return std::pow(r, -n.a);
    case KernelFamily::kLogPlus:
      if (r == 0.0) {
        throw SingularityError("kernel value diverges at zero separation");
      }
      return r >= n.a ? 0.0 : std::log(n.a / r);
    case KernelFamily::kTruncPower: {
      const double u = 1.0 - r / n.a;
      return u > 0.0 ? std::pow(u, n.l) : 0.0;
    }
    case KernelFamily::kBessel:
      return bessel_G(n.a, n.dim, r);
    case KernelFamily::kCosineAtoms: {
      double s = 0.0;
      for (std::size_t i = 0; i < n.w.size(); ++i) {
        s += n.w[i] * std::cos(n.xi[i][0] * r);
      }
      return s;
    }
    default:
      throw NumericalError("base_profile called on a wrapper node");
  }
}

// End of the support of the base profile, +inf for globally supported ones.
double support_end(const Node& base) {
  switch (base.fam) {
    case KernelFamily::kLogPlus:
    case KernelFamily::kTruncPower:
      return base.a;
    default:
      return std::numeric_limits<double>::infinity();
  }
}

double mollified_radial(const Flat& f, double R) {
  const double eps = f.eps;
  const double win = kWindowSigmas * std::sqrt(eps);
  const double lo = std::max(0.0, R - win);
  const double hi = std::min(R + win, support_end(*f.base));
  if (lo >= hi) return 0.0;
  quad::Options opt;
  opt.epsabs = 1e-14;
  opt.epsrel = 1e-10;
  const int d = f.base->dim;
  const Node* base = f.base;
  const auto integrand = [base, d, R, eps](double r) {
    return base_profile(*base, r) * heat_radial_kernel(d, r, R, eps);
  };
  return f.scale * quad::integrate(integrand, lo, hi, opt).value;
}

// Damped atom weights of a flattened cosine chain.
std::vector<double> flattened_atom_weights(const Flat& f) {
  std::vector<double> out(f.base->w.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f.scale * f.base->w[i] *
             std::exp(-0.5 * f.eps * norm_sq(f.base->xi[i]));
  }
  return out;
}

double node_at_radius(const Node& n, double r);

double node_eval(const Node& n, const double* dx) {
  switch (n.fam) {
    case KernelFamily::kCosineAtoms: {
      double s = 0.0;
      for (std::size_t i = 0; i < n.w.size(); ++i) {
        double phase = 0.0;
        for (int c = 0; c < n.dim; ++c) phase += n.xi[i][c] * dx[c];
        s += n.w[i] * std::cos(phase);
      }
      return s;
    }
    case KernelFamily::kScaled:
      return n.factor * node_eval(*n.base, dx);
    case KernelFamily::kMollified: {
      const Flat f = flatten(n);
      if (f.base->fam == KernelFamily::kCosineAtoms) {
        const std::vector<double> w = flattened_atom_weights(f);
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          double phase = 0.0;
          for (int c = 0; c < n.dim; ++c) phase += f.base->xi[i][c] * dx[c];
          s += w[i] * std::cos(phase);
        }
        return s;
      }
      double rsq = 0.0;
      for (int c = 0; c < n.dim; ++c) rsq += dx[c] * dx[c];
      return mollified_radial(f, std::sqrt(rsq));
    }
    default: {
      double rsq = 0.0;
      for (int c = 0; c < n.dim; ++c) rsq += dx[c] * dx[c];
      return base_profile(n, std::sqrt(rsq));
    }
  }
}

double node_at_radius(const Node& n, double r) {
  switch (n.fam) {
    case KernelFamily::kScaled:
      return n.factor * node_at_radius(*n.base, r);
    case KernelFamily::kMollified: {
      const Flat f = flatten(n);
      if (f.base->fam == KernelFamily::kCosineAtoms) {
        const std::vector<double> w = flattened_atom_weights(f);
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          s += w[i] * std::cos(f.base->xi[i][0] * r);
        }
        return s;
      }
      return mollified_radial(f, r);
    }
    default:
      return base_profile(n, r);
  }
}

bool node_singular(const Node& n) {
  switch (n.fam) {
    case KernelFamily::kRiesz:
    case KernelFamily::kLogPlus:
      return true;
    case KernelFamily::kBessel:
      return n.a <= n.dim;
    case KernelFamily::kScaled:
      return node_singular(*n.base);
    default:
      return false;  // truncpower, atoms, mollified
  }
}

const Node& family_node(const Node& n) {
  const Node* cur = &n;
  while (is_wrapper(*cur)) cur = cur->base.get();
  return *cur;
}

}  // namespace

StationaryKernel::StationaryKernel(std::shared_ptr<const Node> node)
    : node_(std::move(node)) {}

StationaryKernel StationaryKernel::riesz(double alpha, int dim) {
  if (dim < 1) throw ConfigError("kernel dimension must be >= 1");
  if (!(alpha > 0.0) || !(alpha < std::min(2.0, static_cast<double>(dim)))) {
    throw ConfigError("riesz exponent must satisfy 0 < alpha < min(2, dim)");
  }
  auto n = std::make_shared<Node>();
  n->fam = KernelFamily::kRiesz;
  n->dim = dim;
  n->a = alpha;
  return StationaryKernel(std::move(n));
}

StationaryKernel StationaryKernel::log_plus(double T, int dim) {
  if (dim < 1) throw ConfigError("kernel dimension must be >= 1");
  if (!(T > 0.0)) throw ConfigError("correlation length T must be positive");
  auto n = std::make_shared<Node>();
  n->fam = KernelFamily::kLogPlus;
  n->dim = dim;
  n->a = T;
  return StationaryKernel(std::move(n));
}

StationaryKernel StationaryKernel::trunc_power(double l, double M, int dim) {
  if (dim < 1) throw ConfigError("kernel dimension must be >= 1");
  if (!(M > 0.0)) throw ConfigError("support radius M must be positive");
  const double threshold = std::floor(dim / 2.0) + 1.0;
  if (!(l >= threshold)) {
    throw ConfigError(
        "truncated power exponent l = " + fmt_g(l) +
        " is below the positive-definiteness threshold floor(d/2)+1 = " +
        fmt_g(threshold));
  }
  auto n = std::make_shared<Node>();
  n->fam = KernelFamily::kTruncPower;
  n->dim = dim;
  n->a = M;
  n->l = l;
  return StationaryKernel(std::move(n));
}

StationaryKernel StationaryKernel::bessel(double s, int dim) {
  if (dim < 1) throw ConfigError("kernel dimension must be >= 1");
  if (!(s > 0.0)) throw ConfigError("potential level s must be positive");
  auto n = std::make_shared<Node>();
  n->fam = KernelFamily::kBessel;
  n->dim = dim;
  n->a = s;
  return StationaryKernel(std::move(n));
}

StationaryKernel StationaryKernel::cosine_atoms(
    std::vector<double> weights, std::vector<std::vector<double>> freqs,
    int dim) {
  if (dim < 1) throw ConfigError("kernel dimension must be >= 1");
  if (weights.empty() || weights.size() != freqs.size()) {
    throw ConfigError("cosine atoms need matching nonempty weight/frequency lists");
  }
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("cosine atom weights must be positive");
  }
  for (const auto& f : freqs) {
    if (static_cast<int>(f.size()) != dim) {
      throw ConfigError("cosine atom frequency has wrong dimension");
    }
  }
  auto n = std::make_shared<Node>();
  n->fam = KernelFamily::kCosineAtoms;
  n->dim = dim;
  n->w = std::move(weights);
  n->xi = std::move(freqs);
  return StationaryKernel(std::move(n));
}

StationaryKernel StationaryKernel::constant(double c, int dim) {
  return cosine_atoms({c}, {std::vector<double>(dim, 0.0)}, dim);
}

int StationaryKernel::dim() const { return node_->dim; }
KernelFamily StationaryKernel::family() const { return node_->fam; }

KernelFamily StationaryKernel::base_family() const {
  return family_node(*node_).fam;
}
bool StationaryKernel::singular_at_zero() const { return node_singular(*node_); }

bool StationaryKernel::quadrature_backed() const {
  const Flat f = flatten(*node_);
  if (f.base->fam == KernelFamily::kBessel) return true;
  return f.eps > 0.0 && f.base->fam != KernelFamily::kCosineAtoms;
}

double StationaryKernel::sup_bound() const {
  if (singular_at_zero()) {
    throw ConfigError("kernel is unbounded; sup_bound needs a mollification");
  }
  return at_radius(0.0);
}

double StationaryKernel::at_radius(double r) const {
  if (r < 0.0) throw ConfigError("radius must be nonnegative");
  return node_at_radius(*node_, r);
}

double StationaryKernel::operator()(const double* dx) const {
  return node_eval(*node_, dx);
}

double StationaryKernel::operator()(const std::vector<double>& dx) const {
  if (static_cast<int>(dx.size()) != node_->dim) {
    throw ConfigError("separation vector has wrong dimension");
  }
  return node_eval(*node_, dx.data());
}

StationaryKernel StationaryKernel::mollify(double eps) const {
  if (!(eps > 0.0)) throw ConfigError("mollification eps must be positive");
  auto n = std::make_shared<Node>();
  n->fam = KernelFamily::kMollified;
  n->dim = node_->dim;
  if (node_->fam == KernelFamily::kMollified) {
    n->eps = node_->eps + eps;  // heat semigroup
    n->base = node_->base;
  } else {
    n->eps = eps;
    n->base = node_;
  }
  return StationaryKernel(std::move(n));
}

StationaryKernel StationaryKernel::scale(double c) const {
  if (!(c > 0.0)) throw ConfigError("scale factor must be positive");
  auto n = std::make_shared<Node>();
  n->fam = KernelFamily::kScaled;
  n->dim = node_->dim;
  n->factor = c;
  n->base = node_;
  return StationaryKernel(std::move(n));
}

StationaryKernel StationaryKernel::dilate(double a) const {
  if (!(a > 0.0)) throw ConfigError("dilation factor must be positive");
  const Node& n = *node_;
  switch (n.fam) {
    case KernelFamily::kRiesz:
      return riesz(n.a, n.dim).scale(std::pow(a, -n.a));
    case KernelFamily::kLogPlus:
      return log_plus(n.a / a, n.dim);
    case KernelFamily::kTruncPower:
      return trunc_power(n.l, n.a / a, n.dim);
    case KernelFamily::kBessel:
      throw ConfigError("the level-s potential has no in-family dilation");
    case KernelFamily::kCosineAtoms: {
      std::vector<std::vector<double>> xi = n.xi;
      for (auto& f : xi) {
        for (double& c : f) c *= a;
      }
      return cosine_atoms(n.w, std::move(xi), n.dim);
    }
    case KernelFamily::kScaled:
      return StationaryKernel(n.base).dilate(a).scale(n.factor);
    case KernelFamily::kMollified:
      return StationaryKernel(n.base).dilate(a).mollify(n.eps / (a * a));
  }
  throw NumericalError("unreachable kernel family");
}

std::optional<SpectralDensity> StationaryKernel::spectral_density() const {
  const Flat f = flatten(*node_);
  const int d = f.base->dim;
  const double eps = f.eps;
  switch (f.base->fam) {
    case KernelFamily::kRiesz: {
      const double alpha = f.base->a;
      const double c = f.scale * std::pow(2.0, -alpha) *
                       std::pow(kPi, -0.5 * d) *
                       gsl_sf_gamma(0.5 * (d - alpha)) /
                       gsl_sf_gamma(0.5 * alpha);
      SpectralDensity sd;
      sd.w = [c, alpha, d, eps](double rho) {
        return c * std::pow(rho, alpha - d) *
               std::exp(-0.5 * eps * rho * rho);
      };
      sd.tail_exponent =
          eps > 0.0 ? std::numeric_limits<double>::infinity() : d - alpha;
      return sd;
    }
    case KernelFamily::kBessel: {
      const double s = f.base->a;
      const double c = f.scale * std::pow(2.0 * kPi, -d);
      SpectralDensity sd;
      sd.w = [c, s, eps](double rho) {
        return c * std::pow(1.0 + rho * rho, -0.5 * s) *
               std::exp(-0.5 * eps * rho * rho);
      };
      sd.tail_exponent =
          eps > 0.0 ? std::numeric_limits<double>::infinity() : s;
      return sd;
    }
    default:
      return std::nullopt;
  }
}

bool StationaryKernel::has_atoms() const {
  return family_node(*node_).fam == KernelFamily::kCosineAtoms;
}

std::vector<double> StationaryKernel::atom_weights() const {
  const Flat f = flatten(*node_);
  if (f.base->fam != KernelFamily::kCosineAtoms) {
    throw ConfigError("kernel has no cosine atoms");
  }
  return flattened_atom_weights(f);
}

const std::vector<std::vector<double>>& StationaryKernel::atom_freqs() const {
  const Node& base = family_node(*node_);
  if (base.fam != KernelFamily::kCosineAtoms) {
    throw ConfigError("kernel has no cosine atoms");
  }
  return base.xi;
}

DalangReport StationaryKernel::dalang_check() const {
  const Flat f = flatten(*node_);
  const int d = f.base->dim;
  DalangReport rep;
  switch (f.base->fam) {
    case KernelFamily::kCosineAtoms: {
      const std::vector<double> w = flattened_atom_weights(f);
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        s += w[i] / (1.0 + norm_sq(f.base->xi[i]));
      }
      rep.status = DalangReport::Status::kFinite;
      rep.value = s;
      rep.note = "exact sum over spectral atoms";
      return rep;
    }
    case KernelFamily::kLogPlus:
      rep.status = DalangReport::Status::kUnknown;
      rep.note = "no spectral data for this kernel";
      return rep;
    case KernelFamily::kTruncPower: {
      // Screened pairing int gamma(x) G_2(x) dx, equal to the spectral
      // integral whenever the kernel is positive definite.
      const double hi =
          f.base->a + (f.eps > 0.0 ? kWindowSigmas * std::sqrt(f.eps) : 0.0);
      quad::Options opt;
      opt.epsrel = 1e-9;
      opt.epsabs = 1e-13;
      const Node* self = node_.get();
      const auto integrand = [self, d](double r) {
        return node_at_radius(*self, r) * g2_profile(d, r) *
               std::pow(r, d - 1);
      };
      rep.status = DalangReport::Status::kFinite;
      rep.value = surface_area(d) * quad::integrate(integrand, 0.0, hi, opt).value;
      rep.note = "computed by pairing against the level-2 potential";
      return rep;
    }
    default: {
      const std::optional<SpectralDensity> sd = spectral_density();
      if (!sd) {
        rep.status = DalangReport::Status::kUnknown;
        rep.note = "no spectral data for this kernel";
        return rep;
      }
      if (sd->tail_exponent <= d - 2) {
        rep.status = DalangReport::Status::kInfinite;
        rep.note = "spectral tail exponent " + fmt_g(sd->tail_exponent) +
                   " is at or below dim - 2";
        return rep;
      }
      quad::Options opt;
      opt.epsrel = 1e-10;
      opt.epsabs = 1e-14;
      const auto w = sd->w;
      const auto inner = [w, d](double rho) {
        return std::pow(rho, d - 1) * w(rho) / (1.0 + rho * rho);
      };
      const auto outer = [w, d](double u) {  // rho = 1/u
        return std::pow(u, 1.0 - d) * w(1.0 / u) / (1.0 + u * u);
      };
      rep.status = DalangReport::Status::kFinite;
      rep.value = surface_area(d) * (quad::integrate(inner, 0.0, 1.0, opt).value +
                                     quad::integrate(outer, 0.0, 1.0, opt).value);
      rep.note = "radial spectral quadrature";
      return rep;
    }
  }
}

GramReport StationaryKernel::gram_psd_check(
    const std::vector<std::vector<double>>& points, double tol) const {
  if (singular_at_zero()) {
    throw ConfigError(
        "kernel is singular at zero separation; mollify before a Gram check");
  }
  if (points.empty()) throw ConfigError("Gram check needs at least one point");
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != node_->dim) {
      throw ConfigError("Gram point has wrong dimension");
    }
  }
  const StationaryKernel& self = *this;
  return gram_psd_raw(
      [&self](const std::vector<double>& diff) { return self(diff); }, points,
      tol);
}

std::string StationaryKernel::to_config() const {
  const Flat f = flatten(*node_);
  const Node& b = *f.base;
  std::string out;
  switch (b.fam) {
    case KernelFamily::kRiesz:
      out = "family=riesz,alpha=" + fmt_g(b.a);
      break;
    case KernelFamily::kLogPlus:
      out = "family=logplus,T=" + fmt_g(b.a);
      break;
    case KernelFamily::kTruncPower:
      out = "family=truncpower,l=" + fmt_g(b.l) + ",M=" + fmt_g(b.a);
      break;
    case KernelFamily::kBessel:
      out = "family=bessel,s=" + fmt_g(b.a);
      break;
    case KernelFamily::kCosineAtoms: {
      out = "family=atoms";
      std::string ws;
      std::string xis;
      for (std::size_t i = 0; i < b.w.size(); ++i) {
        if (i) {
          ws += ';';
          xis += ';';
        }
        ws += fmt_g(b.w[i]);
        for (int c = 0; c < b.dim; ++c) {
          if (c) xis += ':';
          xis += fmt_g(b.xi[i][c]);
        }
      }
      out += ",w=" + ws + ",xi=" + xis;
      break;
    }
    default:
      throw NumericalError("unreachable kernel family");
  }
  out += ",dim=" + fmt_int(b.dim);
  if (f.eps > 0.0) out += ",eps=" + fmt_g(f.eps);
  if (f.scale != 1.0) out += ",scale=" + fmt_g(f.scale);
  return out;
}

StationaryKernel StationaryKernel::parse(const std::string& config) {
  std::vector<std::pair<std::string, std::string>> kv;
  for (const std::string& tok : split(config, ',')) {
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("bad kernel config token: '" + tok + "'");
    }
    kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  std::set<std::string> seen;
  for (const auto& [k, v] : kv) {
    if (!seen.insert(k).second) {
      throw ConfigError("duplicate kernel config key: " + k);
    }
  }
  std::set<std::string> used;
  const auto get = [&kv, &used](const std::string& key) -> const std::string* {
    for (const auto& [k, v] : kv) {
      if (k == key) {
        used.insert(key);
        return &v;
      }
    }
    return nullptr;
  };
  const auto require = [&get](const std::string& key) -> const std::string& {
    const std::string* v = get(key);
    if (!v) throw ConfigError("missing kernel config key: " + key);
    return *v;
  };

  const std::string family = require("family");
  const int dim = to_int(require("dim"), "dim");
  StationaryKernel k = [&]() -> StationaryKernel {
    if (family == "riesz") {
      return riesz(to_double(require("alpha"), "alpha"), dim);
    }
    if (family == "logplus") {
      return log_plus(to_double(require("T"), "T"), dim);
    }
    if (family == "truncpower") {
      return trunc_power(to_double(require("l"), "l"),
                         to_double(require("M"), "M"), dim);
    }
    if (family == "bessel") {
      return bessel(to_double(require("s"), "s"), dim);
    }
    if (family == "atoms") {
      std::vector<double> w;
      for (const std::string& t : split(require("w"), ';')) {
        w.push_back(to_double(t, "atom weight"));
      }
      std::vector<std::vector<double>> xi;
      for (const std::string& t : split(require("xi"), ';')) {
        std::vector<double> f;
        for (const std::string& c : split(t, ':')) {
          f.push_back(to_double(c, "atom frequency"));
        }
        xi.push_back(std::move(f));
      }
      return cosine_atoms(std::move(w), std::move(xi), dim);
    }
    throw ConfigError("unknown kernel family: '" + family + "'");
  }();
  if (const std::string* eps = get("eps")) {
    k = k.mollify(to_double(*eps, "eps"));
  }
  if (const std::string* sc = get("scale")) {
    k = k.scale(to_double(*sc, "scale"));
  }
  for (const auto& [key, value] : kv) {
    if (!used.count(key)) {
      throw ConfigError("unknown kernel config key: " + key);
    }
  }
  return k;
}

double StationaryKernel::param_alpha() const {
  const Node& b = family_node(*node_);
  if (b.fam != KernelFamily::kRiesz) {
    throw ConfigError("alpha is only defined for the riesz family");
  }
  return b.a;
}

double StationaryKernel::param_T() const {
  const Node& b = family_node(*node_);
  if (b.fam != KernelFamily::kLogPlus) {
    throw ConfigError("T is only defined for the logplus family");
  }
  return b.a;
}

double StationaryKernel::param_l() const {
  const Node& b = family_node(*node_);
  if (b.fam != KernelFamily::kTruncPower) {
    throw ConfigError("l is only defined for the truncpower family");
  }
  return b.l;
}

double StationaryKernel::param_M() const {
  const Node& b = family_node(*node_);
  if (b.fam != KernelFamily::kTruncPower) {
    throw ConfigError("M is only defined for the truncpower family");
  }
  return b.a;
}

double StationaryKernel::param_s() const {
  const Node& b = family_node(*node_);
  if (b.fam != KernelFamily::kBessel) {
    throw ConfigError("s is only defined for the bessel family");
  }
  return b.a;
}

double StationaryKernel::scale_factor() const { return flatten(*node_).scale; }

double StationaryKernel::mollification_eps() const {
  return flatten(*node_).eps;
}

const StationaryKernel StationaryKernel::base() const {
  if (!is_wrapper(*node_)) {
    throw ConfigError("kernel has no wrapped base");
  }
  return StationaryKernel(node_->base);
}

RadialEvaluator::RadialEvaluator(const StationaryKernel& kernel, double r_max,
                                 std::size_t table_size)
    : kernel_(kernel) {
  if (!(r_max > 0.0)) throw ConfigError("r_max must be positive");
  if (kernel.singular_at_zero()) return;  // direct evaluation only
  const std::size_t n = std::max<std::size_t>(table_size, 8);
  u_max_ = std::sqrt(r_max);
  du_ = u_max_ / static_cast<double>(n - 1);
  values_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) * du_;
    values_[i] = kernel_.at_radius(u * u);
  }
  // Steffen's monotone slope limiter on the uniform u-grid.
  slopes_.assign(n, 0.0);
  std::vector<double> sec(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    sec[i] = (values_[i + 1] - values_[i]) / du_;
  }
  const auto limit_end = [](double p, double s) {
    if (p * s <= 0.0) return 0.0;
    if (std::fabs(p) > 2.0 * std::fabs(s)) return 2.0 * s;
    return p;
  };
  slopes_[0] = limit_end(1.5 * sec[0] - 0.5 * sec[1], sec[0]);
  slopes_[n - 1] = limit_end(1.5 * sec[n - 2] - 0.5 * sec[n - 3], sec[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double a = sec[i - 1];
    const double b = sec[i];
    if (a * b <= 0.0) {
      slopes_[i] = 0.0;
    } else {
      const double p = 0.5 * (a + b);
      const double cap = 2.0 * std::min(std::fabs(a), std::fabs(b));
      slopes_[i] = std::copysign(std::min(std::fabs(p), cap), a);
    }
  }
}

double RadialEvaluator::operator()(double r) const {
  if (values_.empty()) return kernel_.at_radius(r);
  const double u = std::sqrt(r);
  if (u >= u_max_) return kernel_.at_radius(r);
  const std::size_t n = values_.size();
  std::size_t i = static_cast<std::size_t>(u / du_);
  if (i >= n - 1) i = n - 2;
  const double t = (u - static_cast<double>(i) * du_) / du_;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * values_[i] + h10 * du_ * slopes_[i] + h01 * values_[i + 1] +
         h11 * du_ * slopes_[i + 1];
}

double bessel_G(double s, int dim, double r) {
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  if (!(s > 0.0)) throw ConfigError("potential level s must be positive");
  if (r < 0.0) throw ConfigError("radius must be nonnegative");
  const double d = static_cast<double>(dim);
  const double pref = std::pow(4.0 * kPi, -0.5 * d) / gsl_sf_gamma(0.5 * s);
  if (r == 0.0) {
    if (s <= d) {
      throw SingularityError("the level-s potential diverges at zero for s <= dim");
    }
    return pref * gsl_sf_gamma(0.5 * (s - d));
  }
  const double p = 0.5 * (s - d) - 1.0;
  const double q = 0.25 * r * r;
  const auto integrand = [p, q](double t) {
    return std::pow(t, p) * std::exp(-t - q / t);
  };
  quad::Options opt;
  opt.epsrel = 1e-11;
  opt.epsabs = 1e-300;  // the integral itself can be exponentially small
  const double head = quad::integrate(integrand, 0.0, 1.0, opt).value;
  const double tail = quad::integrate_to_inf(integrand, 1.0, opt).value;
  return pref * (head + tail);
}

CovarianceKernel::CovarianceKernel(double T, int dim)
    : T_(T), dim_(dim), g_(nullptr), g_sup_(0.0) {
  if (dim < 1) throw ConfigError("covariance dimension must be >= 1");
  if (!(T > 0.0)) throw ConfigError("correlation length T must be positive");
}

CovarianceKernel::CovarianceKernel(double T, int dim, BoundedPart g,
                                   double g_sup)
    : T_(T), dim_(dim), g_(std::move(g)), g_sup_(g_sup) {
  if (dim < 1) throw ConfigError("covariance dimension must be >= 1");
  if (!(T > 0.0)) throw ConfigError("correlation length T must be positive");
  if (!g_) throw ConfigError("bounded part must be callable");
  if (!(g_sup >= 0.0)) throw ConfigError("bounded-part sup must be nonnegative");
}

double CovarianceKernel::operator()(const std::vector<double>& x,
                                    const std::vector<double>& y) const {
  if (static_cast<int>(x.size()) != dim_ ||
      static_cast<int>(y.size()) != dim_) {
    throw ConfigError("covariance arguments have wrong dimension");
  }
  double rsq = 0.0;
  for (int c = 0; c < dim_; ++c) {
    const double d = x[c] - y[c];
    rsq += d * d;
  }
  if (rsq == 0.0) {
    throw SingularityError("covariance diverges at coincident points");
  }
  const double r = std::sqrt(rsq);
  const double lp = r >= T_ ? 0.0 : std::log(T_ / r);
  return lp + (g_ ? g_(x, y) : 0.0);
}

double CovarianceKernel::g_eval(const std::vector<double>& x,
                                const std::vector<double>& y) const {
  return g_ ? g_(x, y) : 0.0;
}

double riesz_domination_constant(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 2.0)) {
    throw ConfigError("domination constant needs 0 < alpha < 2");
  }
  // Maximize f(y) = -y - exp(-alpha y) over y = log r <= 0; f is unimodal
  // with its peak at log(alpha)/alpha, so expand the bracket geometrically
  // until the peak is enclosed, then refine by golden section.
  const auto f = [alpha](double y) { return -y - std::exp(-alpha * y); };
  double outer = 0.0;
  double mid = -1.0;
  if (f(mid) <= f(outer)) {
    const quad::MaxResult m = quad::golden_max(f, mid, 0.0, 1e-13);
    return std::max(0.0, std::max(m.value, f(0.0)));
  }
  double deep = 2.0 * mid - 1.0;
  while (f(deep) > f(mid) && deep > -1e12) {
    outer = mid;
    mid = deep;
    deep = 2.0 * deep - 1.0;
  }
  const quad::MaxResult m = quad::golden_max(f, deep, outer, 1e-13);
  return std::max(0.0, m.value);
}

std::vector<double> condition_h_ratios(const StationaryKernel& kernel,
                                       const std::vector<double>& radii) {
  std::vector<double> out;
  out.reserve(radii.size());
  for (double r : radii) {
    if (!(r > 0.0) || !(r < 1.0)) {
      throw ConfigError("condition ratios need radii strictly inside (0, 1)");
    }
    out.push_back(kernel.at_radius(r) / std::log(1.0 / r));
  }
  return out;
}

GramReport gram_psd_raw(
    const std::function<double(const std::vector<double>&)>& gamma,
    const std::vector<std::vector<double>>& points, double tol) {
  if (points.empty()) throw ConfigError("Gram check needs at least one point");
  if (!(tol >= 0.0)) throw ConfigError("Gram tolerance must be nonnegative");
  const std::size_t n = points.size();
  Eigen::MatrixXd G(n, n);
  std::vector<double> diff(points[0].size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t c = 0; c < diff.size(); ++c) {
        diff[c] = points[i][c] - points[j][c];
      }
      const double v = gamma(diff);
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G,
                                                    Eigen::EigenvaluesOnly);
  GramReport rep;
  rep.min_eigenvalue = es.eigenvalues().minCoeff();
  rep.trace = G.trace();
  rep.pass = rep.min_eigenvalue >= -tol * rep.trace;
  return rep;
}

}  // namespace pamlab
