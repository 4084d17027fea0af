#pragma once

// Stationary covariance kernels and their spectral data.
//
// The closed family: riesz |x|^-alpha, logplus log_+(T/|x|), truncpower
// (1 - |x|/M)_+^l, the level-s potential G_s, finite cosine sums, and the
// scale / mollify wrappers.  Fourier convention:
//     F(phi)(xi) = int e^{i xi . x} phi(x) dx,
// so every analytic spectral density carries a (2 pi)^-d factor.
// Mollification by the heat kernel p_eps equals damping the spectral measure
// by exp(-eps |xi|^2 / 2); nested mollifications collapse by the semigroup
// law eps1 + eps2 at construction time.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pamlab {

enum class KernelFamily {
  kRiesz,
  kLogPlus,
  kTruncPower,
  kBessel,
  kCosineAtoms,
  kScaled,
  kMollified,
};

// Radial spectral density: mu(dxi) = w(|xi|) dxi.  tail_exponent describes
// w(rho) ~ rho^-tail as rho -> inf (infinity after mollification).
struct SpectralDensity {
  std::function<double(double)> w;
  double tail_exponent = 0.0;
};

struct DalangReport {
  enum class Status { kFinite, kInfinite, kUnknown };
  Status status = Status::kUnknown;
  double value = 0.0;  // int (1 + |xi|^2)^-1 mu(dxi), meaningful when finite
  std::string note;
  bool finite() const { return status == Status::kFinite; }
};

struct GramReport {
  double min_eigenvalue = 0.0;
  double trace = 0.0;
  bool pass = false;
};

class StationaryKernel {
 public:
  // Constructors validate family constraints: riesz needs 0 < alpha < min(2,d),
  // truncpower needs l >= floor(d/2)+1 (the positive-definiteness threshold),
  // cosine atoms need strictly positive weights.
  static StationaryKernel riesz(double alpha, int dim);
  static StationaryKernel log_plus(double T, int dim);
  static StationaryKernel trunc_power(double l, double M, int dim);
  static StationaryKernel bessel(double s, int dim);
  static StationaryKernel cosine_atoms(std::vector<double> weights,
                                       std::vector<std::vector<double>> freqs,
                                       int dim);
  // gamma == c: a single cosine atom at xi = 0.
  static StationaryKernel constant(double c, int dim);

  int dim() const;
  KernelFamily family() const;
  // Family at the bottom of any scale / mollify chain.
  KernelFamily base_family() const;
  bool singular_at_zero() const;
  bool bounded() const { return !singular_at_zero(); }
  // True when point evaluation runs a quadrature (mollified radial chains
  // and the level-s potential); such kernels want a RadialEvaluator table
  // in hot loops.
  bool quadrature_backed() const;
  // gamma(0) for bounded kernels (also a uniform upper bound since every
  // member is positive definite).
  double sup_bound() const;

  // Radial evaluation.  Cosine-atom kernels are not radial; for them this is
  // the profile along the first axis.
  double at_radius(double r) const;
  double operator()(const double* dx) const;
  double operator()(const std::vector<double>& dx) const;

  StationaryKernel mollify(double eps) const;  // rejects eps <= 0
  StationaryKernel scale(double c) const;      // rejects c <= 0
  // x -> gamma(a x).  Exact within the family except for bessel.
  StationaryKernel dilate(double a) const;

  std::optional<SpectralDensity> spectral_density() const;

  // True when the kernel is a cosine sum (possibly scaled and/or mollified);
  // the accessors below return the flattened atoms with scale factors and
  // spectral damping folded into the weights.
  bool has_atoms() const;
  std::vector<double> atom_weights() const;
  const std::vector<std::vector<double>>& atom_freqs() const;

  DalangReport dalang_check() const;

  // Gram matrix of gamma on a point set; pass iff
  // min_eig >= -tol * trace.  Singular kernels must be mollified first and
  // the points must be pairwise distinct.
  GramReport gram_psd_check(const std::vector<std::vector<double>>& points,
                            double tol = 1e-8) const;

  // Flat config form, e.g. "family=riesz,alpha=0.5,dim=1[,eps=..][,scale=..]".
  std::string to_config() const;
  static StationaryKernel parse(const std::string& config);

  // Parameter accessors (meaningful per family; see kernels.cpp).
  double param_alpha() const;
  double param_T() const;
  double param_l() const;
  double param_M() const;
  double param_s() const;
  double scale_factor() const;        // accumulated over scaled wrappers
  double mollification_eps() const;   // accumulated over mollified wrappers
  const StationaryKernel base() const;  // wrapped kernel (scaled/mollified only)

  struct Node;  // representation detail, opaque outside kernels.cpp

 private:
  explicit StationaryKernel(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// Tabulated radial evaluation for hot loops.  Exact closed forms are used
// where available; mollified radial profiles are sampled by quadrature on a
// grid uniform in sqrt(r) and interpolated by a monotone cubic, with direct
// quadrature beyond r_max.  Not meaningful for cosine-atom kernels.
class RadialEvaluator {
 public:
  RadialEvaluator(const StationaryKernel& kernel, double r_max,
                  std::size_t table_size = 2048);
  double operator()(double r) const;
  bool tabulated() const { return !values_.empty(); }

 private:
  StationaryKernel kernel_;
  double u_max_ = 0.0;   // u = sqrt(r)
  double du_ = 0.0;
  std::vector<double> values_;
  std::vector<double> slopes_;  // d value / d u, monotone-limited
};

// The level-s potential by quadrature of the subordination integral
//   G_s(r) = (4 pi)^{-d/2} Gamma(s/2)^{-1}
//            int_0^inf t^{(s-d)/2 - 1} e^{-t - r^2/(4 t)} dt,
// normalized so that its spectral density is (2 pi)^{-d} (1+|xi|^2)^{-s/2}.
// Rejects r = 0 when s <= d (logarithmic or power singularity).
double bessel_G(double s, int dim, double r);

// Covariance k(x, y) = log_+(T/|x-y|) + g(x, y) with |g| <= g_sup.
class CovarianceKernel {
 public:
  using BoundedPart = std::function<double(const std::vector<double>&,
                                           const std::vector<double>&)>;

  CovarianceKernel(double T, int dim);  // g == 0
  CovarianceKernel(double T, int dim, BoundedPart g, double g_sup);

  double operator()(const std::vector<double>& x,
                    const std::vector<double>& y) const;
  double T() const { return T_; }
  int dim() const { return dim_; }
  double g_sup() const { return g_sup_; }
  bool g_is_zero() const { return !g_; }
  double g_eval(const std::vector<double>& x,
                const std::vector<double>& y) const;

 private:
  double T_;
  int dim_;
  BoundedPart g_;
  double g_sup_;
};

// Minimal C >= 0 with log_+(1/r) <= r^-alpha + C for all r > 0; the interior
// maximum of log(1/r) - r^-alpha is located by golden-section search.
double riesz_domination_constant(double alpha);

// Diagnostic ratios gamma(r) / log(1/r) for radii in (0, 1); identically 1
// for logplus with T = 1 below the correlation length.
std::vector<double> condition_h_ratios(const StationaryKernel& kernel,
                                       const std::vector<double>& radii);

// Gram assembly without the construction guard, for threshold-sharpness
// experiments with parameters the constructors reject.
GramReport gram_psd_raw(
    const std::function<double(const std::vector<double>&)>& gamma,
    const std::vector<std::vector<double>>& points, double tol = 1e-8);

}  // namespace pamlab
