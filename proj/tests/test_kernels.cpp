#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "pamlab/errors.hpp"
#include "pamlab/kernels.hpp"
#include "pamlab/rng.hpp"

using namespace pamlab;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<std::vector<double>> random_points(std::uint64_t seed,
                                               std::size_t count, int dim,
                                               double half_width) {
  rng::Stream gen{seed};
  std::vector<std::vector<double>> pts(count, std::vector<double>(dim));
  std::size_t k = 0;
  for (auto& p : pts) {
    for (double& c : p) c = half_width * (2.0 * gen.uniform(k++) - 1.0);
  }
  return pts;
}

}  // namespace

TEST_CASE("riesz values and flags") {
  const StationaryKernel k = StationaryKernel::riesz(0.5, 2);
  CHECK(k.dim() == 2);
  CHECK(k.singular_at_zero());
  CHECK(!k.bounded());
  CHECK(k.at_radius(4.0) == doctest::Approx(0.5).epsilon(1e-14));
  const std::vector<double> x = {3.0, 4.0};
  CHECK(k(x) == doctest::Approx(std::pow(5.0, -0.5)).epsilon(1e-14));
}

TEST_CASE("logplus is log(T/r) capped at zero") {
  const StationaryKernel k = StationaryKernel::log_plus(2.0, 1);
  CHECK(k.singular_at_zero());
  CHECK(k.at_radius(2.0) == 0.0);
  CHECK(k.at_radius(3.0) == 0.0);
  CHECK(k.at_radius(0.5) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("truncated power respects the smoothness threshold") {
  const StationaryKernel k = StationaryKernel::trunc_power(2.0, 1.5, 3);
  CHECK(k.bounded());
  CHECK(!k.singular_at_zero());
  CHECK(k.at_radius(0.0) == 1.0);
  CHECK(k.at_radius(1.5) == 0.0);
  CHECK(k.at_radius(0.75) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(k.sup_bound() == doctest::Approx(1.0));
  // l below floor(d/2) + 1 is rejected: such profiles need not be positive
  // definite.
  CHECK_THROWS_AS(StationaryKernel::trunc_power(1.0, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(StationaryKernel::trunc_power(1.0, 1.0, 2), ConfigError);
}

TEST_CASE("bessel kernels match their closed forms") {
  // d=1, s=2: e^-r / 2.
  for (double r : {0.1, 0.5, 1.0, 2.5}) {
    CHECK(bessel_G(2.0, 1, r) ==
          doctest::Approx(0.5 * std::exp(-r)).epsilon(1e-8));
  }
  // d=1, s=4: e^-r (1 + r) / 4.
  for (double r : {0.2, 1.0, 3.0}) {
    CHECK(bessel_G(4.0, 1, r) ==
          doctest::Approx(0.25 * std::exp(-r) * (1.0 + r)).epsilon(1e-8));
  }
  // d=3, s=2: the Yukawa potential e^-r / (4 pi r).
  for (double r : {0.25, 1.0, 2.0}) {
    CHECK(bessel_G(2.0, 3, r) ==
          doctest::Approx(std::exp(-r) / (4.0 * kPi * r)).epsilon(1e-8));
  }
  const StationaryKernel k = StationaryKernel::bessel(2.0, 3);
  CHECK(k.singular_at_zero());
  CHECK(k.at_radius(1.0) ==
        doctest::Approx(std::exp(-1.0) / (4.0 * kPi)).epsilon(1e-8));
  CHECK(!StationaryKernel::bessel(2.0, 1).singular_at_zero());
}

TEST_CASE("cosine atoms evaluate as a weighted cosine sum") {
  const std::vector<double> w = {0.6, 0.4};
  const std::vector<std::vector<double>> xi = {{1.0, -0.5}, {2.5, 0.25}};
  const StationaryKernel k = StationaryKernel::cosine_atoms(w, xi, 2);
  CHECK(k.has_atoms());
  CHECK(k.bounded());
  CHECK(k.sup_bound() == doctest::Approx(1.0));
  rng::Stream gen{31};
  for (std::size_t i = 0; i < 20; ++i) {
    const std::vector<double> x = {4.0 * gen.uniform(2 * i) - 2.0,
                                   4.0 * gen.uniform(2 * i + 1) - 2.0};
    double want = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
      want += w[a] * std::cos(xi[a][0] * x[0] + xi[a][1] * x[1]);
    }
    CHECK(k(x) == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("constant kernel is a zero-frequency atom") {
  const StationaryKernel k = StationaryKernel::constant(0.7, 3);
  CHECK(k.has_atoms());
  CHECK(k.at_radius(0.0) == doctest::Approx(0.7));
  CHECK(k.at_radius(5.0) == doctest::Approx(0.7));
}

TEST_CASE("parse round-trips every family") {
  const std::vector<StationaryKernel> kernels = {
      StationaryKernel::riesz(0.5, 1),
      StationaryKernel::log_plus(1.5, 2),
      StationaryKernel::trunc_power(2.0, 3.0, 2),
      StationaryKernel::bessel(3.0, 2),
      StationaryKernel::cosine_atoms({0.6, 0.4}, {{1.0}, {2.5}}, 1),
      StationaryKernel::riesz(0.5, 1).mollify(0.25),
      StationaryKernel::log_plus(1.0, 1).scale(2.5),
      StationaryKernel::trunc_power(2.0, 1.0, 1).scale(0.5).mollify(0.1),
  };
  for (const StationaryKernel& k : kernels) {
    const StationaryKernel back = StationaryKernel::parse(k.to_config());
    CHECK(back.dim() == k.dim());
    CHECK(back.to_config() == k.to_config());
    for (double r : {0.3, 0.9, 1.7}) {
      CHECK(back.at_radius(r) == doctest::Approx(k.at_radius(r)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(StationaryKernel::parse("family=nope,dim=1"), ConfigError);
  CHECK_THROWS_AS(StationaryKernel::parse("riesz"), ConfigError);
}

TEST_CASE("wrappers flatten exactly") {
  const StationaryKernel base = StationaryKernel::riesz(0.5, 1);
  const StationaryKernel m = base.mollify(0.2).mollify(0.3);
  CHECK(m.mollification_eps() == doctest::Approx(0.5).epsilon(1e-15));
  const StationaryKernel s = base.scale(2.0).scale(3.0);
  CHECK(s.scale_factor() == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(s.at_radius(0.7) ==
        doctest::Approx(6.0 * base.at_radius(0.7)).epsilon(1e-14));
  CHECK_THROWS_AS(base.mollify(0.0), ConfigError);
  CHECK_THROWS_AS(base.mollify(-1.0), ConfigError);
  CHECK_THROWS_AS(base.scale(0.0), ConfigError);
}

TEST_CASE("dilate stays inside the family") {
  const StationaryKernel r = StationaryKernel::riesz(0.5, 1).dilate(4.0);
  // |a x|^-alpha = a^-alpha |x|^-alpha.
  CHECK(r.at_radius(1.0) == doctest::Approx(0.5).epsilon(1e-13));
  const StationaryKernel l = StationaryKernel::log_plus(2.0, 1).dilate(2.0);
  // log_+(T / (a r)) = log_+((T/a) / r).
  CHECK(l.at_radius(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-13));
  CHECK(l.at_radius(1.0) == 0.0);
}

TEST_CASE("heat smoothing of the riesz kernel has the exact peak value") {
  // (p_eps * |.|^-alpha)(0) = eps^(-alpha/2) E|Z|^-alpha in one dimension.
  for (double alpha : {0.3, 0.5}) {
    for (double eps : {1.0, 0.25}) {
      const double want =
          std::pow(eps, -0.5 * alpha) * oracle::abs_normal_neg_moment(alpha);
      const double got =
          StationaryKernel::riesz(alpha, 1).mollify(eps).at_radius(0.0);
      CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
  }
  // Frozen anchor for the alpha = 1/2, eps = 1 peak.
  CHECK(StationaryKernel::riesz(0.5, 1).mollify(1.0).at_radius(0.0) ==
        doctest::Approx(1.7200799746490391).epsilon(1e-9));
}

TEST_CASE("heat smoothing lowers the logplus peak as the width grows") {
  const StationaryKernel base = StationaryKernel::log_plus(1.0, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.05, 0.1, 0.2, 0.4}) {
    const double peak = base.mollify(eps).at_radius(0.0);
    CHECK(std::isfinite(peak));
    CHECK(peak > 0.0);
    CHECK(peak < prev);
    prev = peak;
  }
}

TEST_CASE("riesz spectral density carries the exact constant") {
  // c(d=1, alpha=1/2) = 1 / sqrt(2 pi).
  const auto sd = StationaryKernel::riesz(0.5, 1).spectral_density();
  REQUIRE(sd.has_value());
  CHECK(sd->tail_exponent == doctest::Approx(0.5));
  const double c = 1.0 / std::sqrt(2.0 * kPi);
  for (double rho : {0.5, 1.0, 4.0}) {
    CHECK(sd->w(rho) ==
          doctest::Approx(c * std::pow(rho, -0.5)).epsilon(1e-12));
  }
}

TEST_CASE("bessel spectral density is the damped power law") {
  const auto sd = StationaryKernel::bessel(3.0, 2).spectral_density();
  REQUIRE(sd.has_value());
  const double c = std::pow(2.0 * kPi, -2.0);
  for (double rho : {0.0, 1.0, 3.0}) {
    CHECK(sd->w(rho) ==
          doctest::Approx(c * std::pow(1.0 + rho * rho, -1.5)).epsilon(1e-12));
  }
}

TEST_CASE("dalang values match the closed form for riesz kernels") {
  // 2 c(alpha) int_0^inf xi^(alpha-1) / (1 + xi^2) d xi
  //   = 2 c(alpha) (pi/2) / sin(pi alpha / 2) in one dimension.
  for (double alpha : {0.3, 0.5, 0.7}) {
    const double c = std::pow(2.0, -alpha) / std::sqrt(kPi) *
                     std::tgamma(0.5 * (1.0 - alpha)) /
                     std::tgamma(0.5 * alpha);
    const double want = 2.0 * c * (0.5 * kPi) / std::sin(0.5 * kPi * alpha);
    const DalangReport rep =
        StationaryKernel::riesz(alpha, 1).dalang_check();
    CHECK(rep.finite());
    CHECK(rep.value == doctest::Approx(want).epsilon(1e-7));
  }
  CHECK(StationaryKernel::riesz(0.5, 1).dalang_check().value ==
        doctest::Approx(std::sqrt(kPi)).epsilon(1e-7));
}

TEST_CASE("dalang flags the divergent bessel case") {
  // Tail exponent s = 1 equals d - 2 = 1 in three dimensions: divergent.
  CHECK(StationaryKernel::bessel(1.0, 3).dalang_check().status ==
        DalangReport::Status::kInfinite);
  CHECK(StationaryKernel::bessel(4.0, 3).dalang_check().finite());
  CHECK(StationaryKernel::riesz(0.5, 2).dalang_check().finite());
}

TEST_CASE("gram matrices of admissible kernels stay positive") {
  for (int d = 1; d <= 3; ++d) {
    const double l = std::floor(d / 2.0) + 1.0;
    const StationaryKernel k = StationaryKernel::trunc_power(l, 1.0, d);
    for (std::uint64_t set = 0; set < 5; ++set) {
      const auto pts = random_points(100 + set, 40, d, 2.0);
      const GramReport rep = k.gram_psd_check(pts);
      CHECK(rep.pass);
      CHECK(rep.min_eigenvalue >= -1e-8 * rep.trace);
    }
  }
  const auto pts = random_points(7, 40, 2, 2.0);
  CHECK(StationaryKernel::bessel(3.0, 2).gram_psd_check(pts).pass);
  CHECK(StationaryKernel::riesz(0.5, 2).mollify(0.2).gram_psd_check(pts).pass);
  CHECK(StationaryKernel::log_plus(1.0, 2).mollify(0.2).gram_psd_check(pts).pass);
}

TEST_CASE("gram check rejects unsmoothed singular kernels") {
  const auto pts = random_points(7, 10, 1, 2.0);
  CHECK_THROWS(StationaryKernel::riesz(0.5, 1).gram_psd_check(pts));
}

TEST_CASE("the smoothness threshold is sharp: (1-r)+ fails in 3d") {
  // One power below the admissible exponent; some point set must produce a
  // negative eigenvalue.
  const auto hat = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::max(0.0, 1.0 - std::sqrt(s));
  };
  bool found = false;
  std::uint64_t witness = 0;
  for (std::uint64_t seed = 0; seed < 1000 && !found; ++seed) {
    const auto pts = random_points(seed, 40, 3, 0.6);
    const GramReport rep = gram_psd_raw(hat, pts);
    if (!rep.pass) {
      found = true;
      witness = seed;
    }
  }
  INFO("witness seed " << witness);
  CHECK(found);
}

TEST_CASE("radial tables reproduce direct evaluation") {
  const StationaryKernel k = StationaryKernel::log_plus(1.0, 1).mollify(0.3);
  const RadialEvaluator table(k, 4.0, 2048);
  for (double r = 0.0; r <= 5.0; r += 0.03) {
    const double direct = k.at_radius(r);
    const double tabbed = table(r);
    const double tol = 1e-6 * std::max(1.0, std::fabs(direct));
    CHECK(std::fabs(direct - tabbed) <= tol);
  }
}

TEST_CASE("covariance kernel combines the log part with a bounded part") {
  const CovarianceKernel plain(2.0, 1);
  CHECK(plain.g_is_zero());
  const std::vector<double> x = {0.25};
  const std::vector<double> y = {0.75};
  CHECK(plain(x, y) == doctest::Approx(std::log(4.0)).epsilon(1e-13));

  const CovarianceKernel with_g(
      2.0, 1,
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return 0.3 * std::cos(a[0] - b[0]);
      },
      0.3);
  CHECK(!with_g.g_is_zero());
  CHECK(with_g.g_sup() == doctest::Approx(0.3));
  CHECK(with_g(x, y) ==
        doctest::Approx(std::log(4.0) + 0.3 * std::cos(-0.5)).epsilon(1e-13));
}

TEST_CASE("riesz domination constant matches the closed form") {
  for (double alpha : {0.2, 0.3, 1.0 / std::exp(1.0), 0.5, 0.9}) {
    CHECK(riesz_domination_constant(alpha) ==
          doctest::Approx(oracle::riesz_domination(alpha)).epsilon(1e-8));
  }
  CHECK(riesz_domination_constant(0.3) ==
        doctest::Approx(0.67990934775312).epsilon(1e-9));
  CHECK(riesz_domination_constant(0.5) == doctest::Approx(0.0));

  // Pointwise property on a log-spaced radius grid.
  const double C = riesz_domination_constant(0.25);
  for (double lr = -14.0; lr <= 3.0; lr += 0.05) {
    const double r = std::exp(lr);
    const double lhs = std::max(0.0, std::log(1.0 / r));
    CHECK(lhs <= std::pow(r, -0.25) + C + 1e-10);
  }
}
