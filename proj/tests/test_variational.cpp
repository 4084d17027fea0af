#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "pamlab/errors.hpp"
#include "pamlab/kernels.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/variational.hpp"

using namespace pamlab;

namespace {

std::vector<double> normalized_bump(const GridSpec& grid) {
  const double L = grid.length();
  std::vector<double> g(grid.size());
  const double w = L / 6.0;
  for (std::size_t u = 0; u < g.size(); ++u) {
    double r2 = 0.0;
    if (grid.dim == 1) {
      const double x = grid.h * static_cast<double>(u) - 0.5 * L;
      r2 = x * x;
    } else {
      const double x = grid.h * static_cast<double>(u % grid.n) - 0.5 * L;
      const double y = grid.h * static_cast<double>(u / grid.n) - 0.5 * L;
      r2 = x * x + y * y;
    }
    g[u] = std::exp(-0.5 * r2 / (w * w));
  }
  const double hd = std::pow(grid.h, grid.dim);
  double mass = 0.0;
  for (double v : g) mass += v * v;
  mass *= hd;
  const double scale = 1.0 / std::sqrt(mass);
  for (double& v : g) v *= scale;
  return g;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(GridSpec(3, 32, 0.1), ConfigError);
  CHECK_THROWS_AS(GridSpec(1, 48, 0.1), ConfigError);   // not a power of two
  CHECK_THROWS_AS(GridSpec(1, 8, 0.1), ConfigError);    // too coarse
  CHECK_THROWS_AS(GridSpec(1, 64, 1.5), ConfigError);   // spacing >= 1
  const GridSpec g(2, 32, 0.2);
  CHECK(g.size() == 32 * 32);
  CHECK(g.length() == doctest::Approx(6.4));
}

TEST_CASE("energy is half quartic minus dirichlet") {
  const GridSpec grid(1, 64, 0.1);
  const VariationalProblem p(StationaryKernel::trunc_power(2.0, 1.0, 1), grid);
  const std::vector<double> g = normalized_bump(grid);
  const double q = p.quartic(g);
  const double d = p.dirichlet(g);
  CHECK(q > 0.0);
  CHECK(d > 0.0);
  CHECK(p.energy(g) == doctest::Approx(0.5 * (q - d)).epsilon(1e-14));
}

TEST_CASE("gradient matches central differences") {
  const GridSpec grid(1, 64, 0.1);
  const VariationalProblem p(StationaryKernel::trunc_power(2.0, 1.0, 1), grid);
  std::vector<double> g(grid.size());
  std::vector<double> v(grid.size());
  rng::Stream gen{314};
  for (std::size_t u = 0; u < g.size(); ++u) {
    g[u] = 0.2 + std::fabs(gen.normal(u));
    v[u] = gen.normal(g.size() + u);
  }
  const std::vector<double> grad = p.gradient(g);
  double analytic = 0.0;
  for (std::size_t u = 0; u < g.size(); ++u) analytic += grad[u] * v[u];
  const double eta = 1e-5;
  std::vector<double> gp = g;
  std::vector<double> gm = g;
  for (std::size_t u = 0; u < g.size(); ++u) {
    gp[u] += eta * v[u];
    gm[u] -= eta * v[u];
  }
  const double numeric = (p.energy(gp) - p.energy(gm)) / (2.0 * eta);
  CHECK(std::fabs(analytic - numeric) <=
        std::max(1e-7 * std::fabs(analytic), 1e-9));
}

TEST_CASE("constant kernel maximum is c/2 with a flat profile") {
  const VariationalProblem p(StationaryKernel::constant(0.7, 1),
                             GridSpec(1, 64, 0.1));
  const VariationalResult res = p.maximize();
  CHECK(res.converged);
  CHECK(res.energy == doctest::Approx(0.35).epsilon(1e-10));
  CHECK(res.dirichlet <= 1e-8);
}

TEST_CASE("maximize is deterministic") {
  const VariationalProblem p(
      StationaryKernel::cosine_atoms({0.5, 0.3}, {{1.0}, {2.0}}, 1),
      GridSpec(1, 64, 0.1));
  const VariationalResult a = p.maximize();
  const VariationalResult b = p.maximize();
  CHECK(a.energy == b.energy);
  CHECK(a.iterations == b.iterations);
  CHECK(a.g == b.g);
}

TEST_CASE("quartic recomputed from atoms agrees with the convolution") {
  // Frequencies commensurate with the box keep the cosines periodic, so the
  // torus convolution and the literal atom sum are the same number.
  const GridSpec grid(1, 128, 0.1);
  const double fund = 2.0 * std::numbers::pi / grid.length();
  const VariationalProblem p(
      StationaryKernel::cosine_atoms({0.6, 0.4}, {{2.0 * fund}, {5.0 * fund}},
                                     1),
      grid);
  const std::vector<double> g = normalized_bump(grid);
  CHECK(p.quartic_spectral(g) ==
        doctest::Approx(p.quartic(g)).epsilon(1e-10));
}

TEST_CASE("quartic recomputed from the radial density agrees to lattice error") {
  const GridSpec grid(1, 256, 8.0 / 256.0);
  const VariationalProblem p(StationaryKernel::riesz(0.5, 1), grid);
  const std::vector<double> g = normalized_bump(grid);
  const double direct = p.quartic(g);
  const double spectral = p.quartic_spectral(g);
  CHECK(std::fabs(direct - spectral) <= 2e-2 * std::fabs(direct));
}

TEST_CASE("spectral recomputation rejects kernels without spectral data") {
  const GridSpec grid(1, 64, 0.1);
  const VariationalProblem p(StationaryKernel::trunc_power(2.0, 1.0, 1), grid);
  const std::vector<double> g = normalized_bump(grid);
  CHECK_THROWS_AS(p.quartic_spectral(g), ConfigError);
}

TEST_CASE("an exhausted iteration budget surfaces as a typed failure") {
  // The flat restart is an exact stationary point, so any positive budget
  // converges; a zero budget is the one honest way to see the failure path.
  const VariationalProblem p(StationaryKernel::riesz(0.5, 1),
                             GridSpec(1, 64, 0.1));
  MaximizeOptions opts;
  opts.max_iters = 0;
  opts.n_restarts = 1;
  try {
    (void)p.maximize(opts);
    FAIL("expected the ascent to give up");
  } catch (const NotConverged& e) {
    CHECK(!e.best().converged);
    CHECK(e.best().iterations == 0);
    CHECK(std::isfinite(e.best().energy));
    CHECK(e.best().g.size() == 64);
  }
}

TEST_CASE("smoothing envelope for the log kernel") {
  const GridSpec grid(1, 128, 6.4 / 128.0);
  const EnvelopeReport rep = envelope_checks(
      StationaryKernel::log_plus(1.0, 1), grid, {0.4, 0.2, 0.1});
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].eps == doctest::Approx(0.4));
  CHECK(rep.rows[2].eps == doctest::Approx(0.1));
  for (const EnvelopeRow& row : rep.rows) {
    CHECK(row.bounds_pass);
    CHECK(row.lower <= row.energy + 1e-9);
    CHECK(row.energy <= row.upper + 1e-9);
  }
  CHECK(rep.monotone);
  CHECK(rep.all_pass);
}

TEST_CASE("smoothing envelope appends the unsmoothed row for bounded kernels") {
  const GridSpec grid(1, 64, 0.1);
  const EnvelopeReport rep = envelope_checks(
      StationaryKernel::trunc_power(2.0, 1.0, 1), grid, {0.4, 0.2});
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows.back().eps == 0.0);
  CHECK(rep.all_pass);
}
