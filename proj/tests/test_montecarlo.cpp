#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pamlab/errors.hpp"
#include "pamlab/kernels.hpp"
#include "pamlab/montecarlo.hpp"
#include "pamlab/paths.hpp"
#include "pamlab/rates.hpp"
#include "pamlab/rng.hpp"

using namespace pamlab;

TEST_CASE("constant kernel moments are exact") {
  // S = N^2 c t^2 for every sample, so the log moment is N^2 c t^2 / 2 with
  // zero spread.
  const StationaryKernel flat = StationaryKernel::constant(0.7, 1);
  ExpMomentConfig one{1, 1, TimeGrid(1.0, 16), 200, 5};
  const MomentEstimate m1 = exp_moment(flat, one);
  CHECK(m1.log_value == doctest::Approx(0.35).epsilon(1e-13));
  CHECK(m1.stderr_ == 0.0);
  CHECK(m1.ess == doctest::Approx(200.0));
  CHECK(!m1.ess_warning);

  ExpMomentConfig two{2, 1, TimeGrid(1.0, 16), 150, 5};
  const MomentEstimate m2 = exp_moment(flat, two);
  CHECK(m2.log_value == doctest::Approx(1.4).epsilon(1e-13));
}

TEST_CASE("a constant initial condition shifts the log moment exactly") {
  const StationaryKernel k =
      StationaryKernel::cosine_atoms({0.5, 0.3}, {{1.0}, {2.0}}, 1);
  ExpMomentConfig base{2, 1, TimeGrid(0.5, 16), 400, 21};
  const MomentEstimate plain = exp_moment(k, base);
  ExpMomentConfig scaled = base;
  scaled.u0 = InitialCondition::constant(1.7);
  const MomentEstimate shifted = exp_moment(k, scaled);
  CHECK(shifted.log_value ==
        doctest::Approx(plain.log_value + 2.0 * std::log(1.7)).epsilon(1e-12));
  CHECK(shifted.stderr_ == doctest::Approx(plain.stderr_).epsilon(1e-9));
}

TEST_CASE("estimates reproduce the documented sampling scheme") {
  // Sample s draws its replica ensemble from substream(seed, s); for an atom
  // kernel the pairwise functional is closed-form, so the estimate can be
  // reassembled from public pieces.
  const StationaryKernel k =
      StationaryKernel::cosine_atoms({0.6, 0.4}, {{1.0}, {2.5}}, 1);
  const TimeGrid grid(1.0, 24);
  const std::size_t samples = 300;
  ExpMomentConfig cfg{2, 1, grid, samples, 909};
  const MomentEstimate est = exp_moment(k, cfg);

  std::vector<double> w(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const BrownianEnsemble e(2, 1, grid, {0.0}, rng::substream(909, s).key);
    w[s] = 0.5 * double_time_functional(e, k);
  }
  CHECK(est.log_value == doctest::Approx(oracle::log_mean_exp(w)).epsilon(1e-13));
  CHECK(est.n_samples == samples);
  CHECK(est.seed == 909);
  CHECK(est.ess > 0.0);
  CHECK(est.ess <= static_cast<double>(samples));
  CHECK(est.max_weight_share > 0.0);
  CHECK(est.max_weight_share <= 1.0);
}

TEST_CASE("estimates are worker-invariant") {
  const StationaryKernel k = StationaryKernel::trunc_power(2.0, 1.0, 1);
  ExpMomentConfig a{2, 1, TimeGrid(1.0, 16), 500, 33};
  a.workers = 1;
  ExpMomentConfig b = a;
  b.workers = 4;
  const MomentEstimate ma = exp_moment(k, a);
  const MomentEstimate mb = exp_moment(k, b);
  CHECK(ma.log_value == mb.log_value);
  CHECK(ma.stderr_ == mb.stderr_);
  CHECK(ma.ess == mb.ess);
}

TEST_CASE("singular kernels require a policy") {
  ExpMomentConfig cfg{2, 1, TimeGrid(1.0, 16), 120, 3};
  CHECK_THROWS_AS(exp_moment(StationaryKernel::riesz(0.5, 1), cfg),
                  SingularityError);
  cfg.policy = SingularPolicy{0.05};
  const MomentEstimate est = exp_moment(StationaryKernel::riesz(0.5, 1), cfg);
  CHECK(std::isfinite(est.log_value));
  cfg.policy = SingularPolicy{std::nullopt};  // width tied to the step size
  const MomentEstimate est2 = exp_moment(StationaryKernel::riesz(0.5, 1), cfg);
  CHECK(std::isfinite(est2.log_value));
}

TEST_CASE("covariance overload reduces to the smoothed log kernel") {
  const CovarianceKernel cov(1.0, 1);
  ExpMomentConfig cfg{2, 1, TimeGrid(0.5, 16), 300, 17};
  cfg.policy = SingularPolicy{0.1};
  const MomentEstimate via_cov = exp_moment(cov, cfg);

  ExpMomentConfig plain = cfg;
  plain.policy.reset();
  const MomentEstimate direct =
      exp_moment(StationaryKernel::log_plus(1.0, 1).mollify(0.1), plain);
  CHECK(via_cov.log_value == doctest::Approx(direct.log_value).epsilon(1e-12));
}

TEST_CASE("flat normalization rescales the exponent") {
  // W = S / (2 m t) and S = m^2 c t^2 for the constant kernel.
  const StationaryKernel flat = StationaryKernel::constant(0.7, 1);
  ExpMomentConfig cfg{2, 1, TimeGrid(0.5, 8), 100, 9};
  const MomentEstimate est = normalized_exp_moment(flat, cfg);
  CHECK(est.log_value == doctest::Approx(0.7 * 2.0 * 0.5 / 2.0).epsilon(1e-13));
}

TEST_CASE("two-horizon factorization holds for the constant kernel exactly") {
  SubmultConfig cfg{2, 1, 0.5, 0.5, 150, 41, 32, 1, {}};
  const SubmultReport rep =
      submult_check(StationaryKernel::constant(0.7, 1), cfg);
  // W(t) = m^2 c t for the flat-normalized weight, additive in the split.
  CHECK(rep.lhs == doctest::Approx(2.8).epsilon(1e-12));
  CHECK(rep.rhs == doctest::Approx(2.8).epsilon(1e-12));
  CHECK(rep.pass);
}

TEST_CASE("two-horizon factorization bounds a rough kernel") {
  SubmultConfig cfg{2, 1, 0.4, 0.6, 3000, 42, 32, 2, {}};
  const SubmultReport rep =
      submult_check(StationaryKernel::trunc_power(2.0, 1.0, 1), cfg);
  CHECK(rep.pass);
  CHECK(rep.lhs <= rep.rhs + 3.0 * std::hypot(rep.lhs_stderr, rep.rhs_stderr));
}

TEST_CASE("block iteration is exact for the constant kernel") {
  IteratedConfig cfg{2, 1, 0.3, 3, 150, 43, 32, 1, {}};
  const IteratedReport rep =
      iterated_check(StationaryKernel::constant(0.7, 1), cfg);
  const double exact = 0.7 * 4.0 * 3.0 * 0.09;
  CHECK(rep.lhs == doctest::Approx(exact).epsilon(1e-12));
  CHECK(rep.rhs == doctest::Approx(exact).epsilon(1e-12));
  CHECK(rep.pass);
}

TEST_CASE("block iteration bounds a rough kernel") {
  IteratedConfig cfg{2, 1, 0.3, 3, 2000, 44, 32, 2, {}};
  const IteratedReport rep =
      iterated_check(StationaryKernel::trunc_power(2.0, 1.0, 1), cfg);
  CHECK(rep.pass);
}

TEST_CASE("smoothing only lowers atom-kernel weights, sample by sample") {
  const StationaryKernel k =
      StationaryKernel::cosine_atoms({0.6, 0.4}, {{1.0}, {2.5}}, 1);
  MollifyOrderConfig cfg{2, 1, TimeGrid(1.0, 32), {0.4, 0.2}, 500, 51, 1};
  const MollifyOrderReport rep = mollification_ordering(k, cfg);
  CHECK(rep.all_pass);
  REQUIRE(rep.rows.size() >= 2);
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    CHECK(rep.rows[r].pass);
    if (r > 0) CHECK(rep.rows[r].pathwise);  // no predecessor for row zero
  }
  // Bounded kernels append the unsmoothed row at width zero.
  CHECK(rep.rows.back().eps == 0.0);
}

TEST_CASE("theorem table rows carry the predicted rate") {
  const StationaryKernel k = StationaryKernel::log_plus(1.0, 2);
  TheoremTableConfig cfg{{5, 6, 8}, 2,  1.0, 12,
                         150,       61, 1,   SingularPolicy{std::nullopt}};
  const auto rows = theorem_table(k, cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].N == 5);
  CHECK(rows[0].status.rfind("unsolvable", 0) == 0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const TheoremRow& r = rows[i];
    CHECK(r.status == "ok");
    CHECK(r.lambda == doctest::Approx(lambda_rate(static_cast<double>(r.N))));
    CHECK(std::isfinite(r.log_moment));
    CHECK(r.normalized ==
          doctest::Approx(r.log_moment /
                          (static_cast<double>(r.N) * r.lambda)));
    CHECK(r.target == doctest::Approx(0.5));
    CHECK(r.gap == doctest::Approx(r.normalized - r.target));
    CHECK(r.ess > 0.0);
  }
}

TEST_CASE("sample-count floor is enforced") {
  ExpMomentConfig cfg{1, 1, TimeGrid(1.0, 8), 50, 1};
  CHECK_THROWS_AS(exp_moment(StationaryKernel::constant(1.0, 1), cfg),
                  ConfigError);
}
