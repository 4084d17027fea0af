#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pamlab/errors.hpp"
#include "pamlab/rates.hpp"

using namespace pamlab;

TEST_CASE("upper branch roots agree with the bisection oracle") {
  for (double c : {0.2, 0.1, 0.05, 0.02, 0.01, 0.002, 1e-5}) {
    const double x = upper_branch_root(c);
    const double ref = static_cast<double>(
        oracle::bisect_upper_branch(static_cast<long double>(c)));
    CHECK(std::fabs(x - ref) <= 1e-12 * ref);
    CHECK(x > std::exp(1.0));
    CHECK(std::fabs(std::log(x) / x - c) <= 1e-12);
  }
}

TEST_CASE("frozen root values") {
  CHECK(upper_branch_root(0.2) ==
        doctest::Approx(12.713206788867632).epsilon(1e-13));
  CHECK(upper_branch_root(0.02) ==
        doctest::Approx(282.11589874882474).epsilon(1e-13));
  CHECK(upper_branch_root(0.01) ==
        doctest::Approx(647.27751243940047).epsilon(1e-13));
  CHECK(upper_branch_root(0.002) ==
        doctest::Approx(4167.5406889912536).epsilon(1e-13));
}

TEST_CASE("solvability boundary") {
  CHECK_THROWS_AS(upper_branch_root(0.4), SolvabilityError);
  CHECK_THROWS_AS(upper_branch_root(1.0 / std::exp(1.0)), SolvabilityError);
  CHECK(kUpperBranchMax == doctest::Approx(1.0 / std::exp(1.0)));
  // Just below the boundary the equation still has its two branches and we
  // must land on the upper one, x = e at the fold.
  const double x = upper_branch_root(kUpperBranchMax * (1.0 - 1e-6));
  CHECK(x > std::exp(1.0));
  CHECK(x < 3.0);
}

TEST_CASE("lambda growth rate and its minimal admissible order") {
  CHECK(lambda_rate(10.0) ==
        doctest::Approx(upper_branch_root(0.2)).epsilon(1e-15));
  try {
    (void)lambda_rate(5.0);
    FAIL("expected a solvability error");
  } catch (const SolvabilityError& e) {
    CHECK(e.min_admissible_N == 6);
  }
  try {
    (void)lambda_rate(5.4);
    FAIL("expected a solvability error");
  } catch (const SolvabilityError& e) {
    CHECK(e.min_admissible_N == 6);
  }
  CHECK(lambda_rate(6.0) > std::exp(1.0));
}

TEST_CASE("sigma clock rate and its admissibility region") {
  // c = 2 / (N C t) with C = 1, t = 2: solvable from N = 3 on.
  CHECK(sigma_rate(3.0, 1.0, 2.0) ==
        doctest::Approx(upper_branch_root(1.0 / 3.0)).epsilon(1e-15));
  try {
    (void)sigma_rate(2.0, 1.0, 2.0);
    FAIL("expected a solvability error");
  } catch (const SolvabilityError& e) {
    CHECK(e.min_admissible_N == 3);
  }
  // sigma at (N, C=1, t=2) equals lambda at 2N.
  CHECK(sigma_rate(50.0, 1.0, 2.0) ==
        doctest::Approx(lambda_rate(100.0)).epsilon(1e-14));
}

TEST_CASE("rate rows carry coherent diagnostics") {
  const RateRow row = rate_row(100.0, 1.0, 2.0);
  CHECK(row.N == 100.0);
  CHECK(row.lambda == doctest::Approx(lambda_rate(100.0)));
  CHECK(row.sigma == doctest::Approx(sigma_rate(100.0, 1.0, 2.0)));
  CHECK(row.lambda_over_N == doctest::Approx(row.lambda / 100.0));
  CHECK(row.ratio2N ==
        doctest::Approx(lambda_rate(200.0) / row.lambda).epsilon(1e-14));
  CHECK(row.sigma_over_lambda ==
        doctest::Approx(row.sigma / row.lambda).epsilon(1e-14));
  CHECK(std::fabs(row.residual_lambda) <= 1e-12);
  CHECK(std::fabs(row.residual_sigma) <= 1e-12);
}

TEST_CASE("asymptotic trends over the decades") {
  std::vector<double> Ns;
  for (int k = 2; k <= 8; ++k) Ns.push_back(std::pow(10.0, k));
  const auto rows = rate_table(Ns, 1.0, 2.0);
  REQUIRE(rows.size() == 7);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].lambda_over_N > rows[i - 1].lambda_over_N);
    // Doubling ratio decreases toward 2.
    CHECK(rows[i].ratio2N < rows[i - 1].ratio2N);
    CHECK(rows[i].ratio2N > 2.0);
  }
  // Frozen terminal diagnostics at N = 1e8, C = 1, t = 2; sigma at N equals
  // lambda at 2N here, so both ratios coincide.
  const RateRow& last = rows.back();
  CHECK(last.ratio2N == doctest::Approx(2.07009375929).epsilon(1e-9));
  CHECK(last.sigma_over_lambda == doctest::Approx(last.ratio2N).epsilon(1e-14));
}

TEST_CASE("csv rendering") {
  const auto rows = rate_table({10.0, 100.0}, 1.0, 2.0);
  const std::string csv = rate_table_csv(rows);
  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == kRateTableHeader);
  std::size_t data_lines = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++data_lines;
    std::size_t commas = 0;
    for (char ch : line) commas += ch == ',';
    CHECK(commas == 7);
  }
  CHECK(data_lines == 2);
}
