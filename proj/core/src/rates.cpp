#include "pamlab/rates.hpp"

#include <cmath>
#include <cstdio>

#include "pamlab/errors.hpp"

namespace pamlab {

namespace {

constexpr double kE = 2.718281828459045;

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double upper_branch_root(double c) {
  if (!(c > 0.0)) throw ConfigError("rate equation needs c > 0");
  if (c >= kUpperBranchMax) {
    throw SolvabilityError(
        "log(x)/x = " + fmt_g(c) + " has no root above e (max is 1/e)", 0);
  }
  // g(x) = log x - c x has exactly one root beyond e; g(e) > 0 and g is
  // eventually negative, with the bound below always past the root.
  const long double cl = c;
  long double lo = kE;
  long double hi = (2.0L / cl) * std::log(2.0L / cl) * 4.0L;
  if (hi < kE + 1.0L) hi = kE + 1.0L;
  const auto g = [cl](long double x) { return std::log(x) - cl * x; };
  for (int it = 0; it < 120; ++it) {
    const long double mid = 0.5L * (lo + hi);
    (g(mid) > 0.0L ? lo : hi) = mid;
  }
  long double x = 0.5L * (lo + hi);
  for (int it = 0; it < 4; ++it) {
    const long double step = g(x) / (1.0L / x - cl);
    long double next = x - step;
    if (next < lo) next = lo;
    if (next > hi) next = hi;
    x = next;
  }
  const double root = static_cast<double>(x);
  const double residual = std::log(root) / root - c;
  if (!(std::fabs(residual) <= 1e-12)) {
    throw NumericalError("rate solver residual " + fmt_g(residual) +
                         " exceeds 1e-12 at c = " + fmt_g(c));
  }
  return root;
}

double lambda_rate(double N) {
  if (!(N > 0.0)) throw ConfigError("moment order N must be positive");
  const double c = 2.0 / N;
  if (c >= kUpperBranchMax) {
    throw SolvabilityError("moment order N = " + fmt_g(N) +
                               " is too small: log(x)/x = 2/N needs N > 2e",
                           6);
  }
  return upper_branch_root(c);
}

double sigma_rate(double N, double C, double t) {
  if (!(N > 0.0)) throw ConfigError("moment order N must be positive");
  if (!(C > 0.0)) throw ConfigError("comparison constant C must be positive");
  if (!(t > 0.0)) throw ConfigError("horizon t must be positive");
  const double c = 2.0 / (N * C * t);
  if (c >= kUpperBranchMax) {
    const long long min_n =
        static_cast<long long>(std::floor(2.0 * kE / (C * t))) + 1;
    throw SolvabilityError(
        "moment order N = " + fmt_g(N) + " is too small at C = " + fmt_g(C) +
            ", t = " + fmt_g(t) + ": log(x)/x = 2/(N C t) needs N > 2e/(C t)",
        min_n);
  }
  return upper_branch_root(c);
}

RateRow rate_row(double N, double C, double t) {
  RateRow row;
  row.N = N;
  row.lambda = lambda_rate(N);
  row.sigma = sigma_rate(N, C, t);
  row.lambda_over_N = row.lambda / N;
  row.ratio2N = lambda_rate(2.0 * N) / row.lambda;
  row.sigma_over_lambda = row.sigma / row.lambda;
  row.residual_lambda = std::log(row.lambda) / row.lambda - 2.0 / N;
  row.residual_sigma = std::log(row.sigma) / row.sigma - 2.0 / (N * C * t);
  return row;
}

std::vector<RateRow> rate_table(const std::vector<double>& Ns, double C,
                                double t) {
  std::vector<RateRow> rows;
  rows.reserve(Ns.size());
  for (double N : Ns) rows.push_back(rate_row(N, C, t));
  return rows;
}

std::string rate_table_csv(const std::vector<RateRow>& rows) {
  std::string out = kRateTableHeader;
  out += '\n';
  for (const RateRow& r : rows) {
    out += fmt_g(r.N);
    out += ',';
    out += fmt_g(r.lambda);
    out += ',';
    out += fmt_g(r.sigma);
    out += ',';
    out += fmt_g(r.lambda_over_N);
    out += ',';
    out += fmt_g(r.ratio2N);
    out += ',';
    out += fmt_g(r.sigma_over_lambda);
    out += ',';
    out += fmt_g(r.residual_lambda);
    out += ',';
    out += fmt_g(r.residual_sigma);
    out += '\n';
  }
  return out;
}

}  // namespace pamlab
