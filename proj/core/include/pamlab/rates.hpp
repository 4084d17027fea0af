#pragma once

// Moment growth rates defined implicitly by log(x)/x = c on the branch
// x > e.  The equation is solvable iff c < 1/e; lambda uses c = 2/N and
// sigma uses c = 2/(N C t), so both sequences need N large enough and the
// constructors throw SolvabilityError with the minimal admissible N below
// that.

#include <string>
#include <vector>

namespace pamlab {

// Supremum of log(x)/x, attained at x = e.
inline constexpr double kUpperBranchMax = 0.36787944117144233;

// Root of log(x)/x = c with x > e; requires 0 < c < 1/e.
double upper_branch_root(double c);

// Root for c = 2/N (needs N > 2e, i.e. N >= 6 over the integers).
double lambda_rate(double N);

// Root for c = 2/(N C t).
double sigma_rate(double N, double C, double t);

struct RateRow {
  double N = 0.0;
  double lambda = 0.0;
  double sigma = 0.0;
  double lambda_over_N = 0.0;
  double ratio2N = 0.0;            // lambda_{2N} / lambda_N
  double sigma_over_lambda = 0.0;
  double residual_lambda = 0.0;    // log(lambda)/lambda - 2/N
  double residual_sigma = 0.0;     // log(sigma)/sigma - 2/(N C t)
};

RateRow rate_row(double N, double C, double t);
std::vector<RateRow> rate_table(const std::vector<double>& Ns, double C,
                                double t);

inline constexpr const char* kRateTableHeader =
    "N,lambda,sigma,lambda_over_N,ratio2N,sigma_over_lambda,"
    "residual_lambda,residual_sigma";

// Full CSV content, header line first, one row per N, '\n' endings,
// every number rendered with %.17g.
std::string rate_table_csv(const std::vector<RateRow>& rows);

}  // namespace pamlab
