#pragma once

#include <stdexcept>
#include <string>

namespace pamlab {

// Error taxonomy shared by all modules.  The CLI maps these onto exit codes:
// ConfigError -> 2, NumericalError and subclasses -> 3, IoError -> 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// log(v)/v = c has no root v > e when c >= 1/e.
class SolvabilityError : public NumericalError {
 public:
  SolvabilityError(const std::string& what, long long min_admissible_N)
      : NumericalError(what), min_admissible_N(min_admissible_N) {}
  long long min_admissible_N;
};

// A kernel with a pole at 0 was evaluated at 0 without a mollification policy.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// One replica carries > 99% of the total exponential weight; the log-mean-exp
// estimate is unusable and must not be reported as a number.
class DegenerateWeights : public NumericalError {
 public:
  DegenerateWeights(const std::string& what, double max_weight_share)
      : NumericalError(what), max_weight_share(max_weight_share) {}
  double max_weight_share;
};

// More than the tolerated fraction of path steps left the sampled field box.
class CoverageError : public NumericalError {
 public:
  CoverageError(const std::string& what, double exit_fraction)
      : NumericalError(what), exit_fraction(exit_fraction) {}
  double exit_fraction;
};

}  // namespace pamlab
