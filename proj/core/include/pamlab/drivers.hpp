#pragma once

// Subcommand implementations behind the command-line front end.  Each
// command writes <out>/<experiment>/manifest.json first, result tables
// second, and returns the process exit code.  The front end maps thrown
// errors onto exit codes and a machine-readable JSON line on stderr.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pamlab::cli {

struct CommonOptions {
  std::string out_dir = "out";
  std::string experiment;  // empty: use the subcommand name
  std::uint64_t seed = 0;
  bool seed_set = false;  // stochastic commands reject a missing seed
  int workers = 1;
  std::string config_file;
};

struct RatesOptions {
  CommonOptions common;
  std::vector<double> Ns = {10, 100, 1000};
  bool decades = false;  // N = 10^2 .. 10^8 instead of the list
  double C = 1.0;
  double t = 2.0;
};

struct KernelEvalOptions {
  CommonOptions common;
  std::string kernel;
  double r_min = 0.0;
  double r_max = 2.0;
  std::size_t n_r = 65;
};

struct DalangOptions {
  CommonOptions common;
  std::string kernel;
};

struct VariationalOptions {
  CommonOptions common;
  std::string kernel;
  std::size_t n = 256;
  double length = 8.0;  // period of the box, h = length / n
  std::size_t restarts = 4;
  double tol = 1e-9;
  std::vector<double> eps_list;  // nonempty: smoothing envelope sweep
};

struct MomentOptions {
  CommonOptions common;
  std::string kernel;
  std::size_t n_replicas = 1;
  int dim = 1;
  double t = 1.0;
  std::size_t steps = 0;  // 0: steps_per_unit * t
  std::size_t steps_per_unit = 64;
  std::size_t n_samples = 1000;
  std::optional<double> mollify_eps;
  bool mollify_auto = false;  // default width tied to the step size
};

struct SubmultOptions {
  CommonOptions common;
  std::string kernel;
  std::size_t m = 1;
  double t1 = 0.5;
  double t2 = 0.5;
  std::size_t n_samples = 1000;
  std::size_t steps_per_unit = 64;
  bool iterated = false;  // block-iteration variant instead of the split
  std::size_t n_blocks = 3;
  double t_block = 0.3;
  std::optional<double> mollify_eps;
  bool mollify_auto = false;
};

struct TheoremOptions {
  CommonOptions common;
  std::string kernel;
  std::vector<std::size_t> Ns = {6, 7, 8, 9, 10};
  int dim = 2;
  double t = 1.0;
  std::size_t steps = 48;
  std::size_t n_samples = 1000;
  std::optional<double> mollify_eps;
  bool mollify_auto = true;
};

struct BochnerOptions {
  CommonOptions common;
  std::size_t count = 10;
  std::size_t steps = 64;
};

struct CrosscheckOptions {
  CommonOptions common;
  int n_replicas = 2;
  int dim = 1;
  double t = 0.25;
  double eps = 0.1;
  double T = 1.0;
  std::size_t steps = 0;  // 0: steps_per_unit * t
  std::size_t steps_per_unit = 64;
  std::size_t m_fields = 2000;
  std::size_t m_paths = 500;
  std::size_t m_replica_samples = 10000;
};

struct AcceptOptions {
  CommonOptions common;
};

int cmd_rates(RatesOptions opts);
int cmd_kernel_eval(KernelEvalOptions opts);
int cmd_dalang(DalangOptions opts);
int cmd_variational(VariationalOptions opts);
int cmd_moment_mc(MomentOptions opts);
int cmd_submult(SubmultOptions opts);
int cmd_theorem_table(TheoremOptions opts);
int cmd_bochner(BochnerOptions opts);
int cmd_crosscheck(CrosscheckOptions opts);
int cmd_accept(AcceptOptions opts);

// Full acceptance sweep: one pass/fail line per criterion on `log`, result
// tables under <out>/<experiment>/.  True iff every criterion passed.
bool run_acceptance(const AcceptOptions& opts, std::ostream& log);

// Exit-code and stderr-JSON mapping shared with the front end.
int exit_code_for(const std::exception& e);
std::string error_json(const std::exception& e);

// %.17g rendering used by every table writer.
std::string g17(double x);

}  // namespace pamlab::cli
