// Runs the acceptance sweep headlessly; exit 0 only when every criterion
// holds.  ctest wires this binary in as the release gate.

#include <iostream>

#include "pamlab/drivers.hpp"

int main() {
  pamlab::cli::AcceptOptions opts;
  opts.common.out_dir = "acceptance_out";
  try {
    return pamlab::cli::run_acceptance(opts, std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << pamlab::cli::error_json(e) << "\n";
    return pamlab::cli::exit_code_for(e);
  }
}
