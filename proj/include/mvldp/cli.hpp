#ifndef MVLDP_CLI_HPP
#define MVLDP_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace mvldp::cli {

// Stable exit codes, enumerated in the README.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,   // unexpected internal error
  exit_config = 2,    // configuration rejected before compute
  exit_model = 3,     // invalid model or failed assumption check
  exit_numerics = 4,  // blow-up, divergence, infeasible optimization
  exit_io = 5,        // unwritable output, unreadable input
};

// Full CLI entry point; argv-style args without the program name.
int run_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mvldp::cli

#endif
