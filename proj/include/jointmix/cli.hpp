#pragma once

// Command-line front end: jointmix {fit, simulate, mc, check} [options].
// Exit codes: 0 success, 1 input error, 2 non-convergence, 3 numeric failure.

namespace jointmix {

enum ExitCode : int {
  exit_success = 0,
  exit_input_error = 1,
  exit_not_converged = 2,
  exit_numeric_failure = 3,
};

int run_cli(int argc, char** argv);

}  // namespace jointmix
