#pragma once

// Command-line front end: certify, search, sweep, simulate, dump-sdp.

#include <ostream>

namespace dwellcert {

enum ExitCode : int {
  kExitOk = 0,
  kExitInfeasible = 1,  // also: audit violations, no certified row in a sweep
  kExitNumerical = 2,
  kExitUsage = 3,
};

/// Runs one command; `out` receives result documents, `err` diagnostics.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dwellcert
