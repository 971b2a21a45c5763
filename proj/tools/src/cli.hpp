// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stgsnas::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // unexpected error or replay mismatch
  kExitUsage = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Runs one command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stgsnas::cli
