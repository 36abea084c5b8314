#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adisep::cli {

enum ExitCode : int {
  kSuccess = 0,
  kVerificationFailure = 1,
  kUsageError = 2,
};

/// Runs `adisep <command> ...`. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count from ADISEP_THREADS (default 1, minimum 1).
int thread_cap();

}  // namespace adisep::cli
