#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace tikreg::cli {

enum ExitCode : int {
  kOk = 0,
  kNumericalFailure = 1,
  kConfigError = 2,
  kInterrupted = 130,
};

/// Set from the SIGINT handler; sweeps stop scheduling new cells and flush.
std::atomic<bool>& cancel_flag();

/// Runs one command line (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tikreg::cli
