#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evtriage::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadFlags = 2,
  kIoError = 3,
  kModelDataMismatch = 4,
};

// Entry point shared by the evtriage binary and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace evtriage::cli
