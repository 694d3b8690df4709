#pragma once

#include <iosfwd>

namespace hypercurv::cli {

enum ExitCode : int { kOk = 0, kUsageError = 1, kDataError = 2, kDiverged = 3 };

/// Entry point of the `hypercurv` tool. Results go to `out`, diagnostics to
/// `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hypercurv::cli
