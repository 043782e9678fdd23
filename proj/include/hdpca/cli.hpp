#pragma once

#include <ostream>

namespace hdpca {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitRuntime = 2,
  kExitCheckFailed = 3,
};

/// Entry point for the `hdpca` tool. Subcommands: hdlss-sweep,
/// growing-n-sweep, pca, scatter, r-dist.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hdpca
