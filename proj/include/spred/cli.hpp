#pragma once

#include <ostream>

namespace spred {

/// Entry point behind the `spred` binary. Returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage or config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spred
