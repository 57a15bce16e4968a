#pragma once

#include <ostream>

namespace sigmaforge::cli {

/// Entry point of the sigma-forge tool. Returns 0 on success, 2 on a usage
/// error and 1 on a runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sigmaforge::cli
