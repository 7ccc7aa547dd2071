#pragma once

#include <string>
#include <vector>

namespace sdan {

// Full CLI entry point. Returns the process exit code:
//   0 success, 2 config error, 3 I/O error, 4 training divergence,
//   5 gradcheck failure.
int run_cli(int argc, const char* const* argv);

// Convenience overload for in-process tests.
int run_cli(const std::vector<std::string>& args);

}  // namespace sdan
