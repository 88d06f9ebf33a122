#pragma once

#include <iosfwd>

namespace scalefit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNoFit = 3;

// Entry point of the scalefit command line. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scalefit
