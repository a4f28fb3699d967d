#pragma once

#include <ostream>

namespace adasplit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvariant = 3;

/// Entry point of the `adasplit` tool. Subcommands: run, sweep, compare.
/// Returns 0 on success, 2 on config/usage errors, 3 on runtime invariant breaches.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace adasplit
