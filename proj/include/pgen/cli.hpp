#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pgen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for the `pgen` tool. `args` excludes the program name.
/// Subcommands: train, generate, analyze, gradcheck.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pgen::cli
