#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dhsa {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flag, bad
/// config key, missing input file).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand (gen, label, train, mask, compare, gradcheck).
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dhsa
