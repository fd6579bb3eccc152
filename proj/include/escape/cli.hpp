#pragma once

#include <iosfwd>

namespace escape {

/// Exit codes of every subcommand.
enum ExitCode { kExitPass = 0, kExitFail = 1, kExitConfig = 2 };

/// Entry point of the command-line driver (subcommands certify, geodesic,
/// wave-radial, wave-general, morawetz). Summaries go to `out` unless
/// --quiet; errors always go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace escape
