#pragma once

#include <iosfwd>

namespace graphood {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfigError = 1, kExitDataError = 2 };

/// Parses argv, runs the subcommand and maps failures to exit codes. Artifact
/// paths and JSON results go to `out`, diagnostics to `err`.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Applies GRAPH_OOD_LOG={error|info|debug} to the stderr logger.
void configure_logging();

}  // namespace graphood
