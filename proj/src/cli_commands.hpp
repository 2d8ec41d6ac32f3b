#pragma once

namespace btc {

// Parses argv and dispatches to a subcommand. Returns the process exit code:
// 0 on success, 1 on any typed error (printed to stderr as one line), 2 on
// flag parse errors.
int run_cli(int argc, char** argv);

}  // namespace btc
