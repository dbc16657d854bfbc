#pragma once

namespace sos {

// Entry point for the command-line tool. Returns the process exit code:
// 0 success, 2 usage error, 3 I/O error, 4 malformed input file, 1 otherwise.
int run_cli(int argc, char** argv);

}  // namespace sos
