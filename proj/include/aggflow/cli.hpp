#pragma once

namespace aggflow {

// Entry point of the command-line tool. Returns the process exit code:
// 0 success, 2 bad arguments/config, 3 I/O error, 4 numerical failure.
int cli_main(int argc, const char* const* argv);

}  // namespace aggflow
