#pragma once

#include <ostream>

namespace pb2 {

/// Entry point of the `pb2` tool. Returns the process exit code:
/// 0 on success, 2 for an invalid config or command line, 1 for a runtime
/// failure (the log written so far is kept).
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace pb2
