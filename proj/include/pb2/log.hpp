#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace pb2 {

/// Process-wide logger writing to stderr. The level is read once from
/// PB2_LOG_LEVEL (error, warn, info, debug); unset means warn.
spdlog::logger &logger();

}  // namespace pb2
