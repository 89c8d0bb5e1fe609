#include "pb2/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace pb2 {

namespace {

spdlog::level::level_enum level_from_env() {
  const char *env = std::getenv("PB2_LOG_LEVEL");
  if (env == nullptr) return spdlog::level::warn;
  const std::string value(env);
  if (value == "error") return spdlog::level::err;
  if (value == "warn") return spdlog::level::warn;
  if (value == "info") return spdlog::level::info;
  if (value == "debug") return spdlog::level::debug;
  return spdlog::level::warn;
}

}  // namespace

spdlog::logger &logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_st("pb2");
    l->set_level(level_from_env());
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *instance;
}

}  // namespace pb2
