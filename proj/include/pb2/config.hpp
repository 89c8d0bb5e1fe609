#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pb2/schedulers.hpp"
#include "pb2/searchspace.hpp"

namespace pb2 {

enum class TrainerKind { kQuadratic, kTvBench };

struct BenchParams {
  std::size_t d = 1;
  double omega = 0.01;
  double lengthscale = 0.2;
  std::size_t m = 1024;
  double signal_var = 1.0;
  /// Observation noise added to every score delta.
  double noise = 0.0;
  /// Grid points per axis for regret; 0 picks the default.
  std::size_t resolution = 0;
};

/// Everything a `run` or `bench` invocation needs.
struct RunConfig {
  ScheduleSettings schedule;
  SearchSpace space{{Dimension{"lr", 1e-3, 0.06, Scale::kLog10}}};
  TrainerKind trainer = TrainerKind::kQuadratic;
  BenchParams bench;
  std::string output = "trials.jsonl";
  /// Policies compared by `bench`.
  std::vector<Policy> bench_policies{Policy::kPb2, Policy::kRandom};
  std::size_t seeds = 10;
};

/// Reads a JSON document; throws ConfigError("config", ...) if unreadable.
nlohmann::json load_config_document(const std::string &path);

/// Applies one `dotted.path=value` assignment. The value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(nlohmann::json &doc, std::string_view assignment);

/// Validates and converts a config document; throws ConfigError naming the field.
RunConfig parse_run_config(const nlohmann::json &doc);

nlohmann::json to_json(const RunConfig &config);

}  // namespace pb2
