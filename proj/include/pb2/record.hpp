#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "pb2/searchspace.hpp"

namespace pb2 {

enum class Event { kStep, kExploit, kExplore };

std::string to_string(Event e);
Event event_from_string(const std::string &s);

/// One line of the trial log.
///
/// step    -- agent trained one interval under `x`; `y` is the score change
///            (plus observation noise), `F` the new absolute score.
/// exploit -- agent took over the weights and score of `copied_from`.
/// explore -- agent was assigned the config `x`. Round 0 holds the initial configs.
struct TrialRecord {
  std::int64_t round = 0;
  std::int64_t agent = 0;
  Config x;
  Eigen::VectorXd u;
  double y = 0.0;
  double F = 0.0;
  Event event = Event::kStep;
  std::optional<std::int64_t> copied_from;
  std::uint64_t seed = 0;
  std::string policy;
};

nlohmann::json to_json(const TrialRecord &r);
TrialRecord record_from_json(const nlohmann::json &j);

/// Single-line serialization (no trailing newline).
std::string serialize(const TrialRecord &r);

}  // namespace pb2
