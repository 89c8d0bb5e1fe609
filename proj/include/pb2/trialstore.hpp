#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pb2/record.hpp"
#include "pb2/schedulers.hpp"

namespace pb2 {

/// Hex FNV-1a digest of the settings a log can only be resumed under:
/// seed, search space, population size and policy.
std::string config_hash(const ScheduleSettings &settings, const SearchSpace &space);

/// Header object written as the first line of a log: {"header": {...}}.
nlohmann::json make_header(const ScheduleSettings &settings, const SearchSpace &space);

/// Appends one record as a single line and syncs it to disk. On failure the
/// file is cut back to its previous length and StorageError is thrown.
void append(const std::string &path, const TrialRecord &record);

/// Keeps the log file open across appends; same durability as `append`.
class TrialWriter {
 public:
  /// Opens `path` for appending. With `truncate` the file is emptied first.
  TrialWriter(const std::string &path, bool truncate);
  ~TrialWriter();
  TrialWriter(const TrialWriter &) = delete;
  TrialWriter &operator=(const TrialWriter &) = delete;

  void write_header(const nlohmann::json &header);
  void append(const TrialRecord &record);

 private:
  void write_line(const std::string &line);

  std::string path_;
  int fd_ = -1;
};

struct LoadedLog {
  std::optional<nlohmann::json> header;
  std::vector<TrialRecord> records;
  /// A crash-truncated final line was dropped.
  bool dropped_tail = false;
};

/// Reads a log in file order. A malformed final line is dropped with a
/// warning; a malformed earlier line throws ParseError with its line number.
LoadedLog load(const std::string &path);

/// Cuts an unterminated final line off the file so that appends start on a
/// fresh line. Returns true if anything was removed.
bool drop_partial_tail(const std::string &path);

struct AgentSkeleton {
  std::int64_t id = 0;
  Config config;
  double score = 0.0;
  std::vector<LineageEvent> lineage;
};

struct ResumePoint {
  std::vector<AgentSkeleton> agents;
  std::int64_t next_round = 1;
  /// Length of the prefix of the log made of complete rounds.
  std::size_t complete_records = 0;
};

/// Per-agent configs, scores and lineage as of the last complete round.
/// A round is complete when it holds every step record and, on a ready
/// round, every exploit and explore record. Throws ResumeMismatch when the
/// records cannot come from a run with `settings`.
ResumePoint resume_state(std::span<const TrialRecord> records, const ScheduleSettings &settings);

/// Throws ResumeMismatch unless `header` was written for these settings.
void check_header(const nlohmann::json &header, const ScheduleSettings &settings,
                  const SearchSpace &space);

}  // namespace pb2
