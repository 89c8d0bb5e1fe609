#include "pb2/trialstore.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "pb2/errors.hpp"
#include "pb2/log.hpp"

namespace pb2 {

std::string to_string(Event e) {
  switch (e) {
    case Event::kStep:
      return "step";
    case Event::kExploit:
      return "exploit";
    case Event::kExplore:
      return "explore";
  }
  return "unknown";
}

Event event_from_string(const std::string &s) {
  if (s == "step") return Event::kStep;
  if (s == "exploit") return Event::kExploit;
  if (s == "explore") return Event::kExplore;
  throw std::invalid_argument("unknown event '" + s + "'");
}

nlohmann::json to_json(const TrialRecord &r) {
  nlohmann::json x = nlohmann::json::object();
  for (const auto &[k, v] : r.x) x[k] = v;
  nlohmann::json u = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.u.size(); ++i) u.push_back(r.u[i]);
  nlohmann::json j = {{"round", r.round}, {"agent", r.agent},  {"x", x},
                      {"u", u},           {"y", r.y},          {"F", r.F},
                      {"event", to_string(r.event)}, {"seed", r.seed}, {"policy", r.policy}};
  if (r.copied_from) j["copied_from"] = *r.copied_from;
  return j;
}

TrialRecord record_from_json(const nlohmann::json &j) {
  TrialRecord r;
  r.round = j.at("round").get<std::int64_t>();
  r.agent = j.at("agent").get<std::int64_t>();
  for (const auto &[k, v] : j.at("x").items()) r.x[k] = v.get<double>();
  const auto &u = j.at("u");
  r.u.resize(static_cast<Eigen::Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) r.u[static_cast<Eigen::Index>(i)] = u[i].get<double>();
  r.y = j.at("y").get<double>();
  r.F = j.at("F").get<double>();
  r.event = event_from_string(j.at("event").get<std::string>());
  if (j.contains("copied_from") && !j.at("copied_from").is_null())
    r.copied_from = j.at("copied_from").get<std::int64_t>();
  if (r.event == Event::kExploit && !r.copied_from)
    throw std::invalid_argument("exploit record without copied_from");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.policy = j.at("policy").get<std::string>();
  return r;
}

std::string serialize(const TrialRecord &r) { return to_json(r).dump(); }

// ---------------------------------------------------------------------------

std::string config_hash(const ScheduleSettings &settings, const SearchSpace &space) {
  const nlohmann::json key = {{"seed", settings.seed},
                              {"space", space.to_json()},
                              {"B", settings.population},
                              {"policy", to_string(settings.policy)}};
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : key.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json make_header(const ScheduleSettings &settings, const SearchSpace &space) {
  return {{"header",
           {{"config_hash", config_hash(settings, space)},
            {"seed", settings.seed},
            {"B", settings.population},
            {"T", settings.horizon},
            {"t_ready", settings.ready_interval},
            {"lambda", settings.quantile},
            {"epsilon", settings.epsilon},
            {"policy", to_string(settings.policy)},
            {"explore_all", settings.explore_all},
            {"space", space.to_json()}}}};
}

void check_header(const nlohmann::json &header, const ScheduleSettings &settings,
                  const SearchSpace &space) {
  const auto &body = header.contains("header") ? header.at("header") : header;
  const std::string expected = config_hash(settings, space);
  const std::string found = body.value("config_hash", std::string{});
  if (found != expected)
    throw ResumeMismatch("log was written for a different seed, space, B or policy (hash " +
                         found + ", expected " + expected + ")");
}

// ---------------------------------------------------------------------------

namespace {

void write_all(int fd, const std::string &path, const std::string &line) {
  const off_t before = ::lseek(fd, 0, SEEK_END);
  if (before < 0) throw StorageError(path + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string reason = std::strerror(errno);
      if (::ftruncate(fd, before) != 0) {
        // nothing more we can do; the reader drops a partial final line
      }
      throw StorageError(path + ": write failed: " + reason);
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd) != 0) {
    const std::string reason = std::strerror(errno);
    if (::ftruncate(fd, before) != 0) {
    }
    throw StorageError(path + ": sync failed: " + reason);
  }
}

int open_append(const std::string &path, bool truncate) {
  int flags = O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC;
  if (truncate) flags |= O_TRUNC;
  const int fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) throw StorageError(path + ": cannot open for append: " + std::strerror(errno));
  return fd;
}

}  // namespace

void append(const std::string &path, const TrialRecord &record) {
  const int fd = open_append(path, false);
  try {
    write_all(fd, path, serialize(record) + "\n");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

TrialWriter::TrialWriter(const std::string &path, bool truncate)
    : path_(path), fd_(open_append(path, truncate)) {}

TrialWriter::~TrialWriter() {
  if (fd_ >= 0) ::close(fd_);
}

void TrialWriter::write_line(const std::string &line) { write_all(fd_, path_, line + "\n"); }

void TrialWriter::write_header(const nlohmann::json &header) { write_line(header.dump()); }

void TrialWriter::append(const TrialRecord &record) { write_line(serialize(record)); }

// ---------------------------------------------------------------------------

LoadedLog load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError(path + ": cannot open for reading");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }

  LoadedLog out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string &line = lines[i];
    const bool last = i + 1 == lines.size();
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.is_object() && j.contains("header")) {
        if (i != 0) throw std::invalid_argument("header is only allowed on the first line");
        out.header = j;
        continue;
      }
      out.records.push_back(record_from_json(j));
    } catch (const std::exception &e) {
      if (last) {
        logger().warn("{}: dropping malformed final line {} ({})", path, i + 1, e.what());
        out.dropped_tail = true;
        continue;
      }
      throw ParseError(i + 1, path + ": " + e.what());
    }
  }
  return out;
}

bool drop_partial_tail(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (text.empty() || text.back() == '\n') return false;
  const std::size_t nl = text.rfind('\n');
  const off_t keep = nl == std::string::npos ? 0 : static_cast<off_t>(nl + 1);
  if (::truncate(path.c_str(), keep) != 0)
    throw StorageError(path + ": cannot truncate partial line: " + std::strerror(errno));
  logger().warn("{}: removed unterminated final line", path);
  return true;
}

// ---------------------------------------------------------------------------

ResumePoint resume_state(std::span<const TrialRecord> records, const ScheduleSettings &settings) {
  ResumePoint point;
  if (records.empty()) return point;

  const auto population = static_cast<std::int64_t>(settings.population);
  const std::string policy = to_string(settings.policy);
  const std::size_t replacements =
      settings.population >= 2 ? replacement_count(settings.population, settings.quantile) : 0;
  const std::size_t explores = (settings.policy == Policy::kPb2 && settings.explore_all)
                                   ? settings.population
                                   : replacements;

  for (const auto &r : records) {
    if (r.seed != settings.seed)
      throw ResumeMismatch("log seed " + std::to_string(r.seed) + " differs from " +
                           std::to_string(settings.seed));
    if (r.policy != policy) throw ResumeMismatch("log policy '" + r.policy + "' differs from '" + policy + "'");
    if (r.agent < 0 || r.agent >= population)
      throw ResumeMismatch("log has agent " + std::to_string(r.agent) + " but B=" +
                           std::to_string(population));
  }

  const auto expected_in = [&](std::int64_t round) -> std::size_t {
    if (round == 0) return settings.population;
    std::size_t n = settings.population;
    if (round % settings.ready_interval == 0) n += replacements + explores;
    return n;
  };

  std::map<std::int64_t, AgentSkeleton> agents;
  std::size_t i = 0;
  std::int64_t expected_round = 0;
  while (i < records.size()) {
    const std::int64_t round = records[i].round;
    if (round != expected_round)
      throw ResumeMismatch("log jumps to round " + std::to_string(round) + " where round " +
                           std::to_string(expected_round) + " was expected");
    std::size_t j = i;
    while (j < records.size() && records[j].round == round) ++j;
    const std::size_t count = j - i;
    const std::size_t expected = expected_in(round);
    if (count > expected)
      throw ResumeMismatch("round " + std::to_string(round) + " has " + std::to_string(count) +
                           " records, expected " + std::to_string(expected));
    if (count < expected) {
      if (j != records.size())
        throw ResumeMismatch("round " + std::to_string(round) + " is incomplete");
      break;  // crash inside the final round
    }
    for (std::size_t k = i; k < j; ++k) {
      const auto &r = records[k];
      AgentSkeleton &a = agents[r.agent];
      a.id = r.agent;
      a.score = r.F;
      if (r.event == Event::kExplore) a.config = r.x;
      if (r.event == Event::kExploit) a.lineage.push_back({r.round, *r.copied_from});
    }
    point.complete_records = j;
    point.next_round = round + 1;
    ++expected_round;
    i = j;
  }
  for (auto &[id, a] : agents) point.agents.push_back(std::move(a));
  if (point.complete_records == 0) point.next_round = 1;
  return point;
}

}  // namespace pb2
