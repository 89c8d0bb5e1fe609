#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pb2/acquisition.hpp"
#include "pb2/record.hpp"
#include "pb2/rng.hpp"
#include "pb2/searchspace.hpp"
#include "pb2/trainer.hpp"
#include "pb2/tvgp.hpp"

namespace pb2 {

enum class Policy { kPb2, kPbt, kRandom };

std::string to_string(Policy p);
/// Throws std::invalid_argument for anything but pb2, pbt or random.
Policy policy_from_string(const std::string &s);

struct GpSettings {
  std::size_t window = kDefaultWindow;
  BetaSchedule beta;
  /// Re-fit kernel hyperparameters every `reopt_stride` explore events; 0 never does.
  std::size_t reopt_stride = 1;
  HyperparamBounds bounds;
  std::size_t starts = 8;
  std::size_t iterations = 200;
  CandidateSettings candidates;
};

struct ScheduleSettings {
  Policy policy = Policy::kPb2;
  std::size_t population = 4;
  /// Rounds 1 .. horizon-1 are trained.
  std::int64_t horizon = 50;
  std::int64_t ready_interval = 1;
  double quantile = 0.25;
  double epsilon = 0.25;
  std::uint64_t seed = 0;
  /// PB2 only: pick a fresh config for every agent, not just the replaced ones.
  bool explore_all = false;
  GpSettings gp;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct LineageEvent {
  std::int64_t round = 0;
  std::int64_t copied_from = 0;
};

struct AgentState {
  std::int64_t id = 0;
  std::unique_ptr<TrainerState> trainer_state;
  Config config;
  double score = 0.0;
  std::vector<LineageEvent> lineage;
};

struct PopulationState {
  std::vector<AgentState> agents;
  /// Last completed round.
  std::int64_t round = 0;
};

struct Replacement {
  std::int64_t loser = 0;
  std::int64_t winner = 0;
};

/// min(ceil(quantile * population), floor(population / 2)).
std::size_t replacement_count(std::size_t population, double quantile);

/// Ranks agents by score (ties: lower id ranks higher) and gives each of the
/// bottom agents a deep copy of the weights and the score of a uniformly drawn
/// top agent. Configs are left untouched. Returns one entry per loser in
/// ranking order (worst first).
std::vector<Replacement> exploit(PopulationState &pop, const Trainer &trainer, double quantile,
                                 Rng &rng);

/// PBT mutation: with probability epsilon a uniform resample; otherwise every
/// component of `top` is scaled by an independent U[0.8, 1.2] draw and clamped.
Config pbt_explore(const Config &top, double epsilon, const SearchSpace &space, Rng &rng);

/// Random-search explore step.
Config random_explore(const SearchSpace &space, Rng &rng);

/// GP-bandit explore step. Keeps the kernel hyperparameters between calls and
/// re-fits them on the configured stride.
class Pb2Explorer {
 public:
  Pb2Explorer(SearchSpace space, GpSettings settings, std::uint64_t seed,
              std::int64_t ready_interval);

  /// New configs for `targets` (in the order given). The GP is fit to the
  /// step records of `store`; agents of `pop` not in `targets` are pending
  /// points. Falls back to uniform sampling on a cold start or a numerical
  /// failure of the GP.
  std::vector<Config> explore(std::span<const TrialRecord> store, const PopulationState &pop,
                              std::span<const std::int64_t> targets, std::int64_t round,
                              Rng &rng);

  /// Hyperparameters used by the most recent explore call.
  const std::optional<GpHyperparams> &last_hyperparams() const noexcept { return last_hp_; }
  /// Size of the pending set in the most recent explore call.
  std::size_t last_pending() const noexcept { return last_pending_; }

 private:
  GpHyperparams hyperparams_for(std::span<const GpRecord> data,
                                std::span<const TrialRecord> store, std::int64_t round);

  SearchSpace space_;
  GpSettings settings_;
  std::uint64_t seed_;
  std::int64_t ready_interval_;
  std::optional<GpHyperparams> cached_hp_;
  std::int64_t cached_round_ = -1;
  std::optional<GpHyperparams> last_hp_;
  std::size_t last_pending_ = 0;
};

/// GP records (u, round, y) from the step events of a log.
std::vector<GpRecord> gp_records(std::span<const TrialRecord> log);

/// Drives a population through rounds 1 .. horizon-1.
class Scheduler {
 public:
  using Sink = std::function<void(const TrialRecord &)>;

  Scheduler(const Trainer &trainer, SearchSpace space, ScheduleSettings settings);

  /// Every record is passed to the sink as soon as its round completes.
  void set_sink(Sink sink) { sink_ = std::move(sink); }

  /// Draws the initial configs and emits the round-0 explore records.
  void start();

  /// Rebuilds the population by replaying `log` (a prefix of an earlier run
  /// with the same settings) through the trainer. Records of an incomplete
  /// final round are regenerated by the next round and checked against the
  /// log instead of being emitted again. Throws ResumeMismatch if the log
  /// does not belong to these settings or the replay diverges.
  void resume(std::span<const TrialRecord> log);

  /// Trains until `last_round` (clamped to horizon-1) has completed.
  void run_until(std::int64_t last_round);
  void run() { run_until(settings_.horizon - 1); }

  bool finished() const noexcept { return pop_.round >= settings_.horizon - 1; }
  const std::vector<TrialRecord> &log() const noexcept { return log_; }
  const PopulationState &population() const noexcept { return pop_; }
  const ScheduleSettings &settings() const noexcept { return settings_; }
  const SearchSpace &space() const noexcept { return space_; }
  /// Pending-set sizes seen by each PB2 explore call, in order.
  const std::vector<std::size_t> &pending_sizes() const noexcept { return pending_sizes_; }

 private:
  void advance_round();
  void emit(TrialRecord record);
  TrialRecord make_record(const AgentState &agent, Event event, double y) const;
  std::uint64_t agent_seed(std::int64_t id) const;

  const Trainer &trainer_;
  SearchSpace space_;
  ScheduleSettings settings_;
  PopulationState pop_;
  std::vector<TrialRecord> log_;
  std::vector<TrialRecord> expected_tail_;
  std::size_t tail_pos_ = 0;
  Sink sink_;
  std::optional<Pb2Explorer> pb2_;
  std::vector<std::size_t> pending_sizes_;
  bool started_ = false;
};

/// Runs a complete schedule from scratch and returns the full log.
std::vector<TrialRecord> run_schedule(const Trainer &trainer, const SearchSpace &space,
                                      const ScheduleSettings &settings,
                                      Scheduler::Sink sink = {});

/// Largest |sum(y) - (F_end - F_start)| over every agent's exploit-free spans.
/// Zero (up to rounding) for a noise-free trainer.
double max_telescoping_gap(std::span<const TrialRecord> log);

}  // namespace pb2
