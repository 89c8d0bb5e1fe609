#include "pb2/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "pb2/errors.hpp"
#include "pb2/log.hpp"
#include "pb2/trialstore.hpp"

namespace pb2 {

std::string to_string(Policy p) {
  switch (p) {
    case Policy::kPb2:
      return "pb2";
    case Policy::kPbt:
      return "pbt";
    case Policy::kRandom:
      return "random";
  }
  return "unknown";
}

Policy policy_from_string(const std::string &s) {
  if (s == "pb2") return Policy::kPb2;
  if (s == "pbt") return Policy::kPbt;
  if (s == "random") return Policy::kRandom;
  throw std::invalid_argument("unknown policy '" + s + "' (expected pb2, pbt or random)");
}

void ScheduleSettings::validate() const {
  if (population < 1) throw ConfigError("B", "population must be at least 1");
  if (horizon < 2) throw ConfigError("T", "horizon must be at least 2");
  if (ready_interval < 1) throw ConfigError("t_ready", "must be at least 1");
  if (!(quantile > 0.0 && quantile <= 0.5)) throw ConfigError("lambda", "must lie in (0, 0.5]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon", "must lie in [0, 1]");
  if (gp.window < 1) throw ConfigError("gp.window", "must be at least 1");
  if (!(gp.beta.c2 > 0.0)) throw ConfigError("gp.beta.c2", "must be positive");
  if (!(gp.beta.floor >= 0.0)) throw ConfigError("gp.beta.floor", "must be non-negative");
  if (gp.candidates.uniform + gp.candidates.top * gp.candidates.per_top == 0)
    throw ConfigError("gp.candidates", "must produce at least one candidate");
}

std::size_t replacement_count(std::size_t population, double quantile) {
  const auto wanted = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(population)));
  return std::min(wanted, population / 2);
}

std::vector<Replacement> exploit(PopulationState &pop, const Trainer &trainer, double quantile,
                                 Rng &rng) {
  const std::size_t n = pop.agents.size();
  if (n < 2) throw std::invalid_argument("exploit needs at least two agents");
  const std::size_t count = replacement_count(n, quantile);

  std::vector<std::size_t> ranked(n);
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    const auto &x = pop.agents[a];
    const auto &y = pop.agents[b];
    if (x.score != y.score) return x.score > y.score;
    return x.id < y.id;
  });

  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  std::vector<Replacement> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    AgentState &loser = pop.agents[ranked[n - 1 - k]];
    const AgentState &winner = pop.agents[ranked[pick(rng)]];
    loser.trainer_state = trainer.clone(*winner.trainer_state);
    loser.score = winner.score;
    loser.lineage.push_back({pop.round, winner.id});
    out.push_back({loser.id, winner.id});
  }
  return out;
}

Config pbt_explore(const Config &top, double epsilon, const SearchSpace &space, Rng &rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (unif(rng) < epsilon) return space.sample_uniform(rng);
  std::uniform_real_distribution<double> factor(0.8, 1.2);
  Config out;
  for (const auto &d : space.dims()) {
    auto it = top.find(d.name);
    if (it == top.end()) throw MissingDimension("config is missing dimension '" + d.name + "'");
    out[d.name] = std::clamp(it->second * factor(rng), d.low, d.high);
  }
  return out;
}

Config random_explore(const SearchSpace &space, Rng &rng) { return space.sample_uniform(rng); }

std::vector<GpRecord> gp_records(std::span<const TrialRecord> log) {
  std::vector<GpRecord> out;
  for (const auto &r : log)
    if (r.event == Event::kStep) out.push_back({r.u, r.round, r.y});
  return out;
}

// ---------------------------------------------------------------------------

Pb2Explorer::Pb2Explorer(SearchSpace space, GpSettings settings, std::uint64_t seed,
                         std::int64_t ready_interval)
    : space_(std::move(space)),
      settings_(std::move(settings)),
      seed_(seed),
      ready_interval_(ready_interval) {}

GpHyperparams Pb2Explorer::hyperparams_for(std::span<const GpRecord> data,
                                           std::span<const TrialRecord> store,
                                           std::int64_t round) {
  const auto defaults = GpHyperparams::defaults(space_.size());
  if (settings_.reopt_stride == 0) return defaults;

  // Explore events are numbered 1, 2, ... and hyperparameters are re-fit on
  // events 1, 1 + stride, ...; everything is a function of the log, so a
  // resumed run reproduces the cache.
  const std::int64_t event = std::max<std::int64_t>(1, round / ready_interval_);
  const auto stride = static_cast<std::int64_t>(settings_.reopt_stride);
  const std::int64_t fit_event = event - (event - 1) % stride;
  const std::int64_t fit_round = std::min(round, fit_event * ready_interval_);
  if (cached_hp_ && cached_round_ == fit_round) return *cached_hp_;

  std::vector<GpRecord> fit_data;
  if (fit_round == round) {
    fit_data.assign(data.begin(), data.end());
  } else {
    std::vector<TrialRecord> prefix;
    for (const auto &r : store)
      if (r.round <= fit_round) prefix.push_back(r);
    fit_data = apply_window(gp_records(prefix), settings_.window);
  }

  GpHyperparams hp = defaults;
  if (fit_data.size() >= 2) {
    Rng rng = derive_rng(seed_, {stream::kHyperparams, static_cast<std::uint64_t>(fit_round)});
    HyperparamSearch search{settings_.starts, settings_.iterations, settings_.window};
    const auto result = optimize_hyperparams(fit_data, settings_.bounds, rng, search);
    hp = result.hp;
    logger().debug("round {}: hyperparameters l0={:.4g} sv={:.4g} noise={:.4g} omega={:.4g} lml={:.6g}",
                   fit_round, hp.lengthscales[0], hp.signal_var, hp.noise_var, hp.omega,
                   result.lml);
  }
  cached_hp_ = hp;
  cached_round_ = fit_round;
  return hp;
}

std::vector<Config> Pb2Explorer::explore(std::span<const TrialRecord> store,
                                         const PopulationState &pop,
                                         std::span<const std::int64_t> targets,
                                         std::int64_t round, Rng &rng) {
  std::vector<Config> out;
  if (targets.empty()) return out;
  last_hp_.reset();

  std::vector<TimedPoint> pending;
  const std::int64_t t_query = round + 1;
  for (const auto &agent : pop.agents) {
    if (std::find(targets.begin(), targets.end(), agent.id) == targets.end())
      pending.push_back({space_.normalize(agent.config), t_query});
  }
  last_pending_ = pending.size();

  const auto uniform = [&] {
    out.clear();
    for (std::size_t i = 0; i < targets.size(); ++i) out.push_back(space_.sample_uniform(rng));
    return out;
  };

  const auto data = apply_window(gp_records(store), settings_.window);
  if (data.empty()) return uniform();

  try {
    const GpHyperparams hp = hyperparams_for(data, store, round);
    const GpModel model = GpModel::fit(data, hp, 0);
    const auto candidates = generate_candidates(data, space_.size(), settings_.candidates, rng);
    const double b = beta(std::max<std::int64_t>(round, 1), settings_.beta);
    const auto selection = select_batch(model, pending, targets.size(), t_query, b, candidates);
    for (const auto &u : selection.points) out.push_back(space_.denormalize(u));
    last_hp_ = hp;
  } catch (const NumericalFailure &e) {
    logger().warn("round {}: GP failed ({}); sampling uniformly", round, e.what());
    return uniform();
  }
  return out;
}

// ---------------------------------------------------------------------------

Scheduler::Scheduler(const Trainer &trainer, SearchSpace space, ScheduleSettings settings)
    : trainer_(trainer), space_(std::move(space)), settings_(std::move(settings)) {
  settings_.validate();
  if (settings_.policy == Policy::kPb2)
    pb2_.emplace(space_, settings_.gp, settings_.seed, settings_.ready_interval);
}

std::uint64_t Scheduler::agent_seed(std::int64_t id) const {
  Rng rng = derive_rng(settings_.seed, {stream::kTrainer, static_cast<std::uint64_t>(id)});
  return rng();
}

TrialRecord Scheduler::make_record(const AgentState &agent, Event event, double y) const {
  TrialRecord r;
  r.round = pop_.round;
  r.agent = agent.id;
  r.x = agent.config;
  r.u = space_.normalize(agent.config);
  r.y = y;
  r.F = agent.score;
  r.event = event;
  r.seed = settings_.seed;
  r.policy = to_string(settings_.policy);
  return r;
}

void Scheduler::emit(TrialRecord record) {
  if (tail_pos_ < expected_tail_.size()) {
    if (serialize(record) != serialize(expected_tail_[tail_pos_]))
      throw ResumeMismatch("regenerated record for round " + std::to_string(record.round) +
                           ", agent " + std::to_string(record.agent) +
                           " differs from the log being resumed");
    ++tail_pos_;
    log_.push_back(std::move(record));
    return;
  }
  if (sink_) sink_(record);
  log_.push_back(std::move(record));
}

void Scheduler::start() {
  if (started_) throw std::logic_error("scheduler already started");
  started_ = true;
  Rng rng = derive_rng(settings_.seed, {stream::kInit});
  pop_.round = 0;
  pop_.agents.clear();
  for (std::size_t b = 0; b < settings_.population; ++b) {
    AgentState agent;
    agent.id = static_cast<std::int64_t>(b);
    agent.config = space_.sample_uniform(rng);
    agent.trainer_state = trainer_.init(agent_seed(agent.id), agent.config);
    agent.score = trainer_.score(*agent.trainer_state);
    pop_.agents.push_back(std::move(agent));
  }
  for (const auto &agent : pop_.agents) emit(make_record(agent, Event::kExplore, 0.0));
}

void Scheduler::resume(std::span<const TrialRecord> log) {
  if (started_) throw std::logic_error("scheduler already started");
  const ResumePoint point = resume_state(log, settings_);
  expected_tail_.assign(log.begin() + static_cast<std::ptrdiff_t>(point.complete_records),
                        log.end());
  tail_pos_ = 0;
  if (point.complete_records == 0) {
    start();
    return;
  }
  started_ = true;

  const auto mismatch = [](const TrialRecord &r, const std::string &what) {
    return ResumeMismatch("replay of round " + std::to_string(r.round) + ", agent " +
                          std::to_string(r.agent) + ": " + what);
  };
  for (std::size_t i = 0; i < point.complete_records; ++i) {
    const TrialRecord &r = log[i];
    pop_.round = r.round;
    if (r.event == Event::kExplore && r.round == 0) {
      AgentState agent;
      agent.id = r.agent;
      agent.config = r.x;
      agent.trainer_state = trainer_.init(agent_seed(agent.id), agent.config);
      agent.score = trainer_.score(*agent.trainer_state);
      if (agent.score != r.F) throw mismatch(r, "initial score differs");
      pop_.agents.push_back(std::move(agent));
    } else {
      AgentState &agent = pop_.agents.at(static_cast<std::size_t>(r.agent));
      switch (r.event) {
        case Event::kStep:
          if (agent.config != r.x) throw mismatch(r, "config differs");
          agent.score = trainer_.step(*agent.trainer_state, agent.config);
          if (agent.score != r.F) throw mismatch(r, "trainer did not reproduce the logged score");
          break;
        case Event::kExploit: {
          const AgentState &winner = pop_.agents.at(static_cast<std::size_t>(*r.copied_from));
          agent.trainer_state = trainer_.clone(*winner.trainer_state);
          agent.score = winner.score;
          agent.lineage.push_back({r.round, winner.id});
          if (agent.score != r.F) throw mismatch(r, "copied score differs");
          break;
        }
        case Event::kExplore:
          agent.config = r.x;
          break;
      }
    }
    log_.push_back(r);
  }
  pop_.round = point.next_round - 1;
}

void Scheduler::advance_round() {
  const std::int64_t t = pop_.round + 1;
  const double noise = trainer_.observation_noise();

  std::vector<double> scores(pop_.agents.size());
  std::vector<double> deltas(pop_.agents.size());
  for (std::size_t b = 0; b < pop_.agents.size(); ++b) {
    AgentState &agent = pop_.agents[b];
    const double f = trainer_.step(*agent.trainer_state, agent.config);
    if (!std::isfinite(f))
      throw TrainerFailure("agent " + std::to_string(agent.id) + " produced a non-finite score in round " +
                           std::to_string(t));
    double y = f - agent.score;
    if (noise > 0.0) {
      Rng rng = derive_rng(settings_.seed, {stream::kNoise, static_cast<std::uint64_t>(t),
                                            static_cast<std::uint64_t>(agent.id)});
      y += std::normal_distribution<double>(0.0, noise)(rng);
    }
    scores[b] = f;
    deltas[b] = y;
  }

  pop_.round = t;
  for (std::size_t b = 0; b < pop_.agents.size(); ++b) {
    pop_.agents[b].score = scores[b];
    emit(make_record(pop_.agents[b], Event::kStep, deltas[b]));
  }

  if (t % settings_.ready_interval != 0) return;

  std::map<std::int64_t, std::int64_t> winner_of;
  if (pop_.agents.size() >= 2) {
    Rng rng = derive_rng(settings_.seed, {stream::kExploit, static_cast<std::uint64_t>(t)});
    for (const auto &rep : exploit(pop_, trainer_, settings_.quantile, rng))
      winner_of[rep.loser] = rep.winner;
    for (const auto &[loser, winner] : winner_of) {
      TrialRecord r = make_record(pop_.agents[static_cast<std::size_t>(loser)], Event::kExploit, 0.0);
      r.copied_from = winner;
      emit(std::move(r));
    }
  }

  std::vector<std::int64_t> targets;
  if (settings_.policy == Policy::kPb2 && settings_.explore_all) {
    for (const auto &agent : pop_.agents) targets.push_back(agent.id);
  } else {
    for (const auto &[loser, winner] : winner_of) targets.push_back(loser);
  }
  if (targets.empty()) return;

  Rng rng = derive_rng(settings_.seed, {stream::kExplore, static_cast<std::uint64_t>(t)});
  std::vector<Config> configs;
  switch (settings_.policy) {
    case Policy::kPb2:
      configs = pb2_->explore(log_, pop_, targets, t, rng);
      pending_sizes_.push_back(pb2_->last_pending());
      break;
    case Policy::kPbt:
      for (auto id : targets) {
        const auto &top = pop_.agents[static_cast<std::size_t>(winner_of.at(id))].config;
        configs.push_back(pbt_explore(top, settings_.epsilon, space_, rng));
      }
      break;
    case Policy::kRandom:
      for (std::size_t i = 0; i < targets.size(); ++i) configs.push_back(random_explore(space_, rng));
      break;
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    AgentState &agent = pop_.agents[static_cast<std::size_t>(targets[i])];
    agent.config = configs[i];
    emit(make_record(agent, Event::kExplore, 0.0));
  }
}

void Scheduler::run_until(std::int64_t last_round) {
  if (!started_) start();
  const std::int64_t stop = std::min(last_round, settings_.horizon - 1);
  while (pop_.round < stop) advance_round();
  if (finished() && trainer_.observation_noise() == 0.0) {
    const double gap = max_telescoping_gap(log_);
    if (gap > 1e-9) logger().warn("score deltas do not telescope (max gap {:.3g})", gap);
  }
}

std::vector<TrialRecord> run_schedule(const Trainer &trainer, const SearchSpace &space,
                                      const ScheduleSettings &settings, Scheduler::Sink sink) {
  Scheduler scheduler(trainer, space, settings);
  scheduler.set_sink(std::move(sink));
  scheduler.run();
  return scheduler.log();
}

double max_telescoping_gap(std::span<const TrialRecord> log) {
  struct Span {
    double start = 0.0;
    double last = 0.0;
    double sum = 0.0;
    bool open = false;
  };
  std::map<std::int64_t, Span> spans;
  double worst = 0.0;
  const auto close = [&](Span &s) {
    if (s.open) worst = std::max(worst, std::abs(s.sum - (s.last - s.start)));
  };
  for (const auto &r : log) {
    Span &s = spans[r.agent];
    switch (r.event) {
      case Event::kStep:
        if (!s.open) s = {r.F - r.y, r.F - r.y, 0.0, true};
        s.sum += r.y;
        s.last = r.F;
        break;
      case Event::kExploit:
        close(s);
        s = {r.F, r.F, 0.0, true};
        break;
      case Event::kExplore:
        if (!s.open) s = {r.F, r.F, 0.0, true};
        break;
    }
  }
  for (auto &[id, s] : spans) close(s);
  return worst;
}

}  // namespace pb2
