#include "pb2/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/fmt/fmt.h>

#include "pb2/benchfn.hpp"
#include "pb2/config.hpp"
#include "pb2/errors.hpp"
#include "pb2/log.hpp"
#include "pb2/trialstore.hpp"

namespace pb2 {

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::string num(double v) { return fmt::format("{:.17g}", v); }

struct CommonOptions {
  std::string config_path;
  std::optional<std::string> policy;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<std::string> out;
};

void add_common(CLI::App &cmd, CommonOptions &o) {
  cmd.add_option("--config", o.config_path, "JSON run configuration");
  cmd.add_option("--policy", o.policy, "pb2, pbt or random");
  cmd.add_option("--seed", o.seed, "master seed");
  cmd.add_option("--set", o.overrides, "dotted-path override key=value (repeatable)");
  cmd.add_option("--out", o.out, "output path");
}

RunConfig build_config(const CommonOptions &o) {
  nlohmann::json doc = nlohmann::json::object();
  if (!o.config_path.empty()) doc = load_config_document(o.config_path);
  for (const auto &s : o.overrides) apply_override(doc, s);
  if (o.policy) doc["policy"] = *o.policy;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.out) doc["output"] = *o.out;
  return parse_run_config(doc);
}

std::shared_ptr<BenchmarkFunction> make_benchmark(const RunConfig &cfg, std::uint64_t seed) {
  const auto &b = cfg.bench;
  return BenchmarkFunction::sample(b.d, b.m, b.lengthscale, b.signal_var, b.omega, seed);
}

std::unique_ptr<Trainer> make_trainer(const RunConfig &cfg, std::uint64_t seed) {
  if (cfg.trainer == TrainerKind::kQuadratic) {
    return std::make_unique<QuadraticTrainer>("lr");
  }
  return std::make_unique<TvBenchTrainer>(make_benchmark(cfg, seed), cfg.space, cfg.bench.noise);
}

// Final and best-ever F per agent, as read from a log.
struct AgentSummary {
  std::int64_t id = 0;
  std::optional<double> final_f;
  double best_f = 0.0;
  std::int64_t best_round = 0;
  Config best_config;
  std::size_t exploits = 0;
  bool seen = false;
};

std::vector<AgentSummary> summarize(std::span<const TrialRecord> log) {
  std::map<std::int64_t, AgentSummary> by_id;
  for (const auto &r : log) {
    auto &a = by_id[r.agent];
    a.id = r.agent;
    if (r.event == Event::kStep) a.final_f = r.F;
    if (r.event == Event::kExploit) ++a.exploits;
    if (!a.seen || r.F > a.best_f) {
      a.best_f = r.F;
      a.best_round = r.round;
      a.best_config = r.x;
      a.seen = true;
    }
  }
  std::vector<AgentSummary> out;
  for (auto &[id, a] : by_id) out.push_back(std::move(a));
  return out;
}

std::string config_text(const Config &c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[k, v] : c) j[k] = v;
  return j.dump();
}

int cmd_run(const CommonOptions &o, bool resume, std::optional<std::int64_t> stop_after,
            std::ostream &out) {
  const RunConfig cfg = build_config(o);
  const auto trainer = make_trainer(cfg, cfg.schedule.seed);
  Scheduler sched(*trainer, cfg.space, cfg.schedule);

  std::unique_ptr<TrialWriter> writer;
  if (resume) {
    if (!std::filesystem::exists(cfg.output))
      throw ConfigError("output", "no log to resume at '" + cfg.output + "'");
    drop_partial_tail(cfg.output);
    LoadedLog loaded = load(cfg.output);
    if (!loaded.header) throw ResumeMismatch(cfg.output + ": log has no header line");
    if (loaded.dropped_tail)
      throw StorageError(cfg.output + ": the last line is corrupt; remove it before resuming");
    check_header(*loaded.header, cfg.schedule, cfg.space);
    sched.resume(loaded.records);
    writer = std::make_unique<TrialWriter>(cfg.output, false);
  } else {
    writer = std::make_unique<TrialWriter>(cfg.output, true);
    writer->write_header(make_header(cfg.schedule, cfg.space));
  }
  sched.set_sink([&](const TrialRecord &r) { writer->append(r); });
  if (!resume) sched.start();

  const std::int64_t last = stop_after ? *stop_after : cfg.schedule.horizon - 1;
  sched.run_until(last);

  const auto agents = summarize(sched.log());
  out << fmt::format("{:>5}  {:>24}  {:>24}\n", "agent", "final_F", "best_F");
  double best = -std::numeric_limits<double>::infinity();
  std::int64_t best_agent = -1;
  for (const auto &a : agents) {
    out << fmt::format("{:>5}  {:>24}  {:>24}\n", a.id, a.final_f ? num(*a.final_f) : "-",
                       num(a.best_f));
    if (a.best_f > best) {
      best = a.best_f;
      best_agent = a.id;
    }
  }
  out << fmt::format("best F {} (agent {}); {} records in {}\n", num(best), best_agent,
                     sched.log().size(), cfg.output);
  if (!sched.finished()) out << "stopped after round " << sched.population().round << "\n";
  return 0;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_bench(const CommonOptions &o, std::optional<std::size_t> seeds_opt, std::ostream &out) {
  RunConfig cfg = build_config(o);
  if (cfg.trainer != TrainerKind::kTvBench) throw ConfigError("trainer", "bench needs \"tvbench\"");
  if (cfg.bench.d > 2) throw ConfigError("bench.d", "bench supports d <= 2");
  const std::size_t seeds = seeds_opt ? *seeds_opt : cfg.seeds;
  if (seeds < 1) throw ConfigError("seeds", "must be at least 1");
  const std::string csv_path = o.out ? *o.out : "regret.csv";
  const std::int64_t rounds = cfg.schedule.horizon;

  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw StorageError(csv_path + ": cannot open for writing");
  csv << "round,policy,seed,r_t,R_t,best_F\n";

  std::map<Policy, std::vector<double>> finals;
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = cfg.schedule.seed + i;
    const auto fn = make_benchmark(cfg, seed);
    const TvBenchTrainer trainer(fn, cfg.space, cfg.bench.noise);
    for (Policy p : cfg.bench_policies) {
      ScheduleSettings s = cfg.schedule;
      s.policy = p;
      s.seed = seed;
      s.horizon = rounds + 1;
      const auto log = run_schedule(trainer, cfg.space, s);
      const auto regret = cumulative_regret(log, *fn, cfg.bench.resolution);

      std::map<std::int64_t, double> best_f;
      for (const auto &r : log) {
        if (r.event != Event::kStep) continue;
        auto [it, fresh] = best_f.emplace(r.round, r.F);
        if (!fresh) it->second = std::max(it->second, r.F);
      }
      for (std::size_t k = 0; k < regret.rounds.size(); ++k) {
        const auto t = regret.rounds[k];
        csv << t << ',' << to_string(p) << ',' << seed << ',' << num(regret.instantaneous[k])
            << ',' << num(regret.cumulative[k]) << ',' << num(best_f.at(t)) << '\n';
      }
      finals[p].push_back(regret.cumulative.empty() ? 0.0 : regret.cumulative.back());
      logger().info("bench seed {} policy {}: R_T = {}", seed, to_string(p),
                    num(finals[p].back()));
    }
  }
  csv.close();
  if (!csv) throw StorageError(csv_path + ": write failed");

  const std::string summary_path = csv_path + ".summary.csv";
  std::ofstream summary(summary_path, std::ios::trunc);
  if (!summary) throw StorageError(summary_path + ": cannot open for writing");
  summary << "policy,seeds,median_R_T\n";
  out << fmt::format("{:<8}  {:>5}  {:>24}\n", "policy", "seeds", "median_R_T");
  for (Policy p : cfg.bench_policies) {
    const double m = median(finals[p]);
    summary << to_string(p) << ',' << finals[p].size() << ',' << num(m) << '\n';
    out << fmt::format("{:<8}  {:>5}  {:>24}\n", to_string(p), finals[p].size(), num(m));
  }
  summary.close();
  if (!summary) throw StorageError(summary_path + ": write failed");
  out << "curves: " << csv_path << ", summary: " << summary_path << "\n";
  return 0;
}

int cmd_report(const std::string &path, std::ostream &out) {
  if (!std::filesystem::exists(path)) throw ConfigError("log", "cannot read '" + path + "'");
  const LoadedLog loaded = load(path);
  const auto agents = summarize(loaded.records);
  const auto row = [&](const std::string &agent, const std::string &final_f, double best,
                       std::size_t exploits, std::int64_t round, const std::string &config) {
    out << fmt::format("{:>5}  {:>24}  {:>24}  {:>8}  {:>10}  {}\n", agent, final_f, num(best),
                       exploits, round, config);
  };
  out << fmt::format("{:>5}  {:>24}  {:>24}  {:>8}  {:>10}  {}\n", "agent", "final_F", "best_F",
                     "exploits", "best_round", "best_config");
  std::optional<double> best_final;
  const AgentSummary *best = nullptr;
  std::size_t exploits = 0;
  for (const auto &a : agents) {
    row(std::to_string(a.id), a.final_f ? num(*a.final_f) : "-", a.best_f, a.exploits,
        a.best_round, config_text(a.best_config));
    if (a.final_f && (!best_final || *a.final_f > *best_final)) best_final = a.final_f;
    if (best == nullptr || a.best_f > best->best_f) best = &a;
    exploits += a.exploits;
  }
  if (best != nullptr)
    row("all", best_final ? num(*best_final) : "-", best->best_f, exploits, best->best_round,
        config_text(best->best_config));
  return 0;
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Population-based hyperparameter schedules: PB2, PBT and random search"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  bool resume = false;
  std::optional<std::int64_t> stop_after;
  auto *run = app.add_subcommand("run", "train a population and write a trial log");
  add_common(*run, run_opts);
  run->add_flag("--resume", resume, "continue the log at --out / output");
  run->add_option("--stop-after", stop_after, "stop once this round has completed");

  CommonOptions bench_opts;
  std::optional<std::size_t> seeds;
  auto *bench = app.add_subcommand("bench", "compare policies on the synthetic benchmark");
  add_common(*bench, bench_opts);
  bench->add_option("--seeds", seeds, "number of paired seeds");

  std::string report_path;
  auto *report = app.add_subcommand("report", "summarize a trial log");
  report->add_option("log", report_path, "trial log (JSONL)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts, resume, stop_after, out);
    if (bench->parsed()) return cmd_bench(bench_opts, seeds, out);
    return cmd_report(report_path, out);
  } catch (const ConfigError &e) {
    err << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError &e) {
    err << "parse error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace pb2
