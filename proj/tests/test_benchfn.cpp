#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pb2/benchfn.hpp"
#include "pb2/errors.hpp"
#include "pb2/schedulers.hpp"

using namespace pb2;

namespace {

double correlation(const std::vector<double> &a, const std::vector<double> &b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Eigen::VectorXd point(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("static and independent limits") {
  const auto still = BenchmarkFunction::sample(1, 128, 0.2, 1.0, 0.0, 3);
  CHECK(still->weights(1) == still->weights(40));
  for (double x : {0.0, 0.3, 0.77}) CHECK(still->eval(point(x), 1) == still->eval(point(x), 25));

  const auto fresh = BenchmarkFunction::sample(1, 4096, 0.2, 1.0, 1.0, 3);
  const Eigen::VectorXd w1 = fresh->weights(1);
  const Eigen::VectorXd w2 = fresh->weights(2);
  const std::vector<double> a(w1.data(), w1.data() + w1.size());
  const std::vector<double> b(w2.data(), w2.data() + w2.size());
  CHECK(std::abs(correlation(a, b)) < 0.1);

  CHECK_THROWS_AS(BenchmarkFunction::sample(1, 32, 0.2, 1.0, 0.1, 0), std::invalid_argument);
}

TEST_CASE("sampling is seeded and evaluation repeatable") {
  const auto a = BenchmarkFunction::sample(2, 256, 0.3, 1.0, 0.1, 7);
  const auto b = BenchmarkFunction::sample(2, 256, 0.3, 1.0, 0.1, 7);
  const Eigen::Vector2d u(0.3, 0.6);
  // query b out of order: weights must not depend on access order
  const double b9 = b->eval(u, 9);
  CHECK(a->eval(u, 9) == b9);
  CHECK(a->eval(u, 9) == a->eval(u, 9));
  CHECK(a->eval(u, 2) == b->eval(u, 2));
  CHECK(a->eval(u, 2) != BenchmarkFunction::sample(2, 256, 0.3, 1.0, 0.1, 8)->eval(u, 2));
}

TEST_CASE("f_1 covariance approximates the se kernel") {
  const double l = 0.2;
  const std::vector<double> gaps{0.0, 0.1, 0.2, 0.3};
  std::vector<double> cov(gaps.size(), 0.0);
  const int seeds = 2000;
  for (int s = 0; s < seeds; ++s) {
    const auto fn = BenchmarkFunction::sample(1, 256, l, 1.5, 0.1, 1000 + s);
    const double f0 = fn->eval(point(0.4), 1);
    for (std::size_t g = 0; g < gaps.size(); ++g)
      cov[g] += f0 * fn->eval(point(0.4 + gaps[g]), 1) / seeds;
  }
  for (std::size_t g = 0; g < gaps.size(); ++g) {
    const double k = 1.5 * std::exp(-0.5 * gaps[g] * gaps[g] / (l * l));
    CHECK(std::abs(cov[g] - k) <= 0.1 * k);
  }
}

TEST_CASE("grid variance is close to the signal variance") {
  double mean_sq = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto fn = BenchmarkFunction::sample(1, 1024, 0.2, 2.0, 0.01, 50 + s);
    for (int i = 0; i < 200; ++i) mean_sq += std::pow(fn->eval(point(i / 199.0), 1), 2) / (200.0 * seeds);
  }
  CHECK(std::abs(mean_sq - 2.0) <= 0.25 * 2.0);
}

TEST_CASE("lag-one correlation over rounds") {
  const double omega = 0.1;
  const auto fn = BenchmarkFunction::sample(1, 1024, 0.2, 1.0, omega, 12);
  std::vector<double> now, next;
  for (double x : {0.1, 0.35, 0.6, 0.85}) {
    for (int t = 1; t < 1500; ++t) {
      now.push_back(fn->eval(point(x), t));
      next.push_back(fn->eval(point(x), t + 1));
    }
  }
  CHECK(std::abs(correlation(now, next) - std::sqrt(1 - omega)) <= 0.05);
}

TEST_CASE("weights stay standard normal") {
  double sum_sq = 0.0;
  double count = 0.0;
  for (int s = 0; s < 2000; ++s) {
    const auto fn = BenchmarkFunction::sample(1, 64, 0.2, 1.0, 0.3, 5000 + s);
    const Eigen::VectorXd w = fn->weights(30);
    sum_sq += w.squaredNorm();
    count += static_cast<double>(w.size());
  }
  CHECK(std::abs(sum_sq / count - 1.0) <= 0.05);
}

TEST_CASE("grid optimum") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0, 1);
  std::uniform_real_distribution<double> unif(0, 1);
  const int m = 256;
  const double l = 0.2;
  Eigen::MatrixXd freq(m, 1);
  Eigen::VectorXd phase(m), w(m);
  for (int k = 0; k < m; ++k) {
    freq(k, 0) = gauss(rng) / l;
    phase[k] = 2 * std::numbers::pi * unif(rng);
    w[k] = gauss(rng);
  }
  const BenchmarkFunction fn(freq, phase, w, 0.05, 1.0, l, 9);

  const Optimum opt = fn.true_argmax(1);
  CHECK(opt.value == fn.eval(opt.x, 1));
  // |f'| <= sqrt(2 sv / m) sum |w_k nu_k|; the nearest grid point is within h/2
  const double lipschitz = std::sqrt(2.0 / m) * (w.array().abs() * freq.col(0).array().abs()).sum();
  const double tol = lipschitz * 0.5 / 2047.0;
  for (int i = 0; i < 1000; ++i) CHECK(opt.value >= fn.eval(point(unif(rng)), 1) - tol);

  const Optimum fine = fn.true_argmax(1, 8192);
  CHECK(std::abs(fine.value - opt.value) < 1e-3);

  const BenchmarkFunction zero(freq, phase, Eigen::VectorXd::Zero(m), 0.0, 1.0, l, 9);
  const Optimum flat = zero.true_argmax(5);
  CHECK(flat.value == 0.0);
  CHECK(flat.x[0] == 0.0);

  const auto plane = BenchmarkFunction::sample(2, 128, 0.3, 1.0, 0.1, 2);
  const Optimum o2 = plane->true_argmax(3);
  CHECK(o2.x.size() == 2);
  CHECK(o2.value >= plane->eval(Eigen::Vector2d(0.5, 0.5), 3) - 1e-2);

  CHECK_THROWS_AS(BenchmarkFunction::sample(3, 64, 0.3, 1.0, 0.1, 2)->true_argmax(1), Unsupported);
}

TEST_CASE("cumulative regret") {
  const auto fn = BenchmarkFunction::sample(1, 512, 0.2, 1.0, 0.05, 21);
  const SearchSpace space({{"x0", 0.0, 1.0, Scale::kLinear}});
  const TvBenchTrainer trainer(fn, space);
  ScheduleSettings s;
  s.policy = Policy::kRandom;
  s.population = 3;
  s.horizon = 6;
  s.seed = 2;
  const auto log = run_schedule(trainer, space, s);
  const auto series = cumulative_regret(log, *fn);
  REQUIRE(series.rounds.size() == 5);

  double total = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const std::int64_t t = static_cast<std::int64_t>(k) + 1;
    double grid_best = -1e300;
    for (int i = 0; i < 2048; ++i) grid_best = std::max(grid_best, fn->eval(point(i / 2047.0), t));
    double agent_best = -1e300;
    for (const auto &r : log)
      if (r.event == Event::kStep && r.round == t) agent_best = std::max(agent_best, fn->eval(r.u, t));
    const double r = std::max(grid_best, agent_best) - agent_best;
    total += r;
    CHECK(std::abs(series.instantaneous[k] - r) <= 1e-12);
    CHECK(std::abs(series.cumulative[k] - total) <= 1e-12);
    CHECK(series.instantaneous[k] >= 0.0);
    CHECK(series.per_agent[k].size() == 3);
    if (k > 0) CHECK(series.cumulative[k] >= series.cumulative[k - 1]);
  }

  // an agent sitting on the optimum every round has zero regret
  std::vector<TrialRecord> oracle_log;
  for (std::int64_t t = 1; t <= 5; ++t) {
    TrialRecord r;
    r.round = t;
    r.u = fn->true_argmax(t).x;
    oracle_log.push_back(r);
  }
  for (double r : cumulative_regret(oracle_log, *fn).instantaneous) CHECK(r == 0.0);
}

TEST_CASE("bench trainer accumulates f_t") {
  const auto fn = BenchmarkFunction::sample(1, 128, 0.2, 1.0, 0.1, 1);
  const SearchSpace space({{"x0", 0.0, 1.0, Scale::kLinear}});
  const TvBenchTrainer trainer(fn, space);
  const Config c{{"x0", 0.25}};
  auto state = trainer.init(0, c);
  CHECK(trainer.score(*state) == 0.0);
  const double f1 = trainer.step(*state, c);
  const double f2 = trainer.step(*state, c);
  CHECK(f1 == fn->eval(point(0.25), 1));
  CHECK(f2 == f1 + fn->eval(point(0.25), 2));
}

TEST_CASE("quadratic trainer dynamics") {
  const auto trainer = toy_trainer(ToyKind::kQuadratic);
  const QuadraticTrainer quad;
  CHECK(quad.curvature()[0] == 1.0);
  CHECK(quad.curvature()[9] == doctest::Approx(50.0).epsilon(1e-14));

  auto still = trainer->init(3, {{"lr", 0.0}});
  const double f0 = trainer->score(*still);
  for (int i = 0; i < 5; ++i) CHECK(trainer->step(*still, {{"lr", 0.0}}) == f0);

  const Config contract{{"lr", 2.0 / 51.0}};
  auto s = trainer->init(3, contract);
  double prev = trainer->score(*s);
  for (int i = 0; i < 2000 && QuadraticTrainer::theta(*s).norm() >= 1e-12; ++i) {
    const double f = trainer->step(*s, contract);
    CHECK(f > prev);
    prev = f;
  }

  const Config blow{{"lr", 0.05}};
  auto d = trainer->init(3, blow);
  prev = trainer->score(*d);
  for (int i = 1; i <= 30; ++i) {
    const double f = trainer->step(*d, blow);
    if (i > 3) CHECK(f < prev);
    prev = f;
  }

  CHECK_THROWS_AS(trainer->step(*d, {{"eta", 0.1}}), MissingDimension);
  auto a = trainer->init(11, contract);
  auto b = trainer->init(11, contract);
  CHECK(QuadraticTrainer::theta(*a) == QuadraticTrainer::theta(*b));
}
