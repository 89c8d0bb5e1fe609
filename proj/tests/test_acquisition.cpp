#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "pb2/acquisition.hpp"
#include "pb2/errors.hpp"

using namespace pb2;

namespace {

std::vector<GpRecord> make_data(Rng &rng, std::size_t n, std::size_t d, int max_time) {
  std::uniform_real_distribution<double> unif(0, 1);
  std::normal_distribution<double> gauss(0, 1);
  std::uniform_int_distribution<int> time(0, max_time);
  std::vector<GpRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(d));
    for (auto &c : u) c = unif(rng);
    out.push_back({u, time(rng), std::sin(6 * u[0]) + 0.1 * gauss(rng)});
  }
  return out;
}

std::vector<Eigen::VectorXd> grid(std::size_t n) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(Eigen::VectorXd::Constant(1, static_cast<double>(i) / static_cast<double>(n - 1)));
  return out;
}

GpHyperparams hyper(double l, double noise, double omega) {
  GpHyperparams hp = GpHyperparams::defaults(1);
  hp.lengthscales.setConstant(l);
  hp.noise_var = noise;
  hp.omega = omega;
  return hp;
}

}  // namespace

TEST_CASE("beta schedule") {
  const BetaSchedule s;
  CHECK(beta(1, s) == 0.2);
  CHECK(beta(100, s) == doctest::Approx(3.8888794541139364).epsilon(1e-14));
  double prev = beta(3, s);
  for (std::int64_t t = 4; t < 500; ++t) {
    CHECK(beta(t, s) >= prev);
    prev = beta(t, s);
  }
  CHECK_THROWS_AS(beta(0, s), std::invalid_argument);
}

TEST_CASE("ucb composes mean and stddev") {
  Rng rng(2);
  const auto data = make_data(rng, 10, 1, 3);
  const GpModel m = GpModel::fit(data, hyper(0.2, 0.01, 0.1));
  for (const auto &u : grid(25)) {
    const Prediction p = m.posterior(u, 4);
    CHECK(ucb(m, u, 4, 0.0) == p.mean);
    CHECK(std::abs(ucb(m, u, 4, 2.5) - (p.mean + std::sqrt(2.5) * std::sqrt(p.var))) <= 1e-10);
    CHECK(ucb(m, u, 4, 3.0) >= ucb(m, u, 4, 1.0));
  }
  CHECK_THROWS_AS(ucb(m, grid(2)[0], 4, -1.0), std::invalid_argument);
}

TEST_CASE("single pick equals sequential ucb") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto data = make_data(rng, 12, 1, 4);
    const GpModel m = GpModel::fit(data, hyper(0.25, 0.02, 0.0));
    const auto cands = generate_candidates(data, 1, {}, rng);
    const auto sel = select_batch(m, {}, 1, 5, 2.0, cands);
    REQUIRE(sel.candidate_indices.size() == 1);
    CHECK(sel.candidate_indices[0] == ucb_argmax(m, cands, 5, 2.0));
    CHECK(sel.points[0] == cands[sel.candidate_indices[0]]);
  }
}

TEST_CASE("hallucinated stddev shrinks while the mean stays fixed") {
  Rng rng(5);
  const auto data = make_data(rng, 15, 1, 6);
  const GpModel m = GpModel::fit(data, hyper(0.15, 0.01, 0.2));
  const auto alpha_before = m.alpha();
  const auto cands = grid(256);
  const std::vector<TimedPoint> pending{{Eigen::VectorXd::Constant(1, 0.3), 7}};
  BatchTrace trace;
  const auto sel = select_batch(m, pending, 4, 7, 3.0, cands, &trace);
  REQUIRE(trace.means.size() == 4);
  for (std::size_t b = 1; b < 4; ++b) {
    CHECK(trace.means[b] == trace.means[0]);
    CHECK((trace.stddevs[b] - trace.stddevs[b - 1]).maxCoeff() <= 1e-9);
  }
  CHECK(m.alpha() == alpha_before);
  CHECK(sel.points.size() == 4);
  CHECK(sel.scores.size() == 4);
}

TEST_CASE("batch picks are distinct") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(100 + seed);
    const auto data = make_data(rng, 10, 1, 3);
    const GpModel m = GpModel::fit(data, hyper(0.2, 0.01, 0.1));
    const auto cands = grid(64);
    const auto sel = select_batch(m, {}, 4, 4, 2.0, cands);
    const std::set<std::size_t> unique(sel.candidate_indices.begin(), sel.candidate_indices.end());
    CHECK(unique.size() == 4);
  }
}

TEST_CASE("ties go to the lowest index") {
  Rng rng(3);
  const auto data = make_data(rng, 5, 1, 2);
  const GpModel m = GpModel::fit(data, hyper(0.2, 0.01, 0.1));
  const std::vector<Eigen::VectorXd> same(5, Eigen::VectorXd::Constant(1, 0.42));
  CHECK(select_batch(m, {}, 1, 3, 1.0, same).candidate_indices[0] == 0);
  CHECK(ucb_argmax(m, same, 3, 1.0) == 0);
}

TEST_CASE("selection errors") {
  Rng rng(3);
  const auto data = make_data(rng, 5, 1, 2);
  const GpModel m = GpModel::fit(data, hyper(0.2, 0.01, 0.1));
  CHECK_THROWS_AS(select_batch(m, {}, 1, 3, 1.0, {}), NoCandidates);
  CHECK_THROWS_AS(select_batch(m, {}, 0, 3, 1.0, grid(4)), std::invalid_argument);
}

TEST_CASE("candidate generation") {
  Rng rng(7);
  const auto data = make_data(rng, 30, 2, 3);
  CandidateSettings s;
  const auto cands = generate_candidates(data, 2, s, rng);
  CHECK(cands.size() == s.uniform + s.top * s.per_top);
  for (const auto &c : cands) {
    CHECK(c.size() == 2);
    CHECK(c.minCoeff() >= 0.0);
    CHECK(c.maxCoeff() <= 1.0);
  }
  CHECK(generate_candidates({}, 2, s, rng).size() == s.uniform);
  Rng a(1), b(1);
  CHECK(generate_candidates(data, 2, s, a) == generate_candidates(data, 2, s, b));
}

TEST_CASE("batch larger than the candidate set repeats candidates") {
  Rng rng(3);
  const auto data = make_data(rng, 5, 1, 2);
  const GpModel m = GpModel::fit(data, hyper(0.2, 0.01, 0.1));
  const auto sel = select_batch(m, {}, 5, 3, 1.0, grid(2));
  CHECK(sel.points.size() == 5);
  const std::set<std::size_t> first(sel.candidate_indices.begin(), sel.candidate_indices.begin() + 2);
  CHECK(first.size() == 2);
}
