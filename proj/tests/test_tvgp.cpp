#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dense_oracle.hpp"
#include "pb2/errors.hpp"
#include "pb2/tvgp.hpp"

using namespace pb2;

namespace {

GpRecord rec(std::initializer_list<double> u, std::int64_t t, double y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(u.size()));
  Eigen::Index i = 0;
  for (double c : u) v[i++] = c;
  return {v, t, y};
}

GpHyperparams hyper(std::vector<double> ls, double sv, double noise, double omega) {
  GpHyperparams hp;
  hp.lengthscales = Eigen::Map<Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  hp.signal_var = sv;
  hp.noise_var = noise;
  hp.omega = omega;
  return hp;
}

// Four 1-d records shared with tests/oracles/gp_snapshots.py.
std::vector<GpRecord> snapshot_data() {
  return {rec({0.1}, 1, 1.0), rec({0.4}, 1, 2.0), rec({0.4}, 2, 1.5), rec({0.8}, 2, -0.5)};
}

std::vector<GpRecord> make_data(Rng &rng, std::size_t n, std::size_t d, int max_time) {
  std::uniform_real_distribution<double> unif(0, 1);
  std::normal_distribution<double> gauss(0, 1);
  std::uniform_int_distribution<int> time(0, max_time);
  std::vector<GpRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(d));
    for (auto &c : u) c = unif(rng);
    out.push_back({u, time(rng), 3.0 * gauss(rng) + 1.0});
  }
  return out;
}

}  // namespace

TEST_CASE("degenerate standardization") {
  const auto hp = GpHyperparams::defaults(1);
  const std::vector<GpRecord> one{rec({0.3}, 0, 5.0)};
  const GpModel m1 = GpModel::fit(one, hp);
  CHECK(m1.y_mean() == 5.0);
  CHECK(m1.y_std() == 1.0);
  CHECK(m1.targets_std()[0] == 0.0);

  const std::vector<GpRecord> flat{rec({0.1}, 0, 2.0), rec({0.5}, 1, 2.0), rec({0.9}, 1, 2.0)};
  const GpModel m3 = GpModel::fit(flat, hp);
  CHECK(m3.y_std() == 1.0);
  CHECK(m3.targets_std().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(GpModel::fit(std::vector<GpRecord>{}, hp), std::invalid_argument);
}

TEST_CASE("single datum closed form") {
  // omega 0, sv 1, noise 0.01, query at the datum: latent variance 1 - 1/1.01
  const std::vector<GpRecord> one{rec({0.5}, 0, 2.0)};
  const GpModel m = GpModel::fit(one, hyper({0.3}, 1.0, 0.01, 0.0));
  const Prediction raw = m.posterior(Eigen::VectorXd::Constant(1, 0.5), 0);
  const Prediction latent = m.latent_posterior(Eigen::VectorXd::Constant(1, 0.5), 0);
  CHECK(raw.mean == 2.0);
  CHECK(latent.mean == 0.0);
  CHECK(latent.var == doctest::Approx(0.0099009900990099098).epsilon(1e-12));
  CHECK(raw.var == doctest::Approx(0.0099009900990099098).epsilon(1e-12));
}

TEST_CASE("factor and solve residuals") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = make_data(rng, 15, 2, 5);
    const auto hp = hyper({0.35, 0.5}, 1.4, 0.02, 0.2);
    const GpModel m = GpModel::fit(data, hp);
    const Eigen::MatrixXd a = oracle::noisy_gram(data, hp);
    CHECK(m.factor().jitter() == 0.0);
    const Eigen::MatrixXd l = m.chol();
    CHECK((l * l.transpose() - a).norm() / a.norm() <= 1e-8);
    CHECK((a * m.alpha() - m.targets_std()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(m.inputs().size() == data.size());
    CHECK(static_cast<std::size_t>(m.chol().rows()) == data.size());
    CHECK(m.y_std() > 0.0);
  }
}

TEST_CASE("duplicate inputs are factorized") {
  std::vector<GpRecord> data(6, rec({0.5, 0.5}, 3, 1.0));
  data[2].y = 2.0;
  const GpModel m = GpModel::fit(data, hyper({0.3, 0.3}, 1.0, 1e-5, 0.1));
  CHECK(m.alpha().allFinite());
}

TEST_CASE("posterior matches frozen numpy values") {
  const auto data = snapshot_data();
  const auto hp = hyper({0.3}, 1.0, 0.01, 0.1);
  const GpModel m = GpModel::fit(data, hp);
  const Prediction a = m.posterior(Eigen::VectorXd::Constant(1, 0.25), 3);
  CHECK(a.mean == doctest::Approx(1.3572809230601453).epsilon(1e-10));
  CHECK(a.var == doctest::Approx(0.12754916680535108).epsilon(1e-10));
  const Prediction b = m.posterior(Eigen::VectorXd::Constant(1, 0.8), 2);
  CHECK(b.mean == doctest::Approx(-0.47640918594956916).epsilon(1e-10));
  CHECK(b.var == doctest::Approx(0.0086400240855974281).epsilon(1e-9));

  const std::vector<GpRecord> two{rec({0.2, 0.7}, 0, 0.3), rec({0.5, 0.1}, 1, -1.2),
                                  rec({0.9, 0.9}, 3, 2.5)};
  const GpModel m2 = GpModel::fit(two, hyper({0.4, 0.25}, 1.7, 0.05, 0.3));
  const Prediction c = m2.posterior(Eigen::Vector2d(0.6, 0.5), 4);
  CHECK(c.mean == doctest::Approx(0.53629669743339503).epsilon(1e-10));
  CHECK(c.var == doctest::Approx(3.5671553834524534).epsilon(1e-10));
}

TEST_CASE("posterior matches the dense oracle") {
  Rng rng(17);
  std::uniform_real_distribution<double> unif(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto data = make_data(rng, 3, 2, 3);
    const auto hp = hyper({0.2 + unif(rng), 0.2 + unif(rng)}, 0.5 + unif(rng),
                          0.01 + 0.1 * unif(rng), 0.8 * unif(rng));
    const GpModel m = GpModel::fit(data, hp);
    for (int q = 0; q < 5; ++q) {
      const Eigen::Vector2d u(unif(rng), unif(rng));
      const Prediction p = m.posterior(u, 4);
      const auto o = oracle::posterior(data, hp, u, 4);
      CHECK(std::abs(p.mean - o.mean) <= 1e-8);
      CHECK(std::abs(p.var - o.var) <= 1e-8);
      CHECK(p.var <= hp.signal_var * m.y_std() * m.y_std() + 1e-9);
      CHECK(p.var >= 0.0);
    }
  }
}

TEST_CASE("posterior variance ignores targets") {
  Rng rng(23);
  auto data = make_data(rng, 12, 2, 4);
  auto other = data;
  std::normal_distribution<double> gauss(0, 10);
  for (auto &r : other) r.y = gauss(rng);
  const auto hp = hyper({0.3, 0.4}, 1.2, 0.03, 0.15);
  const GpModel a = GpModel::fit(data, hp);
  const GpModel b = GpModel::fit(other, hp);
  std::uniform_real_distribution<double> unif(0, 1);
  for (int q = 0; q < 100; ++q) {
    const Eigen::Vector2d u(unif(rng), unif(rng));
    CHECK(a.latent_posterior(u, 5).var == b.latent_posterior(u, 5).var);
  }
}

TEST_CASE("posterior mean interpolates with tiny noise") {
  const std::vector<GpRecord> data{rec({0.1}, 0, 1.0), rec({0.5}, 0, -2.0), rec({0.9}, 0, 0.5)};
  const GpModel m = GpModel::fit(data, hyper({0.2}, 1.0, 1e-8, 0.0));
  for (const auto &r : data) CHECK(std::abs(m.posterior(r.u, 0).mean - r.y) <= 1e-3);
}

TEST_CASE("posterior rejects queries before the data") {
  const GpModel m = GpModel::fit(snapshot_data(), GpHyperparams::defaults(1));
  CHECK_THROWS_AS(m.posterior(Eigen::VectorXd::Constant(1, 0.5), 1), TimeOrder);
}

TEST_CASE("windowing keeps the most recent records") {
  std::vector<GpRecord> data;
  for (int t = 0; t < 20; ++t) data.push_back(rec({0.05 * t}, t, t));
  const auto kept = apply_window(data, 8);
  REQUIRE(kept.size() == 8);
  for (const auto &r : kept) CHECK(r.time >= 12);
  CHECK(apply_window(data, 0).size() == 20);
  CHECK(GpModel::fit(data, GpHyperparams::defaults(1), 8).size() == 8);

  // records sharing the cutoff round are all kept
  std::vector<GpRecord> tied;
  for (int t = 0; t < 5; ++t)
    for (int b = 0; b < 4; ++b) tied.push_back(rec({0.1 * b}, t, b));
  const auto kept_tied = apply_window(tied, 6);
  CHECK(kept_tied.size() == 8);
  for (const auto &r : kept_tied) CHECK(r.time >= 3);
}

TEST_CASE("log marginal likelihood") {
  const auto hp = hyper({0.3}, 1.0, 0.01, 0.1);
  auto data = snapshot_data();
  CHECK(log_marginal_likelihood(data, hp) == doctest::Approx(-6.6034632574549006).epsilon(1e-10));
  data.push_back(data.back());
  CHECK(log_marginal_likelihood(data, hp) == doctest::Approx(-4.5493036144085153).epsilon(1e-10));

  const std::vector<GpRecord> two{rec({0.2, 0.7}, 0, 0.3), rec({0.5, 0.1}, 1, -1.2),
                                  rec({0.9, 0.9}, 3, 2.5)};
  CHECK(log_marginal_likelihood(two, hyper({0.4, 0.25}, 1.7, 0.05, 0.3)) ==
        doctest::Approx(-4.4593896823083519).epsilon(1e-10));

  Rng rng(29);
  std::uniform_real_distribution<double> unif(0, 1);
  std::uniform_int_distribution<int> size(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = make_data(rng, static_cast<std::size_t>(size(rng)), 2, 6);
    const auto h = hyper({0.02 + 2 * unif(rng), 0.02 + 2 * unif(rng)}, 0.05 + 5 * unif(rng),
                         1e-3 + unif(rng), 0.9 * unif(rng));
    const double lml = log_marginal_likelihood(d, h);
    CHECK(std::isfinite(lml));
    CHECK(std::abs(lml - oracle::log_marginal_likelihood(d, h)) <= 1e-6);
  }
}

TEST_CASE("hyperparameter search") {
  Rng data_rng(31);
  const auto data = make_data(data_rng, 24, 1, 6);
  const HyperparamBounds bounds;
  HyperparamSearch search;
  search.starts = 3;
  search.iterations = 60;

  Rng a(9), b(9);
  const HyperparamFit fa = optimize_hyperparams(data, bounds, a, search);
  const HyperparamFit fb = optimize_hyperparams(data, bounds, b, search);
  CHECK(fa.hp.omega == fb.hp.omega);
  CHECK(fa.hp.lengthscales == fb.hp.lengthscales);
  CHECK_FALSE(fa.fell_back);

  const double base = log_marginal_likelihood(data, GpHyperparams::defaults(1));
  CHECK(log_marginal_likelihood(data, fa.hp) >= base - 1e-12);
  CHECK(fa.lml == doctest::Approx(log_marginal_likelihood(data, fa.hp)).epsilon(1e-9));
  CHECK(fa.hp.omega >= bounds.omega.low);
  CHECK(fa.hp.omega <= bounds.omega.high);
  CHECK(fa.hp.noise_var >= bounds.noise_var.low);
  CHECK(fa.hp.lengthscales[0] <= bounds.lengthscale.high);

  CHECK_THROWS_AS(optimize_hyperparams(std::vector<GpRecord>(1, data[0]), bounds, a, search),
                  std::invalid_argument);
}
