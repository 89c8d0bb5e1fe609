#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pb2/record.hpp"
#include "pb2/searchspace.hpp"
#include "pb2/trainer.hpp"

namespace pb2 {

struct Optimum {
  Eigen::VectorXd x;
  double value = 0.0;
};

/// A time-varying objective on [0,1]^d built from m random Fourier features:
///
///   f_t(x) = sqrt(2 * signal_var / m) * sum_k w_t[k] * cos(freq_k . x + phase_k)
///   w_{t+1} = sqrt(1 - omega) * w_t + sqrt(omega) * g_{t+1},   g ~ N(0, I)
///
/// Each f_t is approximately a GP(0, SE) draw and consecutive rounds are
/// correlated by sqrt(1 - omega). Weights for later rounds are generated on
/// demand from per-round streams, so values do not depend on query order.
class BenchmarkFunction {
 public:
  BenchmarkFunction(Eigen::MatrixXd frequencies, Eigen::VectorXd phases,
                    Eigen::VectorXd initial_weights, double omega, double signal_var,
                    double lengthscale, std::uint64_t seed);

  /// frequencies ~ N(0, 1/lengthscale^2), phases ~ U[0, 2 pi), w_1 ~ N(0, I).
  static std::shared_ptr<BenchmarkFunction> sample(std::size_t d, std::size_t m,
                                                   double lengthscale, double signal_var,
                                                   double omega, std::uint64_t seed);

  /// f_t(u) for round t >= 1.
  double eval(const Eigen::VectorXd &u, std::int64_t t) const;

  /// w_t for round t >= 1.
  Eigen::VectorXd weights(std::int64_t t) const;

  /// Grid maximizer of f_t. Resolution 0 means 2048 points for d = 1 and 256
  /// per axis for d = 2; the grid includes both ends of every axis and ties
  /// go to the lowest grid index. Throws Unsupported for d > 2.
  Optimum true_argmax(std::int64_t t, std::size_t resolution = 0) const;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(frequencies_.cols()); }
  std::size_t features() const noexcept { return static_cast<std::size_t>(frequencies_.rows()); }
  double omega() const noexcept { return omega_; }
  double signal_var() const noexcept { return signal_var_; }
  double lengthscale() const noexcept { return lengthscale_; }

 private:
  const Eigen::VectorXd &weights_locked(std::int64_t t) const;
  const Eigen::MatrixXd &grid_locked(std::size_t resolution) const;

  Eigen::MatrixXd frequencies_;  // m x d
  Eigen::VectorXd phases_;
  double omega_;
  double signal_var_;
  double lengthscale_;
  std::uint64_t seed_;
  double scale_;

  mutable std::mutex mutex_;
  mutable std::deque<Eigen::VectorXd> history_;  // history_[t-1] = w_t
  mutable std::map<std::size_t, Eigen::MatrixXd> grid_;  // resolution -> points x d
  mutable std::map<std::size_t, Eigen::MatrixXd> features_;  // resolution -> cos features
  mutable std::map<std::pair<std::int64_t, std::size_t>, Optimum> optimum_;
};

struct RegretSeries {
  std::vector<std::int64_t> rounds;
  std::vector<double> instantaneous;
  std::vector<double> cumulative;
  std::vector<Eigen::VectorXd> optimum_x;
  std::vector<double> optimum_value;
  /// max over agents of f_t(x_t^b).
  std::vector<double> best_value;
  /// Per-agent regret f*_t - f_t(x_t^b), indexed [round][agent].
  std::vector<std::vector<double>> per_agent;
};

/// Batch regret of the step records of `log` on `fn`. The per-round optimum is
/// the larger of the grid maximum and the best evaluated point, so regret is
/// never negative.
RegretSeries cumulative_regret(std::span<const TrialRecord> log, const BenchmarkFunction &fn,
                               std::size_t resolution = 0);

// ---------------------------------------------------------------------------

/// theta in R^10 from N(0, 1); step: theta <- theta - lr * A theta with
/// A = diag(50^(i/9)); score -theta^T A theta. Reads the learning rate from
/// the config key `param`.
class QuadraticTrainer : public Trainer {
 public:
  explicit QuadraticTrainer(std::string param = "lr");

  std::unique_ptr<TrainerState> init(std::uint64_t seed, const Config &config) const override;
  double step(TrainerState &state, const Config &config) const override;
  double score(const TrainerState &state) const override;

  const Eigen::VectorXd &curvature() const noexcept { return curvature_; }
  static const Eigen::VectorXd &theta(const TrainerState &state);

 private:
  std::string param_;
  Eigen::VectorXd curvature_;
};

/// Accumulates f_t(u(config)) of a benchmark function: F_t = sum_{s<=t} f_s.
class TvBenchTrainer : public Trainer {
 public:
  TvBenchTrainer(std::shared_ptr<const BenchmarkFunction> fn, SearchSpace space,
                 double observation_noise = 0.0);

  std::unique_ptr<TrainerState> init(std::uint64_t seed, const Config &config) const override;
  double step(TrainerState &state, const Config &config) const override;
  double score(const TrainerState &state) const override;
  double observation_noise() const override { return noise_; }

  const BenchmarkFunction &function() const noexcept { return *fn_; }

 private:
  std::shared_ptr<const BenchmarkFunction> fn_;
  SearchSpace space_;
  double noise_;
};

enum class ToyKind { kQuadratic };

std::unique_ptr<Trainer> toy_trainer(ToyKind kind);

}  // namespace pb2
