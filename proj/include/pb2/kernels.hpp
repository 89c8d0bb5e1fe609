#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pb2 {

/// Composite-kernel hyperparameters. Lengthscales are per unit-cube axis.
struct GpHyperparams {
  Eigen::VectorXd lengthscales;
  double signal_var = 1.0;
  double noise_var = 0.01;
  /// Forgetting rate: 0 means a static objective, 1 an independent one per round.
  double omega = 0.1;

  /// The unoptimized starting point used for d dimensions.
  static GpHyperparams defaults(std::size_t d);

  /// Throws std::invalid_argument unless lengthscales, signal_var and
  /// noise_var are positive and omega lies in [0, 1].
  void validate() const;
};

/// A GP input: a point of the unit cube observed at an integer round.
struct TimedPoint {
  Eigen::VectorXd u;
  std::int64_t time = 0;
};

namespace kernels {

/// signal_var * exp(-0.5 * sum(((u_i - v_i) / l_i)^2)).
double se(const Eigen::VectorXd &u, const Eigen::VectorXd &v, const GpHyperparams &hp);

/// (1 - omega)^(|i - j| / 2).
double time(std::int64_t i, std::int64_t j, double omega);

/// Hadamard product of the SE Gram and the time Gram over `inputs`.
Eigen::MatrixXd composite_gram(std::span<const TimedPoint> inputs, const GpHyperparams &hp);

/// Cross-covariance between `query` and every input. The query must not
/// precede any input in time (TimeOrder otherwise).
Eigen::VectorXd composite_cross(const TimedPoint &query, std::span<const TimedPoint> inputs,
                                const GpHyperparams &hp);

}  // namespace kernels
}  // namespace pb2
