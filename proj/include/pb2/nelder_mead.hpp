#pragma once

#include <cstddef>
#include <functional>

#include <Eigen/Dense>

namespace pb2 {

struct NelderMeadOptions {
  std::size_t max_iterations = 200;
  /// Stop once the spread of objective values across the simplex falls below this.
  double f_tolerance = 1e-10;
  /// Initial simplex edge as a fraction of each box side.
  double initial_step = 0.1;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t iterations = 0;
};

/// Minimizes `f` inside the box [lower, upper]; trial points are clamped onto
/// the box. Non-finite objective values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd &)> &f,
                             Eigen::VectorXd start, const Eigen::VectorXd &lower,
                             const Eigen::VectorXd &upper, const NelderMeadOptions &options = {});

}  // namespace pb2
