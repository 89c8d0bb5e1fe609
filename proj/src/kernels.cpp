#include "pb2/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pb2/errors.hpp"

namespace pb2 {

GpHyperparams GpHyperparams::defaults(std::size_t d) {
  GpHyperparams hp;
  hp.lengthscales = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), 0.3);
  hp.signal_var = 1.0;
  hp.noise_var = 0.01;
  hp.omega = 0.1;
  return hp;
}

void GpHyperparams::validate() const {
  if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("lengthscales must be non-empty and positive");
  if (!(signal_var > 0.0)) throw std::invalid_argument("signal_var must be positive");
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise_var must be positive");
  if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("omega must lie in [0, 1]");
}

namespace kernels {

namespace {

// log(1 - omega) / 2, so that the time factor is exp(lag * half_log_keep).
double half_log_keep(double omega) { return 0.5 * std::log1p(-omega); }

double time_factor(std::int64_t lag, double half_log) {
  if (lag == 0) return 1.0;
  return std::exp(static_cast<double>(lag) * half_log);
}

}  // namespace

double se(const Eigen::VectorXd &u, const Eigen::VectorXd &v, const GpHyperparams &hp) {
  if (u.size() != v.size() || u.size() != hp.lengthscales.size())
    throw DimMismatch("se kernel: |u|=" + std::to_string(u.size()) +
                      ", |v|=" + std::to_string(v.size()) +
                      ", |l|=" + std::to_string(hp.lengthscales.size()));
  const double r2 = ((u - v).array() / hp.lengthscales.array()).square().sum();
  return hp.signal_var * std::exp(-0.5 * r2);
}

double time(std::int64_t i, std::int64_t j, double omega) {
  const std::int64_t lag = i > j ? i - j : j - i;
  if (lag == 0) return 1.0;
  // pow(0, x) for x > 0 is exactly 0, which the exp/log1p route also yields.
  return time_factor(lag, half_log_keep(omega));
}

Eigen::MatrixXd composite_gram(std::span<const TimedPoint> inputs, const GpHyperparams &hp) {
  const auto n = static_cast<Eigen::Index>(inputs.size());
  const double half_log = half_log_keep(hp.omega);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    k(p, p) = hp.signal_var;
    for (Eigen::Index q = 0; q < p; ++q) {
      const auto &a = inputs[static_cast<std::size_t>(p)];
      const auto &b = inputs[static_cast<std::size_t>(q)];
      const std::int64_t lag = a.time > b.time ? a.time - b.time : b.time - a.time;
      const double v = se(a.u, b.u, hp) * time_factor(lag, half_log);
      k(p, q) = v;
      k(q, p) = v;
    }
  }
  return k;
}

Eigen::VectorXd composite_cross(const TimedPoint &query, std::span<const TimedPoint> inputs,
                                const GpHyperparams &hp) {
  const double half_log = half_log_keep(hp.omega);
  Eigen::VectorXd k(static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const auto &in = inputs[p];
    if (query.time < in.time)
      throw TimeOrder("query at round " + std::to_string(query.time) +
                      " precedes an input at round " + std::to_string(in.time));
    k[static_cast<Eigen::Index>(p)] =
        se(query.u, in.u, hp) * time_factor(query.time - in.time, half_log);
  }
  return k;
}

}  // namespace kernels
}  // namespace pb2
