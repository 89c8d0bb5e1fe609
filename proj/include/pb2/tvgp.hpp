#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pb2/kernels.hpp"
#include "pb2/rng.hpp"

namespace pb2 {

/// One GP observation: a unit-cube point, the round it was observed in, and
/// the observed score change.
struct GpRecord {
  Eigen::VectorXd u;
  std::int64_t time = 0;
  double y = 0.0;
};

inline constexpr std::size_t kDefaultWindow = 512;

/// Keeps the most recent `window` records by time index. Records sharing the
/// cut-off round are all kept, so the result can exceed `window` slightly.
std::vector<GpRecord> apply_window(std::span<const GpRecord> records, std::size_t window);

/// Lower Cholesky factor of K~ + (noise_var + jitter) I over a fixed input set.
/// Factorization is tried without jitter first; on failure jitter starts at
/// 1e-6 * signal_var and grows tenfold up to 1e-2.
class CovarianceFactor {
 public:
  CovarianceFactor(std::vector<TimedPoint> inputs, const GpHyperparams &hp);

  const std::vector<TimedPoint> &inputs() const noexcept { return inputs_; }
  const Eigen::MatrixXd &chol() const noexcept { return chol_; }
  const GpHyperparams &hyperparams() const noexcept { return hp_; }
  double jitter() const noexcept { return jitter_; }
  std::int64_t max_time() const noexcept { return max_time_; }

  /// (K~ + (noise + jitter) I)^{-1} b.
  Eigen::VectorXd solve(const Eigen::VectorXd &b) const;
  double log_det() const;

  /// signal_var - k^T (K~ + noise I)^{-1} k in kernel units, clamped at zero.
  double latent_variance(const Eigen::VectorXd &cross) const;
  double latent_variance(const TimedPoint &query) const;

 private:
  std::vector<TimedPoint> inputs_;
  GpHyperparams hp_;
  Eigen::MatrixXd chol_;
  double jitter_ = 0.0;
  std::int64_t max_time_ = 0;
};

struct Prediction {
  double mean = 0.0;
  double var = 0.0;
};

/// Time-varying GP posterior over standardized targets.
class GpModel {
 public:
  /// Windows `records`, standardizes y and factorizes the composite Gram.
  /// Throws NumericalFailure if the factorization fails at maximum jitter.
  static GpModel fit(std::span<const GpRecord> records, const GpHyperparams &hp,
                     std::size_t window = kDefaultWindow);

  /// Posterior of the objective in raw score units at (u, t_query).
  Prediction posterior(const Eigen::VectorXd &u, std::int64_t t_query) const;

  /// Same posterior in standardized units: this variance depends on the input
  /// locations only, never on y.
  Prediction latent_posterior(const Eigen::VectorXd &u, std::int64_t t_query) const;

  const CovarianceFactor &factor() const noexcept { return factor_; }
  const std::vector<TimedPoint> &inputs() const noexcept { return factor_.inputs(); }
  const GpHyperparams &hyperparams() const noexcept { return factor_.hyperparams(); }
  const Eigen::MatrixXd &chol() const noexcept { return factor_.chol(); }
  const Eigen::VectorXd &targets_std() const noexcept { return targets_std_; }
  const Eigen::VectorXd &alpha() const noexcept { return alpha_; }
  const std::vector<double> &raw_targets() const noexcept { return raw_targets_; }
  double y_mean() const noexcept { return y_mean_; }
  double y_std() const noexcept { return y_std_; }
  std::size_t size() const noexcept { return raw_targets_.size(); }

 private:
  GpModel(CovarianceFactor factor, std::vector<double> raw, double mean, double std,
          Eigen::VectorXd targets, Eigen::VectorXd alpha);

  CovarianceFactor factor_;
  std::vector<double> raw_targets_;
  double y_mean_;
  double y_std_;
  Eigen::VectorXd targets_std_;
  Eigen::VectorXd alpha_;
};

/// Log evidence of the standardized (windowed) targets.
double log_marginal_likelihood(std::span<const GpRecord> records, const GpHyperparams &hp,
                               std::size_t window = kDefaultWindow);

struct Interval {
  double low;
  double high;
};

/// Search box for marginal-likelihood fitting. Applies to every lengthscale.
struct HyperparamBounds {
  Interval lengthscale{0.02, 2.0};
  Interval signal_var{0.05, 20.0};
  Interval noise_var{1e-5, 1.0};
  Interval omega{1e-4, 0.9};
};

struct HyperparamSearch {
  std::size_t starts = 8;
  std::size_t iterations = 200;
  std::size_t window = kDefaultWindow;
};

struct HyperparamFit {
  GpHyperparams hp;
  double lml = 0.0;
  /// Set when every candidate failed numerically and the defaults were returned.
  bool fell_back = false;
};

/// Multi-start bounded Nelder-Mead on the log marginal likelihood, with
/// lengthscales and variances in log space and omega in logit space. The
/// first start is the defaults (clamped into the box); the result is never
/// worse than the defaults. Requires at least two records.
HyperparamFit optimize_hyperparams(std::span<const GpRecord> records,
                                   const HyperparamBounds &bounds, Rng &rng,
                                   const HyperparamSearch &search = {});

}  // namespace pb2
