#include "pb2/tvgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "pb2/errors.hpp"
#include "pb2/log.hpp"
#include "pb2/nelder_mead.hpp"

namespace pb2 {

std::vector<GpRecord> apply_window(std::span<const GpRecord> records, std::size_t window) {
  if (records.size() <= window || window == 0) return {records.begin(), records.end()};
  std::vector<std::int64_t> times;
  times.reserve(records.size());
  for (const auto &r : records) times.push_back(r.time);
  std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(window - 1),
                   times.end(), std::greater<>());
  const std::int64_t cutoff = times[window - 1];
  std::vector<GpRecord> kept;
  kept.reserve(window);
  for (const auto &r : records)
    if (r.time >= cutoff) kept.push_back(r);
  return kept;
}

// ---------------------------------------------------------------------------

namespace {

// Cholesky of `k` (noise already on the diagonal). Tries without jitter first,
// then adds 1e-6 * signal_var, growing tenfold up to 1e-2 * signal_var.
bool factorize(const Eigen::MatrixXd &k, double signal_var, Eigen::MatrixXd &chol,
               double &jitter_used) {
  const auto n = k.rows();
  const double first = 1e-6 * signal_var;
  const double last = 1e-2 * signal_var;
  double jitter = 0.0;
  Eigen::MatrixXd work;
  while (true) {
    work = k;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(work);
    if (llt.info() == Eigen::Success) {
      chol = work.triangularView<Eigen::Lower>();
      jitter_used = jitter;
      return true;
    }
    if (jitter >= last) return false;
    jitter = jitter == 0.0 ? first : std::min(jitter * 10.0, last);
    logger().debug("cholesky failed on {} inputs, retrying with jitter {}", n, jitter);
  }
}

}  // namespace

CovarianceFactor::CovarianceFactor(std::vector<TimedPoint> inputs, const GpHyperparams &hp)
    : inputs_(std::move(inputs)), hp_(hp) {
  if (inputs_.empty()) throw std::invalid_argument("covariance factor needs at least one input");
  hp_.validate();
  for (const auto &p : inputs_) {
    if (p.u.size() != hp_.lengthscales.size())
      throw DimMismatch("input has " + std::to_string(p.u.size()) + " components, expected " +
                        std::to_string(hp_.lengthscales.size()));
    max_time_ = std::max(max_time_, p.time);
  }

  Eigen::MatrixXd k = kernels::composite_gram(inputs_, hp_);
  k.diagonal().array() += hp_.noise_var;
  if (!factorize(k, hp_.signal_var, chol_, jitter_))
    throw NumericalFailure("Cholesky factorization failed at jitter " +
                           std::to_string(1e-2 * hp_.signal_var) + " over " +
                           std::to_string(k.rows()) + " inputs");
}

Eigen::VectorXd CovarianceFactor::solve(const Eigen::VectorXd &b) const {
  const auto l = chol_.triangularView<Eigen::Lower>();
  return l.transpose().solve(l.solve(b));
}

double CovarianceFactor::log_det() const {
  return 2.0 * chol_.diagonal().array().log().sum();
}

double CovarianceFactor::latent_variance(const Eigen::VectorXd &cross) const {
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(cross);
  return std::max(0.0, hp_.signal_var - v.squaredNorm());
}

double CovarianceFactor::latent_variance(const TimedPoint &query) const {
  return latent_variance(kernels::composite_cross(query, inputs_, hp_));
}

// ---------------------------------------------------------------------------

GpModel::GpModel(CovarianceFactor factor, std::vector<double> raw, double mean, double std,
                 Eigen::VectorXd targets, Eigen::VectorXd alpha)
    : factor_(std::move(factor)),
      raw_targets_(std::move(raw)),
      y_mean_(mean),
      y_std_(std),
      targets_std_(std::move(targets)),
      alpha_(std::move(alpha)) {}

GpModel GpModel::fit(std::span<const GpRecord> records, const GpHyperparams &hp,
                     std::size_t window) {
  if (records.empty()) throw std::invalid_argument("GP fit needs at least one record");
  const auto kept = apply_window(records, window);
  const auto n = static_cast<Eigen::Index>(kept.size());

  std::vector<TimedPoint> inputs;
  std::vector<double> raw;
  inputs.reserve(kept.size());
  raw.reserve(kept.size());
  for (const auto &r : kept) {
    inputs.push_back({r.u, r.time});
    raw.push_back(r.y);
  }

  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double y : raw) ss += (y - mean) * (y - mean);
  double sd = std::sqrt(ss / static_cast<double>(n));
  if (n == 1 || !(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;

  Eigen::VectorXd targets(n);
  for (Eigen::Index i = 0; i < n; ++i) targets[i] = (raw[static_cast<std::size_t>(i)] - mean) / sd;

  CovarianceFactor factor(std::move(inputs), hp);
  Eigen::VectorXd alpha = factor.solve(targets);
  return GpModel(std::move(factor), std::move(raw), mean, sd, std::move(targets),
                 std::move(alpha));
}

Prediction GpModel::latent_posterior(const Eigen::VectorXd &u, std::int64_t t_query) const {
  const Eigen::VectorXd cross =
      kernels::composite_cross({u, t_query}, factor_.inputs(), factor_.hyperparams());
  return {cross.dot(alpha_), factor_.latent_variance(cross)};
}

Prediction GpModel::posterior(const Eigen::VectorXd &u, std::int64_t t_query) const {
  const Prediction latent = latent_posterior(u, t_query);
  return {y_mean_ + y_std_ * latent.mean, y_std_ * y_std_ * latent.var};
}

double log_marginal_likelihood(std::span<const GpRecord> records, const GpHyperparams &hp,
                               std::size_t window) {
  const GpModel model = GpModel::fit(records, hp, window);
  const auto n = static_cast<double>(model.size());
  return -0.5 * model.targets_std().dot(model.alpha()) - 0.5 * model.factor().log_det() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Parameter layout: [log l_1 .. log l_d, log signal_var, log noise_var, logit omega].
Eigen::VectorXd encode(const GpHyperparams &hp) {
  const auto d = hp.lengthscales.size();
  Eigen::VectorXd theta(d + 3);
  theta.head(d) = hp.lengthscales.array().log();
  theta[d] = std::log(hp.signal_var);
  theta[d + 1] = std::log(hp.noise_var);
  theta[d + 2] = logit(hp.omega);
  return theta;
}

GpHyperparams decode(const Eigen::VectorXd &theta) {
  const auto d = theta.size() - 3;
  GpHyperparams hp;
  hp.lengthscales = theta.head(d).array().exp();
  hp.signal_var = std::exp(theta[d]);
  hp.noise_var = std::exp(theta[d + 1]);
  hp.omega = sigmoid(theta[d + 2]);
  return hp;
}

// Marginal likelihood over a fixed dataset. Pairwise squared distances and
// time lags are computed once so each evaluation is a few array ops plus a
// Cholesky. Agrees with log_marginal_likelihood up to rounding.
class LmlEvaluator {
 public:
  explicit LmlEvaluator(std::span<const GpRecord> records) {
    const auto n = static_cast<Eigen::Index>(records.size());
    const auto d = records.front().u.size();
    sq_.assign(static_cast<std::size_t>(d), Eigen::ArrayXXd(n, n));
    lag_.resize(n, n);
    targets_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto &a = records[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto &b = records[static_cast<std::size_t>(j)];
        for (Eigen::Index k = 0; k < d; ++k) {
          const double diff = a.u[k] - b.u[k];
          sq_[static_cast<std::size_t>(k)](i, j) = diff * diff;
        }
        lag_(i, j) = static_cast<Eigen::Index>(a.time > b.time ? a.time - b.time : b.time - a.time);
      }
      targets_[i] = a.y;
    }
    const double mean = targets_.mean();
    double sd = std::sqrt((targets_.array() - mean).square().sum() / static_cast<double>(n));
    if (n == 1 || !(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;
    targets_ = (targets_.array() - mean) / sd;
    decay_.resize(lag_.maxCoeff() + 1);
  }

  double operator()(const GpHyperparams &hp) const {
    const auto n = lag_.rows();
    r2_.setZero(n, n);
    for (std::size_t k = 0; k < sq_.size(); ++k) {
      const double l = hp.lengthscales[static_cast<Eigen::Index>(k)];
      r2_ += sq_[k] * (1.0 / (l * l));
    }
    const double half_log = 0.5 * std::log1p(-hp.omega);
    for (Eigen::Index i = 0; i < decay_.size(); ++i)
      decay_[i] = i == 0 ? 1.0 : std::exp(static_cast<double>(i) * half_log);
    gram_.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = j; i < n; ++i)
        gram_(i, j) = hp.signal_var * std::exp(-0.5 * r2_(i, j)) * decay_[lag_(i, j)];
    gram_.diagonal().array() = hp.signal_var + hp.noise_var;

    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(gram_);
    if (llt.info() != Eigen::Success) {
      // rebuild the full matrix and go through the jitter ladder
      gram_.triangularView<Eigen::StrictlyUpper>().setZero();
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j + 1; i < n; ++i)
          gram_(i, j) = hp.signal_var * std::exp(-0.5 * r2_(i, j)) * decay_[lag_(i, j)];
      gram_.diagonal().array() = hp.signal_var + hp.noise_var;
      const Eigen::MatrixXd full = gram_.selfadjointView<Eigen::Lower>();
      double jitter = 0.0;
      if (!factorize(full, hp.signal_var, gram_, jitter))
        return -std::numeric_limits<double>::infinity();
    }
    const auto l = gram_.triangularView<Eigen::Lower>();
    v_ = l.solve(targets_);
    return -0.5 * v_.squaredNorm() - gram_.diagonal().array().log().sum() -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  }

 private:
  std::vector<Eigen::ArrayXXd> sq_;
  Eigen::Array<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> lag_;
  Eigen::VectorXd targets_;
  mutable Eigen::VectorXd decay_;
  mutable Eigen::ArrayXXd r2_;
  mutable Eigen::MatrixXd gram_;
  mutable Eigen::VectorXd v_;
};

}  // namespace

HyperparamFit optimize_hyperparams(std::span<const GpRecord> records,
                                   const HyperparamBounds &bounds, Rng &rng,
                                   const HyperparamSearch &search) {
  if (records.size() < 2)
    throw std::invalid_argument("hyperparameter optimization needs at least two records");
  const auto d = records.front().u.size();
  const auto windowed = apply_window(records, search.window);

  Eigen::VectorXd lower(d + 3);
  Eigen::VectorXd upper(d + 3);
  lower.head(d).setConstant(std::log(bounds.lengthscale.low));
  upper.head(d).setConstant(std::log(bounds.lengthscale.high));
  lower[d] = std::log(bounds.signal_var.low);
  upper[d] = std::log(bounds.signal_var.high);
  lower[d + 1] = std::log(bounds.noise_var.low);
  upper[d + 1] = std::log(bounds.noise_var.high);
  lower[d + 2] = logit(bounds.omega.low);
  upper[d + 2] = logit(bounds.omega.high);

  const LmlEvaluator evaluator(windowed);
  const auto lml_at = [&](const Eigen::VectorXd &theta) { return evaluator(decode(theta)); };

  const GpHyperparams defaults = GpHyperparams::defaults(static_cast<std::size_t>(d));
  const Eigen::VectorXd default_theta = encode(defaults).cwiseMax(lower).cwiseMin(upper);

  HyperparamFit best{decode(default_theta), lml_at(default_theta), false};
  bool any_finite = std::isfinite(best.lml);

  NelderMeadOptions options;
  options.max_iterations = search.iterations;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t s = 0; s < search.starts; ++s) {
    Eigen::VectorXd start = default_theta;
    if (s > 0) {
      for (Eigen::Index i = 0; i < start.size(); ++i)
        start[i] = lower[i] + unif(rng) * (upper[i] - lower[i]);
    }
    const auto result = nelder_mead([&](const Eigen::VectorXd &theta) { return -lml_at(theta); },
                                    start, lower, upper, options);
    const double lml = -result.value;
    if (!std::isfinite(lml)) continue;
    any_finite = true;
    if (lml > best.lml) best = {decode(result.x), lml, false};
  }

  if (!any_finite) {
    logger().warn("marginal likelihood failed at every start; keeping default hyperparameters");
    best = {defaults, -std::numeric_limits<double>::infinity(), true};
  }
  return best;
}

}  // namespace pb2
