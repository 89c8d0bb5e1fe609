#include "pb2/benchfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "pb2/errors.hpp"
#include "pb2/rng.hpp"

namespace pb2 {

namespace {

constexpr std::size_t kMaxCachedFeatureEntries = std::size_t{1} << 22;
constexpr std::size_t kChunk = 4096;

std::size_t default_resolution(std::size_t d) { return d == 1 ? 2048 : 256; }

}  // namespace

BenchmarkFunction::BenchmarkFunction(Eigen::MatrixXd frequencies, Eigen::VectorXd phases,
                                     Eigen::VectorXd initial_weights, double omega,
                                     double signal_var, double lengthscale, std::uint64_t seed)
    : frequencies_(std::move(frequencies)),
      phases_(std::move(phases)),
      omega_(omega),
      signal_var_(signal_var),
      lengthscale_(lengthscale),
      seed_(seed) {
  const auto m = frequencies_.rows();
  if (m < 1 || frequencies_.cols() < 1) throw std::invalid_argument("benchmark needs m >= 1, d >= 1");
  if (phases_.size() != m || initial_weights.size() != m)
    throw DimMismatch("benchmark phases and weights must have one entry per feature");
  if (!(omega_ >= 0.0 && omega_ <= 1.0)) throw std::invalid_argument("omega must lie in [0, 1]");
  scale_ = std::sqrt(2.0 * signal_var_ / static_cast<double>(m));
  history_.push_back(std::move(initial_weights));
}

std::shared_ptr<BenchmarkFunction> BenchmarkFunction::sample(std::size_t d, std::size_t m,
                                                             double lengthscale, double signal_var,
                                                             double omega, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("benchmark dimension must be at least 1");
  if (m < 64) throw std::invalid_argument("benchmark needs at least 64 features");
  if (!(lengthscale > 0.0) || !(signal_var > 0.0))
    throw std::invalid_argument("benchmark lengthscale and signal_var must be positive");
  Rng rng = derive_rng(seed, {stream::kBenchmark, 1});
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd freq(rows, cols);
  for (Eigen::Index k = 0; k < rows; ++k)
    for (Eigen::Index i = 0; i < cols; ++i) freq(k, i) = gauss(rng) / lengthscale;
  Eigen::VectorXd phases(rows);
  for (Eigen::Index k = 0; k < rows; ++k) phases[k] = angle(rng);
  Eigen::VectorXd w(rows);
  for (Eigen::Index k = 0; k < rows; ++k) w[k] = gauss(rng);
  return std::make_shared<BenchmarkFunction>(std::move(freq), std::move(phases), std::move(w),
                                             omega, signal_var, lengthscale, seed);
}

const Eigen::VectorXd &BenchmarkFunction::weights_locked(std::int64_t t) const {
  if (t < 1) throw std::invalid_argument("benchmark rounds start at 1");
  const double keep = std::sqrt(1.0 - omega_);
  const double fresh = std::sqrt(omega_);
  while (static_cast<std::int64_t>(history_.size()) < t) {
    const auto next = static_cast<std::uint64_t>(history_.size() + 1);
    Rng rng = derive_rng(seed_, {stream::kBenchmark, 2, next});
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd w = keep * history_.back();
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] += fresh * gauss(rng);
    history_.push_back(std::move(w));
  }
  return history_[static_cast<std::size_t>(t - 1)];
}

Eigen::VectorXd BenchmarkFunction::weights(std::int64_t t) const {
  std::lock_guard lock(mutex_);
  return weights_locked(t);
}

double BenchmarkFunction::eval(const Eigen::VectorXd &u, std::int64_t t) const {
  if (u.size() != frequencies_.cols())
    throw DimMismatch("benchmark point has " + std::to_string(u.size()) + " components, expected " +
                      std::to_string(frequencies_.cols()));
  std::lock_guard lock(mutex_);
  const Eigen::VectorXd &w = weights_locked(t);
  const Eigen::ArrayXd features = (frequencies_ * u + phases_).array().cos();
  return scale_ * (features * w.array()).sum();
}

const Eigen::MatrixXd &BenchmarkFunction::grid_locked(std::size_t resolution) const {
  auto it = grid_.find(resolution);
  if (it != grid_.end()) return it->second;
  const auto d = frequencies_.cols();
  const auto res = static_cast<Eigen::Index>(resolution);
  Eigen::Index points = 1;
  for (Eigen::Index i = 0; i < d; ++i) points *= res;
  Eigen::MatrixXd grid(points, d);
  for (Eigen::Index p = 0; p < points; ++p) {
    Eigen::Index rest = p;
    // the last axis varies fastest
    for (Eigen::Index i = d - 1; i >= 0; --i) {
      grid(p, i) = static_cast<double>(rest % res) / static_cast<double>(res - 1);
      rest /= res;
    }
  }
  return grid_.emplace(resolution, std::move(grid)).first->second;
}

Optimum BenchmarkFunction::true_argmax(std::int64_t t, std::size_t resolution) const {
  const auto d = static_cast<std::size_t>(frequencies_.cols());
  if (d > 2) throw Unsupported("grid argmax supports d <= 2, got d = " + std::to_string(d));
  if (resolution == 0) resolution = default_resolution(d);
  if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");

  Eigen::VectorXd best_x;
  {
    std::lock_guard lock(mutex_);
    if (auto it = optimum_.find({t, resolution}); it != optimum_.end()) return it->second;
    const Eigen::MatrixXd &grid = grid_locked(resolution);
    const Eigen::VectorXd &w = weights_locked(t);
    const auto points = grid.rows();
    const auto m = frequencies_.rows();

    Eigen::VectorXd values(points);
    if (static_cast<std::size_t>(points) * static_cast<std::size_t>(m) <= kMaxCachedFeatureEntries) {
      auto f = features_.find(resolution);
      if (f == features_.end()) {
        Eigen::MatrixXd phi = grid * frequencies_.transpose();
        phi.rowwise() += phases_.transpose();
        f = features_.emplace(resolution, phi.array().cos().matrix()).first;
      }
      values = f->second * w;
    } else {
      for (Eigen::Index start = 0; start < points; start += static_cast<Eigen::Index>(kChunk)) {
        const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunk), points - start);
        Eigen::MatrixXd phi = grid.middleRows(start, n) * frequencies_.transpose();
        phi.rowwise() += phases_.transpose();
        values.segment(start, n) = phi.array().cos().matrix() * w;
      }
    }
    Eigen::Index arg = 0;
    for (Eigen::Index p = 1; p < points; ++p)
      if (values[p] > values[arg]) arg = p;
    best_x = grid.row(arg).transpose();
  }
  // Re-evaluate through eval() so an agent placed exactly at x* has zero regret.
  Optimum opt{best_x, eval(best_x, t)};
  std::lock_guard lock(mutex_);
  optimum_.emplace(std::make_pair(t, resolution), opt);
  return opt;
}

RegretSeries cumulative_regret(std::span<const TrialRecord> log, const BenchmarkFunction &fn,
                               std::size_t resolution) {
  std::map<std::int64_t, std::vector<const TrialRecord *>> by_round;
  for (const auto &r : log)
    if (r.event == Event::kStep) by_round[r.round].push_back(&r);

  RegretSeries out;
  double total = 0.0;
  for (const auto &[round, steps] : by_round) {
    Optimum opt = fn.true_argmax(round, resolution);
    std::vector<double> values;
    values.reserve(steps.size());
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_agent = 0;
    for (std::size_t b = 0; b < steps.size(); ++b) {
      values.push_back(fn.eval(steps[b]->u, round));
      if (values.back() > best) {
        best = values.back();
        best_agent = b;
      }
    }
    if (best > opt.value) opt = {steps[best_agent]->u, best};
    std::vector<double> per_agent;
    per_agent.reserve(values.size());
    for (double v : values) per_agent.push_back(opt.value - v);
    const double r = opt.value - best;
    total += r;
    out.rounds.push_back(round);
    out.instantaneous.push_back(r);
    out.cumulative.push_back(total);
    out.optimum_x.push_back(opt.x);
    out.optimum_value.push_back(opt.value);
    out.best_value.push_back(best);
    out.per_agent.push_back(std::move(per_agent));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct QuadraticState final : TrainerState {
  Eigen::VectorXd theta;
  double score = 0.0;
  std::unique_ptr<TrainerState> clone() const override {
    return std::make_unique<QuadraticState>(*this);
  }
};

struct TvBenchState final : TrainerState {
  std::int64_t round = 0;
  double score = 0.0;
  std::unique_ptr<TrainerState> clone() const override {
    return std::make_unique<TvBenchState>(*this);
  }
};

template <typename S>
S &as(TrainerState &state) {
  auto *s = dynamic_cast<S *>(&state);
  if (s == nullptr) throw std::invalid_argument("trainer state of the wrong type");
  return *s;
}

template <typename S>
const S &as(const TrainerState &state) {
  const auto *s = dynamic_cast<const S *>(&state);
  if (s == nullptr) throw std::invalid_argument("trainer state of the wrong type");
  return *s;
}

}  // namespace

QuadraticTrainer::QuadraticTrainer(std::string param) : param_(std::move(param)), curvature_(10) {
  for (Eigen::Index i = 0; i < curvature_.size(); ++i)
    curvature_[i] = std::pow(50.0, static_cast<double>(i) / 9.0);
}

std::unique_ptr<TrainerState> QuadraticTrainer::init(std::uint64_t seed, const Config &) const {
  auto state = std::make_unique<QuadraticState>();
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  state->theta.resize(curvature_.size());
  for (Eigen::Index i = 0; i < curvature_.size(); ++i) state->theta[i] = gauss(rng);
  state->score = -(state->theta.array().square() * curvature_.array()).sum();
  return state;
}

double QuadraticTrainer::step(TrainerState &state, const Config &config) const {
  auto &s = as<QuadraticState>(state);
  auto it = config.find(param_);
  if (it == config.end()) throw MissingDimension("quadratic trainer needs config key '" + param_ + "'");
  s.theta -= it->second * curvature_.cwiseProduct(s.theta);
  s.score = -(s.theta.array().square() * curvature_.array()).sum();
  return s.score;
}

double QuadraticTrainer::score(const TrainerState &state) const {
  return as<QuadraticState>(state).score;
}

const Eigen::VectorXd &QuadraticTrainer::theta(const TrainerState &state) {
  return as<QuadraticState>(state).theta;
}

TvBenchTrainer::TvBenchTrainer(std::shared_ptr<const BenchmarkFunction> fn, SearchSpace space,
                               double observation_noise)
    : fn_(std::move(fn)), space_(std::move(space)), noise_(observation_noise) {
  if (space_.size() != fn_->dim())
    throw DimMismatch("search space has " + std::to_string(space_.size()) +
                      " dimensions, benchmark has " + std::to_string(fn_->dim()));
}

std::unique_ptr<TrainerState> TvBenchTrainer::init(std::uint64_t, const Config &) const {
  return std::make_unique<TvBenchState>();
}

double TvBenchTrainer::step(TrainerState &state, const Config &config) const {
  auto &s = as<TvBenchState>(state);
  ++s.round;
  s.score += fn_->eval(space_.normalize(config), s.round);
  return s.score;
}

double TvBenchTrainer::score(const TrainerState &state) const {
  return as<TvBenchState>(state).score;
}

std::unique_ptr<Trainer> toy_trainer(ToyKind kind) {
  switch (kind) {
    case ToyKind::kQuadratic:
      return std::make_unique<QuadraticTrainer>();
  }
  throw std::invalid_argument("unknown toy trainer");
}

}  // namespace pb2
