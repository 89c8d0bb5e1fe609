#include "pb2/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "pb2/errors.hpp"

namespace pb2 {

double beta(std::int64_t t, const BetaSchedule &schedule) {
  if (t < 1) throw std::invalid_argument("beta schedule is defined for t >= 1");
  const double raw = schedule.c1 + std::log(schedule.c2 * static_cast<double>(t));
  return std::max(raw, schedule.floor);
}

double ucb(const GpModel &model, const Eigen::VectorXd &u, std::int64_t t_query, double beta) {
  if (beta < 0.0) throw std::invalid_argument("ucb needs beta >= 0");
  const Prediction p = model.posterior(u, t_query);
  return p.mean + std::sqrt(beta) * std::sqrt(p.var);
}

std::size_t ucb_argmax(const GpModel &model, std::span<const Eigen::VectorXd> candidates,
                       std::int64_t t_query, double beta) {
  if (candidates.empty()) throw NoCandidates("no candidates to score");
  std::size_t best = 0;
  double best_score = ucb(model, candidates[0], t_query, beta);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = ucb(model, candidates[i], t_query, beta);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

std::vector<Eigen::VectorXd> generate_candidates(std::span<const GpRecord> history,
                                                 std::size_t d,
                                                 const CandidateSettings &settings, Rng &rng) {
  const auto dim = static_cast<Eigen::Index>(d);
  std::vector<Eigen::VectorXd> out;
  out.reserve(settings.uniform + settings.top * settings.per_top);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < settings.uniform; ++i) {
    Eigen::VectorXd u(dim);
    for (Eigen::Index k = 0; k < dim; ++k) u[k] = unif(rng);
    out.push_back(std::move(u));
  }

  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].y > history[b].y; });
  std::vector<Eigen::VectorXd> tops;
  for (std::size_t idx : order) {
    if (tops.size() >= settings.top) break;
    const auto &u = history[idx].u;
    const bool seen = std::any_of(tops.begin(), tops.end(),
                                  [&](const Eigen::VectorXd &t) { return t == u; });
    if (!seen) tops.push_back(u);
  }

  std::normal_distribution<double> gauss(0.0, settings.local_std);
  for (const auto &centre : tops) {
    for (std::size_t i = 0; i < settings.per_top; ++i) {
      Eigen::VectorXd u = centre;
      for (Eigen::Index k = 0; k < dim; ++k) u[k] = std::clamp(u[k] + gauss(rng), 0.0, 1.0);
      out.push_back(std::move(u));
    }
  }
  return out;
}

BatchSelection select_batch(const GpModel &model, std::span<const TimedPoint> pending,
                            std::size_t count, std::int64_t t_query, double beta,
                            std::span<const Eigen::VectorXd> candidates, BatchTrace *trace) {
  if (count < 1) throw std::invalid_argument("batch size must be at least 1");
  if (beta < 0.0) throw std::invalid_argument("select_batch needs beta >= 0");
  if (candidates.empty()) throw NoCandidates("no candidates to score");

  const auto m = static_cast<Eigen::Index>(candidates.size());
  const double root_beta = std::sqrt(beta);

  // The mean term is computed once and reused for every pick in the batch.
  Eigen::VectorXd mean(m);
  Eigen::VectorXd base_sd(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const Prediction p = model.posterior(candidates[static_cast<std::size_t>(c)], t_query);
    mean[c] = p.mean;
    base_sd[c] = std::sqrt(p.var);
  }

  std::vector<TimedPoint> hallucinated(pending.begin(), pending.end());
  BatchSelection out;
  Eigen::VectorXd sd(m);
  std::vector<bool> taken(candidates.size(), false);
  for (std::size_t b = 0; b < count; ++b) {
    if (hallucinated.empty()) {
      sd = base_sd;
    } else {
      std::vector<TimedPoint> inputs = model.inputs();
      inputs.insert(inputs.end(), hallucinated.begin(), hallucinated.end());
      const CovarianceFactor factor(std::move(inputs), model.hyperparams());
      for (Eigen::Index c = 0; c < m; ++c) {
        const double v =
            factor.latent_variance(TimedPoint{candidates[static_cast<std::size_t>(c)], t_query});
        sd[c] = model.y_std() * std::sqrt(v);
      }
    }

    // A candidate is picked at most once per batch unless the batch outgrows the set.
    if (std::find(taken.begin(), taken.end(), false) == taken.end())
      std::fill(taken.begin(), taken.end(), false);
    std::optional<std::size_t> best;
    double best_score = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
      if (taken[static_cast<std::size_t>(c)]) continue;
      const double s = mean[c] + root_beta * sd[c];
      if (!best || s > best_score) {
        best = static_cast<std::size_t>(c);
        best_score = s;
      }
    }
    taken[*best] = true;
    if (trace != nullptr) {
      trace->means.push_back(mean);
      trace->stddevs.push_back(sd);
    }
    out.points.push_back(candidates[*best]);
    out.scores.push_back(best_score);
    out.candidate_indices.push_back(*best);
    hallucinated.push_back({candidates[*best], t_query});
  }
  return out;
}

}  // namespace pb2
