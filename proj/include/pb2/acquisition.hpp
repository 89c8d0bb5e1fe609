#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pb2/rng.hpp"
#include "pb2/tvgp.hpp"

namespace pb2 {

/// beta_t = max(c1 + ln(c2 * t), floor).
struct BetaSchedule {
  double c1 = 0.2;
  double c2 = 0.4;
  double floor = 0.2;
};

double beta(std::int64_t t, const BetaSchedule &schedule);

/// mean + sqrt(beta) * stddev under the model's posterior at (u, t_query).
double ucb(const GpModel &model, const Eigen::VectorXd &u, std::int64_t t_query, double beta);

/// Index of the first candidate with the largest ucb value (plain GP-UCB).
std::size_t ucb_argmax(const GpModel &model, std::span<const Eigen::VectorXd> candidates,
                       std::int64_t t_query, double beta);

struct CandidateSettings {
  std::size_t uniform = 1000;
  std::size_t per_top = 10;
  std::size_t top = 5;
  double local_std = 0.05;
};

/// Uniform points in [0,1]^d followed by Gaussian perturbations (clamped to
/// the cube) around the distinct highest-y points of `history`.
std::vector<Eigen::VectorXd> generate_candidates(std::span<const GpRecord> history,
                                                 std::size_t d,
                                                 const CandidateSettings &settings, Rng &rng);

struct BatchSelection {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> scores;
  std::vector<std::size_t> candidate_indices;
};

/// Per-step diagnostics of select_batch: entry b holds the mean and stddev
/// used for every candidate when choosing the (b+1)-th point.
struct BatchTrace {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::VectorXd> stddevs;
};

/// Sequentially picks `count` candidates. The mean always comes from `model`;
/// the stddev comes from a model that additionally treats `pending` and the
/// points already picked in this batch as observed at `t_query`. A candidate
/// is not picked twice in one batch while unpicked ones remain. Ties go to
/// the lowest candidate index. Throws NoCandidates on an empty candidate set.
BatchSelection select_batch(const GpModel &model, std::span<const TimedPoint> pending,
                            std::size_t count, std::int64_t t_query, double beta,
                            std::span<const Eigen::VectorXd> candidates,
                            BatchTrace *trace = nullptr);

}  // namespace pb2
