#pragma once

#include <cstdint>
#include <memory>

#include "pb2/searchspace.hpp"

namespace pb2 {

/// Opaque per-agent training state (the "weights").
class TrainerState {
 public:
  virtual ~TrainerState() = default;
  virtual std::unique_ptr<TrainerState> clone() const = 0;
};

/// What the schedulers need from a training process. Implementations must be
/// deterministic given the seed for runs to replay and resume.
class Trainer {
 public:
  virtual ~Trainer() = default;

  virtual std::unique_ptr<TrainerState> init(std::uint64_t seed, const Config &config) const = 0;

  /// Trains one interval under `config` and returns the new absolute score.
  virtual double step(TrainerState &state, const Config &config) const = 0;

  /// Current absolute score of `state`.
  virtual double score(const TrainerState &state) const = 0;

  /// Deep copy; mutating the copy never affects the original.
  virtual std::unique_ptr<TrainerState> clone(const TrainerState &state) const {
    return state.clone();
  }

  /// Standard deviation of Gaussian noise the harness adds to observed deltas.
  virtual double observation_noise() const { return 0.0; }
};

}  // namespace pb2
