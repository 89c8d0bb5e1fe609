#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pb2/rng.hpp"

namespace pb2 {

/// A raw hyperparameter configuration, keyed by dimension name.
using Config = std::map<std::string, double>;

enum class Scale { kLinear, kLog10 };

struct Dimension {
  std::string name;
  double low = 0.0;
  double high = 1.0;
  Scale scale = Scale::kLinear;
};

/// Ordered set of continuous dimensions. The GP never sees raw values: every
/// config is mapped into the unit cube [0,1]^d first.
class SearchSpace {
 public:
  /// Throws std::invalid_argument on empty dims, duplicate names, low >= high
  /// or a log10 dimension with low <= 0.
  explicit SearchSpace(std::vector<Dimension> dims);

  std::size_t size() const noexcept { return dims_.size(); }
  const std::vector<Dimension> &dims() const noexcept { return dims_; }

  Eigen::VectorXd normalize(const Config &x) const;
  Config denormalize(const Eigen::VectorXd &u) const;
  Config sample_uniform(Rng &rng) const;

  /// Clamp each component into [low, high]; missing keys are an error.
  Config clamp(const Config &x) const;

  nlohmann::json to_json() const;
  static SearchSpace from_json(const nlohmann::json &j);

  bool operator==(const SearchSpace &other) const;

 private:
  std::vector<Dimension> dims_;
};

}  // namespace pb2
