#include "pb2/searchspace.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pb2/errors.hpp"

namespace pb2 {

namespace {

std::string bounds_text(const Dimension &d) {
  return "[" + std::to_string(d.low) + ", " + std::to_string(d.high) + "]";
}

}  // namespace

SearchSpace::SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("search space needs at least one dimension");
  std::set<std::string> names;
  for (const auto &d : dims_) {
    if (!names.insert(d.name).second)
      throw std::invalid_argument("duplicate dimension name '" + d.name + "'");
    if (!(d.low < d.high))
      throw std::invalid_argument("dimension '" + d.name + "' needs low < high");
    if (d.scale == Scale::kLog10 && !(d.low > 0.0))
      throw std::invalid_argument("log10 dimension '" + d.name + "' needs low > 0");
  }
}

Eigen::VectorXd SearchSpace::normalize(const Config &x) const {
  Eigen::VectorXd u(static_cast<Eigen::Index>(dims_.size()));
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto &d = dims_[i];
    auto it = x.find(d.name);
    if (it == x.end()) throw MissingDimension("config is missing dimension '" + d.name + "'");
    const double v = it->second;
    if (!(v >= d.low && v <= d.high))
      throw OutOfBounds("value " + std::to_string(v) + " for '" + d.name + "' outside " +
                        bounds_text(d));
    double ui = 0.0;
    if (d.scale == Scale::kLinear) {
      ui = (v - d.low) / (d.high - d.low);
    } else {
      const double lo = std::log10(d.low);
      ui = (std::log10(v) - lo) / (std::log10(d.high) - lo);
    }
    u[static_cast<Eigen::Index>(i)] = std::clamp(ui, 0.0, 1.0);
  }
  return u;
}

Config SearchSpace::denormalize(const Eigen::VectorXd &u) const {
  if (static_cast<std::size_t>(u.size()) != dims_.size())
    throw DimMismatch("unit vector has " + std::to_string(u.size()) + " components, space has " +
                      std::to_string(dims_.size()));
  Config x;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto &d = dims_[i];
    const double ui = u[static_cast<Eigen::Index>(i)];
    if (!(ui >= 0.0 && ui <= 1.0))
      throw OutOfBounds("unit component " + std::to_string(ui) + " for '" + d.name +
                        "' outside [0, 1]");
    double v = 0.0;
    if (d.scale == Scale::kLinear) {
      v = d.low + ui * (d.high - d.low);
    } else {
      const double lo = std::log10(d.low);
      v = std::pow(10.0, lo + ui * (std::log10(d.high) - lo));
    }
    x[d.name] = std::clamp(v, d.low, d.high);
  }
  return x;
}

Config SearchSpace::sample_uniform(Rng &rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd u(static_cast<Eigen::Index>(dims_.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = unif(rng);
  return denormalize(u);
}

Config SearchSpace::clamp(const Config &x) const {
  Config out;
  for (const auto &d : dims_) {
    auto it = x.find(d.name);
    if (it == x.end()) throw MissingDimension("config is missing dimension '" + d.name + "'");
    out[d.name] = std::clamp(it->second, d.low, d.high);
  }
  return out;
}

nlohmann::json SearchSpace::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto &d : dims_) {
    dims.push_back({{"name", d.name},
                    {"low", d.low},
                    {"high", d.high},
                    {"scale", d.scale == Scale::kLinear ? "linear" : "log10"}});
  }
  return {{"dims", dims}};
}

SearchSpace SearchSpace::from_json(const nlohmann::json &j) {
  if (!j.is_object() || !j.contains("dims") || !j.at("dims").is_array())
    throw std::invalid_argument("search space must be an object with a 'dims' array");
  std::vector<Dimension> dims;
  for (const auto &item : j.at("dims")) {
    Dimension d;
    d.name = item.at("name").get<std::string>();
    d.low = item.at("low").get<double>();
    d.high = item.at("high").get<double>();
    const std::string scale = item.value("scale", "linear");
    if (scale == "linear") {
      d.scale = Scale::kLinear;
    } else if (scale == "log10" || scale == "log") {
      d.scale = Scale::kLog10;
    } else {
      throw std::invalid_argument("dimension '" + d.name + "' has unknown scale '" + scale + "'");
    }
    dims.push_back(std::move(d));
  }
  return SearchSpace(std::move(dims));
}

bool SearchSpace::operator==(const SearchSpace &other) const {
  if (dims_.size() != other.dims_.size()) return false;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto &a = dims_[i];
    const auto &b = other.dims_[i];
    if (a.name != b.name || a.low != b.low || a.high != b.high || a.scale != b.scale) return false;
  }
  return true;
}

}  // namespace pb2
