#include "pb2/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "pb2/errors.hpp"

namespace pb2 {

namespace {

using nlohmann::json;

// Reads `key` from `obj` if present, converting type errors to ConfigError.
template <typename T>
void read(const json &obj, const std::string &key, const std::string &path, T &out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ConfigError(path + key, std::string("wrong type: ") + e.what());
  }
}

template <typename T>
void read_count(const json &obj, const std::string &key, const std::string &path, T &out) {
  if (!obj.contains(key)) return;
  const auto &v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(path + key, "must be a non-negative integer");
  out = v.get<T>();
}

Policy read_policy(const json &v, const std::string &field) {
  if (!v.is_string()) throw ConfigError(field, "must be a string");
  try {
    return policy_from_string(v.get<std::string>());
  } catch (const std::invalid_argument &e) {
    throw ConfigError(field, e.what());
  }
}

void read_interval(const json &obj, const std::string &key, const std::string &path,
                   Interval &out) {
  if (!obj.contains(key)) return;
  const auto &v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(path + key, "must be a [low, high] pair");
  out = {v[0].get<double>(), v[1].get<double>()};
  if (!(out.low > 0.0 && out.low < out.high))
    throw ConfigError(path + key, "needs 0 < low < high");
}

}  // namespace

json load_config_document(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigError("config", "'" + path + "' is not valid JSON: " + e.what());
  }
}

void apply_override(json &doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError(std::string(assignment), "override must look like key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception &) {
    value = raw;
  }
  if (!doc.is_object()) doc = json::object();
  json *node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    json &child = (*node)[path[i]];
    if (!child.is_object()) child = json::object();
    node = &child;
  }
  (*node)[path.back()] = std::move(value);
}

RunConfig parse_run_config(const json &doc) {
  if (!doc.is_object()) throw ConfigError("config", "must be a JSON object");
  RunConfig cfg;
  ScheduleSettings &s = cfg.schedule;

  if (doc.contains("policy")) s.policy = read_policy(doc.at("policy"), "policy");
  if (doc.contains("B")) {
    const auto &v = doc.at("B");
    if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("B", "must be an integer >= 1");
    s.population = v.get<std::size_t>();
  }
  if (doc.contains("T")) {
    const auto &v = doc.at("T");
    if (!v.is_number_integer() || v.get<long long>() < 2) throw ConfigError("T", "must be an integer >= 2");
    s.horizon = v.get<std::int64_t>();
  }
  if (doc.contains("t_ready")) {
    const auto &v = doc.at("t_ready");
    if (!v.is_number_integer() || v.get<long long>() < 1)
      throw ConfigError("t_ready", "must be an integer >= 1");
    s.ready_interval = v.get<std::int64_t>();
  }
  if (doc.contains("seed")) {
    const auto &v = doc.at("seed");
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("seed", "must be an integer >= 0");
    s.seed = v.get<std::uint64_t>();
  }
  read(doc, "lambda", "", s.quantile);
  read(doc, "epsilon", "", s.epsilon);
  read(doc, "explore_all", "", s.explore_all);

  if (doc.contains("gp")) {
    const auto &gp = doc.at("gp");
    if (!gp.is_object()) throw ConfigError("gp", "must be an object");
    read_count(gp, "window", "gp.", s.gp.window);
    read_count(gp, "reopt_stride", "gp.", s.gp.reopt_stride);
    read_count(gp, "starts", "gp.", s.gp.starts);
    read_count(gp, "iterations", "gp.", s.gp.iterations);
    if (gp.contains("beta")) {
      const auto &b = gp.at("beta");
      if (!b.is_object()) throw ConfigError("gp.beta", "must be an object");
      read(b, "c1", "gp.beta.", s.gp.beta.c1);
      read(b, "c2", "gp.beta.", s.gp.beta.c2);
      read(b, "floor", "gp.beta.", s.gp.beta.floor);
    }
    if (gp.contains("bounds")) {
      const auto &b = gp.at("bounds");
      if (!b.is_object()) throw ConfigError("gp.bounds", "must be an object");
      read_interval(b, "lengthscale", "gp.bounds.", s.gp.bounds.lengthscale);
      read_interval(b, "signal_var", "gp.bounds.", s.gp.bounds.signal_var);
      read_interval(b, "noise_var", "gp.bounds.", s.gp.bounds.noise_var);
      read_interval(b, "omega", "gp.bounds.", s.gp.bounds.omega);
      if (s.gp.bounds.omega.high >= 1.0) throw ConfigError("gp.bounds.omega", "high must be < 1");
    }
    if (gp.contains("candidates")) {
      const auto &c = gp.at("candidates");
      if (!c.is_object()) throw ConfigError("gp.candidates", "must be an object");
      read_count(c, "uniform", "gp.candidates.", s.gp.candidates.uniform);
      read_count(c, "per_top", "gp.candidates.", s.gp.candidates.per_top);
      read_count(c, "top", "gp.candidates.", s.gp.candidates.top);
      read(c, "local_std", "gp.candidates.", s.gp.candidates.local_std);
      if (!(s.gp.candidates.local_std > 0.0))
        throw ConfigError("gp.candidates.local_std", "must be positive");
    }
  }

  if (doc.contains("trainer")) {
    const auto &v = doc.at("trainer");
    const std::string name = v.is_string() ? v.get<std::string>() : "";
    if (name == "quadratic") {
      cfg.trainer = TrainerKind::kQuadratic;
    } else if (name == "tvbench") {
      cfg.trainer = TrainerKind::kTvBench;
    } else {
      throw ConfigError("trainer", "must be \"quadratic\" or \"tvbench\"");
    }
  }

  if (doc.contains("bench")) {
    const auto &b = doc.at("bench");
    if (!b.is_object()) throw ConfigError("bench", "must be an object");
    read_count(b, "d", "bench.", cfg.bench.d);
    read_count(b, "m", "bench.", cfg.bench.m);
    read_count(b, "resolution", "bench.", cfg.bench.resolution);
    read(b, "omega", "bench.", cfg.bench.omega);
    read(b, "lengthscale", "bench.", cfg.bench.lengthscale);
    read(b, "signal_var", "bench.", cfg.bench.signal_var);
    read(b, "noise", "bench.", cfg.bench.noise);
    if (cfg.bench.d < 1) throw ConfigError("bench.d", "must be at least 1");
    if (cfg.bench.m < 64) throw ConfigError("bench.m", "must be at least 64");
    if (!(cfg.bench.omega >= 0.0 && cfg.bench.omega <= 1.0))
      throw ConfigError("bench.omega", "must lie in [0, 1]");
    if (!(cfg.bench.lengthscale > 0.0)) throw ConfigError("bench.lengthscale", "must be positive");
    if (!(cfg.bench.signal_var > 0.0)) throw ConfigError("bench.signal_var", "must be positive");
    if (!(cfg.bench.noise >= 0.0)) throw ConfigError("bench.noise", "must be non-negative");
  }

  if (doc.contains("space")) {
    try {
      cfg.space = SearchSpace::from_json(doc.at("space"));
    } catch (const json::exception &e) {
      throw ConfigError("space", e.what());
    } catch (const std::invalid_argument &e) {
      throw ConfigError("space", e.what());
    }
  } else if (cfg.trainer == TrainerKind::kTvBench) {
    std::vector<Dimension> dims;
    for (std::size_t i = 0; i < cfg.bench.d; ++i)
      dims.push_back({"x" + std::to_string(i), 0.0, 1.0, Scale::kLinear});
    cfg.space = SearchSpace(std::move(dims));
  }
  if (cfg.trainer == TrainerKind::kTvBench && cfg.space.size() != cfg.bench.d)
    throw ConfigError("space", "tvbench needs exactly bench.d dimensions");
  if (cfg.trainer == TrainerKind::kQuadratic) {
    const auto &dims = cfg.space.dims();
    const bool has_lr = std::any_of(dims.begin(), dims.end(), [](const Dimension &d) { return d.name == "lr"; });
    if (!has_lr) throw ConfigError("space", "the quadratic trainer needs an 'lr' dimension");
  }

  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) throw ConfigError("output", "must be a string");
    cfg.output = doc.at("output").get<std::string>();
  }
  if (doc.contains("bench_policies")) {
    const auto &v = doc.at("bench_policies");
    if (!v.is_array() || v.empty()) throw ConfigError("bench_policies", "must be a non-empty array");
    cfg.bench_policies.clear();
    for (std::size_t i = 0; i < v.size(); ++i)
      cfg.bench_policies.push_back(read_policy(v[i], "bench_policies." + std::to_string(i)));
  }
  if (doc.contains("seeds")) {
    const auto &v = doc.at("seeds");
    if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("seeds", "must be an integer >= 1");
    cfg.seeds = v.get<std::size_t>();
  }

  s.validate();
  return cfg;
}

json to_json(const RunConfig &c) {
  const auto &s = c.schedule;
  json policies = json::array();
  for (auto p : c.bench_policies) policies.push_back(to_string(p));
  return {
      {"policy", to_string(s.policy)},
      {"B", s.population},
      {"T", s.horizon},
      {"t_ready", s.ready_interval},
      {"lambda", s.quantile},
      {"epsilon", s.epsilon},
      {"seed", s.seed},
      {"explore_all", s.explore_all},
      {"space", c.space.to_json()},
      {"trainer", c.trainer == TrainerKind::kQuadratic ? "quadratic" : "tvbench"},
      {"bench",
       {{"d", c.bench.d},
        {"omega", c.bench.omega},
        {"lengthscale", c.bench.lengthscale},
        {"m", c.bench.m},
        {"signal_var", c.bench.signal_var},
        {"noise", c.bench.noise},
        {"resolution", c.bench.resolution}}},
      {"gp",
       {{"window", s.gp.window},
        {"reopt_stride", s.gp.reopt_stride},
        {"starts", s.gp.starts},
        {"iterations", s.gp.iterations},
        {"beta", {{"c1", s.gp.beta.c1}, {"c2", s.gp.beta.c2}, {"floor", s.gp.beta.floor}}},
        {"bounds",
         {{"lengthscale", {s.gp.bounds.lengthscale.low, s.gp.bounds.lengthscale.high}},
          {"signal_var", {s.gp.bounds.signal_var.low, s.gp.bounds.signal_var.high}},
          {"noise_var", {s.gp.bounds.noise_var.low, s.gp.bounds.noise_var.high}},
          {"omega", {s.gp.bounds.omega.low, s.gp.bounds.omega.high}}}},
        {"candidates",
         {{"uniform", s.gp.candidates.uniform},
          {"per_top", s.gp.candidates.per_top},
          {"top", s.gp.candidates.top},
          {"local_std", s.gp.candidates.local_std}}}}},
      {"output", c.output},
      {"bench_policies", policies},
      {"seeds", c.seeds},
  };
}

}  // namespace pb2
