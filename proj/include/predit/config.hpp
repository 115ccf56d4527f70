#pragma once

// Experiment configuration shared by the config file and the CLI flags.
// Both speak the same key vocabulary; unknown keys are rejected.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "predit/dynamics.hpp"
#include "predit/error.hpp"
#include "predit/fields.hpp"
#include "predit/sampler.hpp"

namespace predit {

enum class Experiment { Sample, Converge, Drift, Ablate, Profile };
enum class Spacing { Uniform, CosineRamp };

inline const char* to_string(Experiment e) noexcept {
  switch (e) {
    case Experiment::Sample: return "sample";
    case Experiment::Converge: return "converge";
    case Experiment::Drift: return "drift";
    case Experiment::Ablate: return "ablate";
    case Experiment::Profile: return "profile";
  }
  return "?";
}

struct ExperimentConfig {
  Experiment experiment = Experiment::Sample;

  // field
  std::string field;  // empty: per-experiment default
  std::size_t dim = 1;
  std::string constant;  // comma-separated; empty means all ones
  double lambda = 1.0;
  int degree = 2;
  double a = 1.0;
  double b = 1.0;
  std::string traj;
  Interpolation interp = Interpolation::Linear;

  // schedule
  std::optional<double> t0;
  std::optional<double> t1;
  std::size_t n = 50;
  Spacing spacing = Spacing::Uniform;
  std::string x0 = "1";

  // policy
  PolicyParams params;
  bool literal_history = false;
  bool uniform_coeffs = false;

  // studies
  std::string method = "ab2";
  std::vector<std::size_t> steps{40, 80, 160, 320};
  std::vector<std::string> policies{"reuse:4", "abfixed:4:2"};
  int interval = 2;
  std::vector<std::string> fields{"linear", "cosine", "nonuniform"};
  bool match_budget = false;

  // output
  std::string csv;
  std::string json;
  std::string trace_csv;
  std::uint64_t seed = 0;

  std::string default_field() const {
    switch (experiment) {
      case Experiment::Converge: return "cosine";
      case Experiment::Profile: return "nonuniform";
      default: return "linear";
    }
  }
  std::string field_name() const { return field.empty() ? default_field() : field; }

  double start_time() const { return t0.value_or(0.0); }
  double end_time() const {
    if (t1) return *t1;
    return experiment == Experiment::Converge ? std::numbers::pi : 1.0;
  }

  SamplerOptions sampler_options() const {
    SamplerOptions o;
    o.literal_history = literal_history;
    o.uniform_coefficients = uniform_coeffs;
    return o;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (true) {
    const auto c = s.find(',');
    const auto item = trim(s.substr(0, c));
    if (!item.empty()) out.emplace_back(item);
    if (c == std::string_view::npos) break;
    s.remove_prefix(c + 1);
  }
  return out;
}

inline double to_double(const std::string& key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const char* first = v.data();
  if (!v.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigKeyError(key, "invalid value for '" + key + "': expected a number, got '" +
                                  std::string(v) + "'");
  }
  return out;
}

template <class Int>
Int to_int(const std::string& key, std::string_view v) {
  v = trim(v);
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigKeyError(key, "invalid value for '" + key + "': expected an integer, got '" +
                                  std::string(v) + "'");
  }
  return out;
}

inline bool to_bool(const std::string& key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigKeyError(key, "invalid value for '" + key + "': expected true/false");
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  bool is_flag = false;
  std::function<void(ExperimentConfig&, const std::string&)> apply;
  std::function<std::string(const ExperimentConfig&)> show;
};

/// Every accepted key, in documentation order.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_int;
  auto num = [](double v) { return detail::format_double(v); };
  auto join = [](const auto& items) {
    std::string s;
    for (const auto& i : items) {
      if (!s.empty()) s += ',';
      if constexpr (std::is_same_v<std::decay_t<decltype(i)>, std::string>) s += i;
      else s += std::to_string(i);
    }
    return s;
  };
  static const std::vector<ConfigKey> keys = {
      {"field", "vector field: constant, linear, cosine, poly, nonuniform, replay", false,
       [](ExperimentConfig& c, const std::string& v) {
         static const std::vector<std::string> ok{"constant", "linear", "cosine", "poly", "nonuniform", "replay"};
         if (std::find(ok.begin(), ok.end(), v) == ok.end())
           throw ConfigKeyError("field", "unknown field '" + v + "'");
         c.field = v;
       },
       [](const ExperimentConfig& c) { return c.field_name(); }},
      {"dim", "state dimension", false,
       [](ExperimentConfig& c, const std::string& v) {
         c.dim = to_int<std::size_t>("dim", v);
         if (c.dim == 0) throw ConfigKeyError("dim", "dim must be positive");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.dim); }},
      {"constant", "constant field vector, comma-separated", false,
       [](ExperimentConfig& c, const std::string& v) { c.constant = v; },
       [](const ExperimentConfig& c) { return c.constant.empty() ? std::string("all ones") : c.constant; }},
      {"lambda", "decay rate of the linear field f = -lambda x", false,
       [](ExperimentConfig& c, const std::string& v) { c.lambda = to_double("lambda", v); },
       [num](const ExperimentConfig& c) { return num(c.lambda); }},
      {"degree", "degree m of the poly field f = t^m", false,
       [](ExperimentConfig& c, const std::string& v) {
         c.degree = to_int<int>("degree", v);
         if (c.degree < 0) throw ConfigKeyError("degree", "degree must be non-negative");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.degree); }},
      {"a", "nonuniform field amplitude a in g(t) = a (1 + b (2t-1)^2)", false,
       [](ExperimentConfig& c, const std::string& v) { c.a = to_double("a", v); },
       [num](const ExperimentConfig& c) { return num(c.a); }},
      {"b", "nonuniform field shape b in g(t) = a (1 + b (2t-1)^2)", false,
       [](ExperimentConfig& c, const std::string& v) { c.b = to_double("b", v); },
       [num](const ExperimentConfig& c) { return num(c.b); }},
      {"traj", "trajectory file for the replay field", false,
       [](ExperimentConfig& c, const std::string& v) { c.traj = v; },
       [](const ExperimentConfig& c) { return c.traj; }},
      {"interp", "replay interpolation: nearest or linear", false,
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "nearest") c.interp = Interpolation::Nearest;
         else if (v == "linear") c.interp = Interpolation::Linear;
         else throw ConfigKeyError("interp", "interp must be 'nearest' or 'linear'");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.interp == Interpolation::Nearest ? "nearest" : "linear");
       }},
      {"t0", "schedule start time", false,
       [](ExperimentConfig& c, const std::string& v) { c.t0 = to_double("t0", v); },
       [num](const ExperimentConfig& c) { return num(c.start_time()); }},
      {"t1", "schedule end time", false,
       [](ExperimentConfig& c, const std::string& v) { c.t1 = to_double("t1", v); },
       [num](const ExperimentConfig& c) { return num(c.end_time()); }},
      {"n", "number of schedule steps", false,
       [](ExperimentConfig& c, const std::string& v) {
         c.n = to_int<std::size_t>("n", v);
         if (c.n == 0) throw ConfigKeyError("n", "n must be positive");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.n); }},
      {"spacing", "schedule spacing: uniform or cosine-ramp", false,
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "uniform") c.spacing = Spacing::Uniform;
         else if (v == "cosine-ramp") c.spacing = Spacing::CosineRamp;
         else throw ConfigKeyError("spacing", "spacing must be 'uniform' or 'cosine-ramp'");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.spacing == Spacing::Uniform ? "uniform" : "cosine-ramp");
       }},
      {"x0", "initial state: one value (broadcast), d comma-separated values, or 'random'", false,
       [](ExperimentConfig& c, const std::string& v) { c.x0 = v; },
       [](const ExperimentConfig& c) { return c.x0; }},
      {"order", "multistep order k (1..4)", false,
       [](ExperimentConfig& c, const std::string& v) { c.params.order = to_int<int>("order", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.params.order); }},
      {"tau", "change-rate threshold tau", false,
       [](ExperimentConfig& c, const std::string& v) { c.params.tau = to_double("tau", v); },
       [num](const ExperimentConfig& c) { return num(c.params.tau); }},
      {"ratio", "correction ratio r in (0, 1)", false,
       [](ExperimentConfig& c, const std::string& v) { c.params.ratio = to_double("ratio", v); },
       [num](const ExperimentConfig& c) { return num(c.params.ratio); }},
      {"p", "sensitivity exponent p", false,
       [](ExperimentConfig& c, const std::string& v) { c.params.sensitivity = to_int<int>("p", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.params.sensitivity); }},
      {"eps", "stability constant epsilon", false,
       [](ExperimentConfig& c, const std::string& v) { c.params.epsilon = to_double("eps", v); },
       [num](const ExperimentConfig& c) { return num(c.params.epsilon); }},
      {"jmax", "maximum skip length", false,
       [](ExperimentConfig& c, const std::string& v) { c.params.j_max = to_int<int>("jmax", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.params.j_max); }},
      {"literal_history", "keep only step-start evaluations in the history", true,
       [](ExperimentConfig& c, const std::string& v) { c.literal_history = to_bool("literal_history", v); },
       [](const ExperimentConfig& c) { return std::string(c.literal_history ? "true" : "false"); }},
      {"uniform_coeffs", "use fixed uniform-grid coefficients instead of true node times", true,
       [](ExperimentConfig& c, const std::string& v) { c.uniform_coeffs = to_bool("uniform_coeffs", v); },
       [](const ExperimentConfig& c) { return std::string(c.uniform_coeffs ? "true" : "false"); }},
      {"method", "converge: euler, ab<k>, am<k> or abm<k>", false,
       [](ExperimentConfig& c, const std::string& v) { c.method = v; },
       [](const ExperimentConfig& c) { return c.method; }},
      {"steps", "converge: comma-separated step counts", false,
       [](ExperimentConfig& c, const std::string& v) {
         c.steps.clear();
         for (const auto& s : detail::split_list(v)) c.steps.push_back(to_int<std::size_t>("steps", s));
       },
       [join](const ExperimentConfig& c) { return join(c.steps); }},
      {"policies", "drift: comma-separated policies (euler, reuse:i, abfixed:i[:k], abmfixed:i[:k], predit, abdsm, abmdsm)", false,
       [](ExperimentConfig& c, const std::string& v) { c.policies = detail::split_list(v); },
       [join](const ExperimentConfig& c) { return join(c.policies); }},
      {"interval", "ablate: interval of the fixed-interval baselines", false,
       [](ExperimentConfig& c, const std::string& v) {
         c.interval = to_int<int>("interval", v);
         if (c.interval < 1) throw ConfigKeyError("interval", "interval must be >= 1");
       },
       [](const ExperimentConfig& c) { return std::to_string(c.interval); }},
      {"fields", "ablate: comma-separated fields", false,
       [](ExperimentConfig& c, const std::string& v) { c.fields = detail::split_list(v); },
       [join](const ExperimentConfig& c) { return join(c.fields); }},
      {"match_budget", "drift: calibrate tau of adaptive policies to the first fixed policy's call count (+-10%)", true,
       [](ExperimentConfig& c, const std::string& v) { c.match_budget = to_bool("match_budget", v); },
       [](const ExperimentConfig& c) { return std::string(c.match_budget ? "true" : "false"); }},
      {"csv", "write the result table as CSV to this path instead of stdout", false,
       [](ExperimentConfig& c, const std::string& v) { c.csv = v; },
       [](const ExperimentConfig& c) { return c.csv; }},
      {"json", "write the result table as JSON to this path", false,
       [](ExperimentConfig& c, const std::string& v) { c.json = v; },
       [](const ExperimentConfig& c) { return c.json; }},
      {"trace_csv", "drift/sample: write per-step records as CSV to this path", false,
       [](ExperimentConfig& c, const std::string& v) { c.trace_csv = v; },
       [](const ExperimentConfig& c) { return c.trace_csv; }},
      {"seed", "seed for randomized inputs (x0=random)", false,
       [](ExperimentConfig& c, const std::string& v) { c.seed = to_int<std::uint64_t>("seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
  };
  return keys;
}

/// Keys may be spelled with '-' or '_'.
inline void apply_key(ExperimentConfig& cfg, std::string key, const std::string& value) {
  std::replace(key.begin(), key.end(), '-', '_');
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.apply(cfg, value);
      return;
    }
  }
  throw ConfigKeyError(key, "unknown key '" + key + "'");
}

/// Flat `key = value` lines; `#` starts a comment at line start or after
/// whitespace.
inline void apply_config(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.resize(i);
        break;
      }
    }
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigKeyError(std::string(body), "config line " + std::to_string(lineno) +
                                                  ": expected key=value, got '" + std::string(body) + "'");
    }
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    if (key.empty()) throw ConfigKeyError("", "config line " + std::to_string(lineno) + ": empty key");
    apply_key(cfg, key, value);
  }
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigKeyError("config", "cannot open config file '" + path + "'");
  apply_config(cfg, in);
}

/// Range checks on the policy parameters, reported against their keys.
inline void validate_config(const ExperimentConfig& cfg) {
  const PolicyParams& p = cfg.params;
  if (p.order < 1 || p.order > kMaxOrder) {
    throw ConfigKeyError("order", "order must lie in 1.." + std::to_string(kMaxOrder));
  }
  if (!(p.tau > 0.0)) throw ConfigKeyError("tau", "tau must be positive");
  if (!(p.ratio > 0.0 && p.ratio < 1.0)) throw ConfigKeyError("ratio", "ratio must lie in (0, 1)");
  if (p.sensitivity < 0) throw ConfigKeyError("p", "p must be non-negative");
  if (!(p.epsilon > 0.0)) throw ConfigKeyError("eps", "eps must be positive");
  if (p.j_max < 1) throw ConfigKeyError("jmax", "jmax must be at least 1");
  if (cfg.start_time() == cfg.end_time()) throw ConfigKeyError("t1", "t0 and t1 must differ");
}

inline FieldSpec field_spec(const ExperimentConfig& cfg, const std::string& name) {
  FieldSpec s;
  if (name == "constant") {
    if (cfg.constant.empty()) {
      s = FieldSpec::constant_field(Vector(cfg.dim, 1.0));
    } else {
      Vector c;
      for (const auto& v : detail::split_list(cfg.constant)) c.push_back(detail::to_double("constant", v));
      if (c.size() != cfg.dim) {
        throw ConfigKeyError("constant", "constant has " + std::to_string(c.size()) +
                                             " entries but dim=" + std::to_string(cfg.dim));
      }
      s = FieldSpec::constant_field(std::move(c));
    }
  } else if (name == "linear") {
    s = FieldSpec::linear(cfg.lambda, cfg.dim);
  } else if (name == "cosine") {
    s = FieldSpec::cosine(cfg.dim);
  } else if (name == "poly") {
    s = FieldSpec::poly_time(cfg.degree, cfg.dim);
  } else if (name == "nonuniform") {
    s = FieldSpec::nonuniform(cfg.a, cfg.b, cfg.dim);
  } else if (name == "replay") {
    if (cfg.traj.empty()) throw ConfigKeyError("traj", "replay field needs traj=<path>");
    s = FieldSpec::replay(read_trajectory_file(cfg.traj), cfg.interp);
  } else {
    throw ConfigKeyError("field", "unknown field '" + name + "'");
  }
  return s;
}

inline Schedule make_schedule(const ExperimentConfig& cfg) {
  const double t0 = cfg.start_time();
  const double t1 = cfg.end_time();
  if (t0 == t1) throw ConfigKeyError("t1", "t0 and t1 must differ");
  return cfg.spacing == Spacing::Uniform ? Schedule::uniform(t0, t1, cfg.n)
                                         : Schedule::cosine_ramp(t0, t1, cfg.n);
}

inline Vector initial_state(const ExperimentConfig& cfg, std::size_t dim) {
  if (cfg.x0 == "random") {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x(dim);
    for (double& v : x) v = u(rng);
    return x;
  }
  Vector x;
  for (const auto& v : detail::split_list(cfg.x0)) x.push_back(detail::to_double("x0", v));
  if (x.size() == 1) return Vector(dim, x[0]);
  if (x.size() != dim) {
    throw ConfigKeyError("x0", "x0 has " + std::to_string(x.size()) + " entries but dim=" +
                                   std::to_string(dim));
  }
  return x;
}

}  // namespace predit
