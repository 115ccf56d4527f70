#pragma once

// Synthetic vector fields with closed-form solutions, plus an oracle that
// replays recorded model outputs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "predit/error.hpp"
#include "predit/oracle.hpp"
#include "predit/vector_ops.hpp"

namespace predit {

enum class FieldKind { Constant, Linear, Cosine, PolyTime, NonuniformDynamics, Replay };
enum class Interpolation { Nearest, Linear };

inline const char* to_string(FieldKind k) noexcept {
  switch (k) {
    case FieldKind::Constant: return "constant";
    case FieldKind::Linear: return "linear";
    case FieldKind::Cosine: return "cosine";
    case FieldKind::PolyTime: return "poly";
    case FieldKind::NonuniformDynamics: return "nonuniform";
    case FieldKind::Replay: return "replay";
  }
  return "?";
}

/// Model outputs recorded along a trajectory; f depends on t only.
struct RecordedTrajectory {
  std::vector<double> times;
  std::vector<Vector> values;
  std::string metadata;

  std::size_t dim() const { return values.empty() ? 0 : values.front().size(); }

  void validate() const {
    if (times.empty()) throw ConfigError("trajectory is empty");
    if (times.size() != values.size()) {
      throw ConfigError("trajectory has " + std::to_string(times.size()) + " times but " +
                        std::to_string(values.size()) + " values");
    }
    const std::size_t d = dim();
    if (d == 0) throw DimensionError("trajectory values have zero dimension");
    for (const auto& v : values)
      if (v.size() != d) throw DimensionError("trajectory values differ in dimension");
    for (double t : times)
      if (!std::isfinite(t)) throw ConfigError("trajectory time is not finite");
    if (times.size() > 1) {
      const bool up = times[1] > times[0];
      for (std::size_t i = 1; i < times.size(); ++i) {
        if (up ? !(times[i] > times[i - 1]) : !(times[i] < times[i - 1])) {
          throw ConfigError("trajectory times are not strictly monotone");
        }
      }
    }
  }
};

struct FieldSpec {
  FieldKind kind = FieldKind::Constant;
  std::size_t dim = 1;
  Vector constant;      // Constant; empty means all ones
  double lambda = 1.0;  // Linear: f = -lambda * x
  int degree = 1;       // PolyTime: f = t^degree
  double a = 1.0;       // NonuniformDynamics: g(t) = a (1 + b (2t - 1)^2)
  double b = 1.0;
  Vector direction;     // NonuniformDynamics; empty means (1,...,1)/sqrt(d)
  std::shared_ptr<const RecordedTrajectory> trajectory;
  Interpolation interpolation = Interpolation::Linear;

  static FieldSpec constant_field(Vector c) {
    FieldSpec s;
    s.kind = FieldKind::Constant;
    s.dim = c.size();
    s.constant = std::move(c);
    return s;
  }
  static FieldSpec linear(double lambda, std::size_t dim = 1) {
    FieldSpec s;
    s.kind = FieldKind::Linear;
    s.dim = dim;
    s.lambda = lambda;
    return s;
  }
  static FieldSpec cosine(std::size_t dim = 1) {
    FieldSpec s;
    s.kind = FieldKind::Cosine;
    s.dim = dim;
    return s;
  }
  static FieldSpec poly_time(int degree, std::size_t dim = 1) {
    FieldSpec s;
    s.kind = FieldKind::PolyTime;
    s.dim = dim;
    s.degree = degree;
    return s;
  }
  static FieldSpec nonuniform(double a = 1.0, double b = 1.0, std::size_t dim = 1) {
    FieldSpec s;
    s.kind = FieldKind::NonuniformDynamics;
    s.dim = dim;
    s.a = a;
    s.b = b;
    return s;
  }
  static FieldSpec replay(RecordedTrajectory traj, Interpolation mode) {
    traj.validate();
    FieldSpec s;
    s.kind = FieldKind::Replay;
    s.dim = traj.dim();
    s.trajectory = std::make_shared<const RecordedTrajectory>(std::move(traj));
    s.interpolation = mode;
    return s;
  }

  void validate() const {
    if (dim == 0) throw ConfigError("field dimension must be positive");
    switch (kind) {
      case FieldKind::Constant:
        if (!constant.empty() && constant.size() != dim)
          throw DimensionError("constant vector does not match field dimension");
        break;
      case FieldKind::Linear:
        if (!std::isfinite(lambda)) throw ConfigError("lambda must be finite");
        break;
      case FieldKind::Cosine: break;
      case FieldKind::PolyTime:
        if (degree < 0) throw ConfigError("polynomial degree must be non-negative");
        break;
      case FieldKind::NonuniformDynamics:
        if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("a, b must be finite");
        if (!direction.empty() && direction.size() != dim)
          throw DimensionError("direction does not match field dimension");
        break;
      case FieldKind::Replay:
        if (!trajectory) throw ConfigError("replay field has no trajectory");
        trajectory->validate();
        if (trajectory->dim() != dim) throw DimensionError("trajectory dimension mismatch");
        break;
      default: throw ConfigError("unknown field kind");
    }
  }

  std::string name() const { return to_string(kind); }

  bool has_exact_solution() const { return kind != FieldKind::Replay; }

  Vector constant_vector() const { return constant.empty() ? Vector(dim, 1.0) : constant; }

  Vector unit_direction() const {
    if (direction.empty()) return Vector(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    const double n = l2_norm(direction);
    Vector u = direction;
    for (double& x : u) x /= n;
    return u;
  }

  double nonuniform_g(double t) const {
    const double s = 2.0 * t - 1.0;
    return a * (1.0 + b * s * s);
  }

  /// f(x, t) without call accounting.
  Vector evaluate(std::span<const double> x, double t) const {
    switch (kind) {
      case FieldKind::Constant: return constant_vector();
      case FieldKind::Linear: {
        Vector f(x.begin(), x.end());
        for (double& v : f) v *= -lambda;
        return f;
      }
      case FieldKind::Cosine: return Vector(dim, std::cos(t));
      case FieldKind::PolyTime: return Vector(dim, std::pow(t, degree));
      case FieldKind::NonuniformDynamics: {
        Vector f = unit_direction();
        const double g = nonuniform_g(t);
        for (double& v : f) v *= g;
        return f;
      }
      case FieldKind::Replay: return replay_at(t);
    }
    throw ConfigError("unknown field kind");
  }

  /// Closed-form x(t) given x(t0) = x0.
  Vector exact_solution(std::span<const double> x0, double t0, double t) const {
    if (!has_exact_solution()) throw ConfigError(name() + " field has no closed-form solution");
    Vector x(x0.begin(), x0.end());
    switch (kind) {
      case FieldKind::Constant: axpy(t - t0, constant_vector(), x); break;
      case FieldKind::Linear: {
        const double decay = std::exp(-lambda * (t - t0));
        for (double& v : x) v *= decay;
        break;
      }
      case FieldKind::Cosine:
        for (double& v : x) v += std::sin(t) - std::sin(t0);
        break;
      case FieldKind::PolyTime: {
        const double m1 = degree + 1.0;
        const double inc = (std::pow(t, m1) - std::pow(t0, m1)) / m1;
        for (double& v : x) v += inc;
        break;
      }
      case FieldKind::NonuniformDynamics: {
        auto antiderivative = [&](double s) {
          const double c = 2.0 * s - 1.0;
          return a * (s + b * c * c * c / 6.0);
        };
        axpy(antiderivative(t) - antiderivative(t0), unit_direction(), x);
        break;
      }
      case FieldKind::Replay: break;
    }
    return x;
  }

  Vector replay_at(double t) const {
    const auto& tr = *trajectory;
    const auto& ts = tr.times;
    const std::size_t n = ts.size();
    const bool up = n < 2 || ts[1] > ts[0];
    const double lo = up ? ts.front() : ts.back();
    const double hi = up ? ts.back() : ts.front();
    if (!(t >= lo && t <= hi)) {
      throw OutOfRangeError("replay: t=" + std::to_string(t) + " outside recorded range [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    // first index i with t on or past ts[i] in recording order
    std::size_t i = 0;
    while (i < n && (up ? ts[i] < t : ts[i] > t)) ++i;
    if (i < n && ts[i] == t) return tr.values[i];
    const std::size_t prev = i - 1;  // ts[prev] strictly before t, ts[i] strictly after
    const double span = ts[i] - ts[prev];
    const double w = (t - ts[prev]) / span;
    if (interpolation == Interpolation::Nearest) {
      return w <= 0.5 ? tr.values[prev] : tr.values[i];
    }
    Vector out(tr.values[prev].size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = (1.0 - w) * tr.values[prev][k] + w * tr.values[i][k];
    }
    return out;
  }
};

/// Counting oracle for `spec`.
inline OracleHandle make_field(const FieldSpec& spec) {
  spec.validate();
  return OracleHandle(spec.dim, [spec](std::span<const double> x, double t) {
    return spec.evaluate(x, t);
  });
}

/// Counting oracle replaying `traj`; the state argument is ignored.
inline OracleHandle replay_oracle(RecordedTrajectory traj, Interpolation mode) {
  return make_field(FieldSpec::replay(std::move(traj), mode));
}

// ---------------------------------------------------------------------------
// Trajectory files:
//
//   predit-traj v1 dim=<d> n=<N>
//   # optional metadata lines
//   t v1 ... vd        (N lines)

namespace detail {

inline double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("trajectory line " + std::to_string(line) + ": bad number '" +
                     std::string(tok) + "'");
  }
  return v;
}

inline std::size_t parse_count(std::string_view tok, std::string_view key) {
  if (tok.substr(0, key.size()) != key) {
    throw ParseError("trajectory header: expected '" + std::string(key) + "<int>'");
  }
  tok.remove_prefix(key.size());
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("trajectory header: bad value for " + std::string(key));
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline RecordedTrajectory read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trajectory: missing header");
  std::istringstream hs(line);
  std::string magic, version, dim_tok, n_tok, extra;
  hs >> magic >> version >> dim_tok >> n_tok;
  if (magic != "predit-traj" || version != "v1" || (hs >> extra)) {
    throw ParseError("trajectory: header must read 'predit-traj v1 dim=<d> n=<N>'");
  }
  const std::size_t dim = detail::parse_count(dim_tok, "dim=");
  const std::size_t n = detail::parse_count(n_tok, "n=");
  if (dim == 0) throw ParseError("trajectory: dim must be positive");

  RecordedTrajectory traj;
  traj.times.reserve(n);
  traj.values.reserve(n);
  std::size_t lineno = 1;
  std::vector<std::string_view> toks;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.front() == '#') {
      std::string_view meta(line);
      meta.remove_prefix(1);
      if (!meta.empty() && meta.front() == ' ') meta.remove_prefix(1);
      if (!traj.metadata.empty()) traj.metadata += '\n';
      traj.metadata += meta;
      continue;
    }
    toks.clear();
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto b = rest.find_first_not_of(" \t");
      if (b == std::string_view::npos) break;
      rest.remove_prefix(b);
      const auto e = rest.find_first_of(" \t");
      toks.push_back(rest.substr(0, e));
      rest.remove_prefix(e == std::string_view::npos ? rest.size() : e);
    }
    if (toks.size() != dim + 1) {
      throw ParseError("trajectory line " + std::to_string(lineno) + ": expected " +
                       std::to_string(dim + 1) + " columns, got " + std::to_string(toks.size()));
    }
    if (traj.times.size() == n) {
      throw ParseError("trajectory: more than n=" + std::to_string(n) + " data lines");
    }
    traj.times.push_back(detail::parse_double(toks[0], lineno));
    Vector v(dim);
    for (std::size_t k = 0; k < dim; ++k) v[k] = detail::parse_double(toks[k + 1], lineno);
    traj.values.push_back(std::move(v));
  }
  if (traj.times.size() != n) {
    throw ParseError("trajectory: header declares n=" + std::to_string(n) + " but file has " +
                     std::to_string(traj.times.size()) + " data lines");
  }
  try {
    traj.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("trajectory: ") + e.what());
  }
  return traj;
}

inline RecordedTrajectory read_trajectory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file '" + path + "'");
  return read_trajectory(in);
}

/// Writes shortest round-trip decimal representations.
inline void write_trajectory(std::ostream& out, const RecordedTrajectory& traj) {
  traj.validate();
  out << "predit-traj v1 dim=" << traj.dim() << " n=" << traj.times.size() << '\n';
  if (!traj.metadata.empty()) {
    std::istringstream meta(traj.metadata);
    std::string line;
    while (std::getline(meta, line)) out << "# " << line << '\n';
  }
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out << detail::format_double(traj.times[i]);
    for (double v : traj.values[i]) out << ' ' << detail::format_double(v);
    out << '\n';
  }
}

inline void write_trajectory_file(const std::string& path, const RecordedTrajectory& traj) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_trajectory(out, traj);
}

}  // namespace predit
