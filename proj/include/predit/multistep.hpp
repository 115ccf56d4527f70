#pragma once

// Adams-Bashforth / Adams-Moulton kernels with variable node spacing.
//
// Weights are exact integrals of Lagrange basis polynomials over the target
// step, so the kernels stay consistent when the history is stale (skipped
// steps) or the schedule is non-uniform. Time may run in either direction.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "predit/error.hpp"
#include "predit/vector_ops.hpp"

namespace predit {

inline constexpr int kMaxOrder = 4;

struct Interval {
  double start = 0.0;
  double end = 0.0;

  double width() const noexcept { return end - start; }
};

/// A model output f evaluated at time t.
struct NodeSample {
  double t = 0.0;
  Vector f;
};

/// Bounded buffer of past evaluations, index 0 = most recent.
///
/// Times are strictly monotone along the sampling direction; the direction is
/// fixed by the first two samples pushed and survives eviction.
class History {
 public:
  explicit History(std::size_t dim, std::size_t capacity = kMaxOrder)
      : dim_(dim), capacity_(capacity) {
    if (dim == 0) throw DimensionError("History: dimension must be positive");
    if (capacity == 0) throw ConfigError("History: capacity must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  /// +1 for increasing time, -1 for decreasing, 0 while undetermined.
  int direction() const noexcept { return direction_; }

  const NodeSample& operator[](std::size_t i) const { return samples_.at(i); }
  const NodeSample& newest() const {
    if (samples_.empty()) throw UnderfilledHistoryError("History: empty");
    return samples_.front();
  }

  /// Times of the `count` most recent samples, newest first.
  std::vector<double> times(std::size_t count) const {
    if (count > samples_.size()) {
      throw UnderfilledHistoryError("History: requested " + std::to_string(count) +
                                    " samples, have " + std::to_string(samples_.size()));
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = samples_[i].t;
    return out;
  }

  void push(NodeSample sample) {
    validate(sample);
    if (!samples_.empty()) {
      const double gap = sample.t - samples_.front().t;
      if (gap == 0.0) {
        throw HistoryOrderError("History: duplicate time " + std::to_string(sample.t));
      }
      const int dir = gap > 0.0 ? 1 : -1;
      if (direction_ != 0 && dir != direction_) {
        throw HistoryOrderError("History: time " + std::to_string(sample.t) +
                                " runs against the sampling direction");
      }
      direction_ = dir;
    }
    samples_.push_front(std::move(sample));
    if (samples_.size() > capacity_) samples_.pop_back();
  }

  /// Like push, except a sample at exactly the newest time overwrites it.
  void push_or_replace(NodeSample sample) {
    if (!samples_.empty() && samples_.front().t == sample.t) {
      validate(sample);
      samples_.front() = std::move(sample);
      return;
    }
    push(std::move(sample));
  }

  void clear() noexcept {
    samples_.clear();
    direction_ = 0;
  }

 private:
  void validate(const NodeSample& s) const {
    if (!std::isfinite(s.t)) throw HistoryOrderError("History: non-finite time");
    if (s.f.size() != dim_) {
      throw DimensionError("History: sample has dimension " + std::to_string(s.f.size()) +
                           ", expected " + std::to_string(dim_));
    }
  }

  std::size_t dim_;
  std::size_t capacity_;
  int direction_ = 0;
  std::deque<NodeSample> samples_;
};

/// Quadrature weights of one Adams step. Weights are absolute (already scaled
/// by the step width), aligned with `node_times`.
struct CoefficientSet {
  int order = 0;
  std::vector<double> weights;
  bool includes_future = false;
  std::vector<double> node_times;
  Interval interval;
};

namespace detail {

inline void check_order(int order) {
  if (order < 1 || order > kMaxOrder) {
    throw UnsupportedOrderError("unsupported order " + std::to_string(order) +
                                " (supported: 1.." + std::to_string(kMaxOrder) + ")");
  }
}

inline void check_interval(const Interval& iv) {
  if (!std::isfinite(iv.start) || !std::isfinite(iv.end)) {
    throw ConfigError("interval endpoints must be finite");
  }
  if (iv.end == iv.start) throw ConfigError("degenerate interval (zero width)");
}

// Integrals of the Lagrange basis over `iv`. Each basis polynomial is
// expanded into monomials of u = (s - start) / width and integrated over
// [0, 1] in closed form.
inline std::vector<double> lagrange_quadrature(std::span<const double> nodes,
                                               const Interval& iv) {
  check_interval(iv);
  const std::size_t n = nodes.size();
  const double h = iv.width();
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(nodes[i])) throw ConfigError("node times must be finite");
    u[i] = (nodes[i] - iv.start) / h;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (u[i] == u[j] || nodes[i] == nodes[j]) {
        throw DegenerateInterpolationError("duplicate node time " + std::to_string(nodes[i]));
      }
    }
  }

  std::vector<double> weights(n);
  std::vector<double> poly;
  for (std::size_t j = 0; j < n; ++j) {
    poly.assign(1, 1.0);  // ascending monomial coefficients
    double denom = 1.0;
    for (std::size_t m = 0; m < n; ++m) {
      if (m == j) continue;
      // poly *= (u - u[m])
      poly.push_back(0.0);
      for (std::size_t p = poly.size() - 1; p > 0; --p) poly[p] = poly[p - 1] - u[m] * poly[p];
      poly[0] = -u[m] * poly[0];
      denom *= u[j] - u[m];
    }
    double integral = 0.0;
    for (std::size_t p = 0; p < poly.size(); ++p) integral += poly[p] / static_cast<double>(p + 1);
    weights[j] = h * integral / denom;
  }
  return weights;
}

}  // namespace detail

/// Adams-Bashforth weights over `node_times` (k past nodes, newest first)
/// for the step `interval`.
inline CoefficientSet ab_coefficients(int order, std::span<const double> node_times,
                                      const Interval& interval) {
  detail::check_order(order);
  if (node_times.size() != static_cast<std::size_t>(order)) {
    throw ConfigError("ab_coefficients: expected " + std::to_string(order) +
                      " node times, got " + std::to_string(node_times.size()));
  }
  CoefficientSet c;
  c.order = order;
  c.includes_future = false;
  c.node_times.assign(node_times.begin(), node_times.end());
  c.interval = interval;
  c.weights = detail::lagrange_quadrature(node_times, interval);
  return c;
}

/// Adams-Moulton weights. `node_times[0]` is the implicit node and must equal
/// `interval.end`; the remaining k nodes are history, newest first.
inline CoefficientSet am_coefficients(int order, std::span<const double> node_times,
                                      const Interval& interval) {
  detail::check_order(order);
  if (node_times.size() != static_cast<std::size_t>(order) + 1) {
    throw ConfigError("am_coefficients: expected " + std::to_string(order + 1) +
                      " node times, got " + std::to_string(node_times.size()));
  }
  if (node_times[0] != interval.end) {
    throw ConfigError("am_coefficients: first node must be the step end");
  }
  CoefficientSet c;
  c.order = order;
  c.includes_future = true;
  c.node_times.assign(node_times.begin(), node_times.end());
  c.interval = interval;
  c.weights = detail::lagrange_quadrature(node_times, interval);
  return c;
}

/// Leading local truncation error constant C of a coefficient set built on
/// uniform nodes: the step error is C * h^(n+1) * x^(n+1) for n nodes.
inline double local_error_constant(const CoefficientSet& c) {
  const double h = c.interval.width();
  const std::size_t n = c.weights.size();
  double quad = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double u = (c.node_times[j] - c.interval.start) / h;
    quad += c.weights[j] / h * std::pow(u, static_cast<double>(n));
  }
  double factorial = 1.0;
  for (std::size_t i = 2; i <= n; ++i) factorial *= static_cast<double>(i);
  return (1.0 / static_cast<double>(n + 1) - quad) / factorial;
}

namespace detail {

inline void check_step(const History& history, int order, std::span<const double> x,
                       const Interval& iv) {
  check_order(order);
  if (history.size() < static_cast<std::size_t>(order)) {
    throw UnderfilledHistoryError("order " + std::to_string(order) + " needs " +
                                  std::to_string(order) + " history samples, have " +
                                  std::to_string(history.size()));
  }
  if (x.size() != history.dim()) {
    throw DimensionError("state dimension " + std::to_string(x.size()) +
                         " does not match history dimension " +
                         std::to_string(history.dim()));
  }
  check_interval(iv);
  const int dir = history.direction();
  const int step_dir = iv.width() > 0.0 ? 1 : -1;
  const double lag = iv.start - history.newest().t;
  if (dir != 0 && step_dir != dir) {
    throw HistoryOrderError("step runs against the history direction");
  }
  if (lag != 0.0 && (lag > 0.0 ? 1 : -1) != step_dir) {
    throw HistoryOrderError("step starts behind the newest history sample");
  }
}

}  // namespace detail

/// Explicit Adams-Bashforth step over `interval` from the k newest samples.
inline Vector ab_step(std::span<const double> x, const History& history, int order,
                      const Interval& interval) {
  detail::check_step(history, order, x, interval);
  const auto nodes = history.times(static_cast<std::size_t>(order));
  const auto c = ab_coefficients(order, nodes, interval);
  Vector out(x.begin(), x.end());
  for (std::size_t j = 0; j < c.weights.size(); ++j) axpy(c.weights[j], history[j].f, out);
  return out;
}

/// Step from the newest history time to `t_next`.
inline Vector ab_step(std::span<const double> x, const History& history, int order,
                      double t_next) {
  return ab_step(x, history, order, Interval{history.newest().t, t_next});
}

/// Adams-Moulton step: `f_future` is the field value at `interval.end`.
inline Vector am_step(std::span<const double> x, const History& history, int order,
                      std::span<const double> f_future, const Interval& interval) {
  detail::check_step(history, order, x, interval);
  require_same_dim(x, f_future, "am_step");
  std::vector<double> nodes;
  nodes.reserve(static_cast<std::size_t>(order) + 1);
  nodes.push_back(interval.end);
  for (std::size_t j = 0; j < static_cast<std::size_t>(order); ++j) nodes.push_back(history[j].t);
  const auto c = am_coefficients(order, nodes, interval);
  Vector out(x.begin(), x.end());
  axpy(c.weights[0], f_future, out);
  for (std::size_t j = 1; j < c.weights.size(); ++j) axpy(c.weights[j], history[j - 1].f, out);
  return out;
}

inline Vector am_step(std::span<const double> x, const History& history, int order,
                      std::span<const double> f_future, double t_next) {
  return am_step(x, history, order, f_future, Interval{history.newest().t, t_next});
}

/// Anything evaluable as f(x, t) -> Vector.
template <class F>
concept FieldOracle = requires(F& f, std::span<const double> x, double t) {
  { f(x, t) } -> std::convertible_to<Vector>;
};

struct AbmResult {
  Vector x;       // corrected state at interval.end
  Vector f_next;  // evaluation at the predicted state
};

/// One predict-evaluate-correct step. Makes exactly one oracle call; the
/// caller decides whether `f_next` enters the history.
template <FieldOracle Oracle>
AbmResult abm_step(std::span<const double> x, const History& history, int order,
                   const Interval& interval, Oracle& oracle) {
  Vector predicted = ab_step(x, history, order, interval);
  Vector f_next = oracle(std::span<const double>(predicted), interval.end);
  Vector corrected = am_step(x, history, order, f_next, interval);
  return {std::move(corrected), std::move(f_next)};
}

template <FieldOracle Oracle>
AbmResult abm_step(std::span<const double> x, const History& history, int order,
                   double t_next, Oracle& oracle) {
  return abm_step(x, history, order, Interval{history.newest().t, t_next}, oracle);
}

}  // namespace predit
