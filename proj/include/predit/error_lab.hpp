#pragma once

// Error measurement: reference trajectories, convergence-order regression,
// accumulated drift along a schedule and where a policy spends its calls.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "predit/error.hpp"
#include "predit/fields.hpp"
#include "predit/multistep.hpp"
#include "predit/oracle.hpp"
#include "predit/policy.hpp"
#include "predit/sampler.hpp"
#include "predit/vector_ops.hpp"

namespace predit {

// ---------------------------------------------------------------------------
// Reference solutions

enum class ReferenceMode { Auto, ExactOnly, Rk4 };

struct Reference {
  std::vector<Vector> states;  // one per schedule time
  bool exact = false;
  /// Richardson estimate of the RK4 error (0 for exact references).
  double rk4_error_estimate = 0.0;
};

namespace detail {

inline std::vector<Vector> rk4_path(const FieldSpec& spec, std::span<const double> x0,
                                    const Schedule& schedule, int refinement) {
  std::vector<Vector> out;
  out.reserve(schedule.times.size());
  Vector x(x0.begin(), x0.end());
  out.push_back(x);
  const std::size_t d = x.size();
  Vector tmp(d);
  auto stage = [&](const Vector& base, const Vector& k, double scale, double t) {
    for (std::size_t i = 0; i < d; ++i) tmp[i] = base[i] + scale * k[i];
    return spec.evaluate(tmp, t);
  };
  for (std::size_t n = 0; n + 1 < schedule.times.size(); ++n) {
    const double t0 = schedule.times[n];
    const double h = (schedule.times[n + 1] - t0) / refinement;
    for (int s = 0; s < refinement; ++s) {
      const double t = t0 + h * s;
      // clamp the final substage onto the grid so replay fields stay in range
      const double t_end = s + 1 == refinement ? schedule.times[n + 1] : t + h;
      const double t_mid = 0.5 * (t + t_end);
      const Vector k1 = spec.evaluate(x, t);
      const Vector k2 = stage(x, k1, 0.5 * h, t_mid);
      const Vector k3 = stage(x, k2, 0.5 * h, t_mid);
      const Vector k4 = stage(x, k3, h, t_end);
      for (std::size_t i = 0; i < d; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

/// Ground truth at every schedule time. Auto uses the closed form when the
/// field has one and RK4 at `refinement` substeps per interval otherwise.
inline Reference reference_solution(const FieldSpec& spec, std::span<const double> x0,
                                    const Schedule& schedule,
                                    ReferenceMode mode = ReferenceMode::Auto,
                                    int refinement = 64) {
  spec.validate();
  schedule.validate();
  if (x0.size() != spec.dim) throw DimensionError("reference: initial state dimension mismatch");
  Reference ref;
  if (mode != ReferenceMode::Rk4 && spec.has_exact_solution()) {
    ref.exact = true;
    ref.states.reserve(schedule.times.size());
    for (double t : schedule.times) ref.states.push_back(spec.exact_solution(x0, schedule.front(), t));
    return ref;
  }
  if (mode == ReferenceMode::ExactOnly) {
    throw ConfigError(spec.name() + " field has no closed-form solution and RK4 fallback is disabled");
  }
  if (refinement < 2 || refinement % 2 != 0) {
    throw ConfigError("RK4 refinement must be an even number >= 2");
  }
  ref.states = detail::rk4_path(spec, x0, schedule, refinement);
  const auto coarse = detail::rk4_path(spec, x0, schedule, refinement / 2);
  double est = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    est = std::max(est, l2_distance(ref.states[i], coarse[i]) / 15.0);
  }
  ref.rk4_error_estimate = est;
  return ref;
}

/// A reference is usable for a study when its own error is below 1% of the
/// smallest error it is used to measure.
inline bool reference_is_clean(const Reference& ref, double smallest_measured_error) {
  if (ref.exact) return true;
  return ref.rk4_error_estimate < 0.01 * smallest_measured_error;
}

// ---------------------------------------------------------------------------
// Convergence studies

enum class MethodKind { Euler, AB, AM, ABM };

/// AB-k: one call per step. ABM-k: predict-evaluate-correct-evaluate, two
/// calls per step. AM-k: the same corrector in PEC form, where the
/// predicted-state evaluation is kept as the next history value (one call).
struct Method {
  MethodKind kind = MethodKind::AB;
  int order = 1;

  std::string label() const {
    switch (kind) {
      case MethodKind::Euler: return "euler";
      case MethodKind::AB: return "ab" + std::to_string(order);
      case MethodKind::AM: return "am" + std::to_string(order);
      case MethodKind::ABM: return "abm" + std::to_string(order);
    }
    return "?";
  }
};

inline Method parse_method(std::string_view text) {
  auto with_order = [&](std::string_view prefix, MethodKind kind) -> std::optional<Method> {
    if (text.size() != prefix.size() + 1 || text.substr(0, prefix.size()) != prefix) return std::nullopt;
    const char c = text.back();
    if (c < '1' || c > '0' + kMaxOrder) {
      throw UnsupportedOrderError("method '" + std::string(text) + "': order must be 1.." +
                                  std::to_string(kMaxOrder));
    }
    return Method{kind, c - '0'};
  };
  if (text == "euler") return {MethodKind::Euler, 1};
  if (auto m = with_order("abm", MethodKind::ABM)) return *m;
  if (auto m = with_order("ab", MethodKind::AB)) return *m;
  if (auto m = with_order("am", MethodKind::AM)) return *m;
  throw ConfigError("unknown method '" + std::string(text) + "' (euler, ab<k>, am<k>, abm<k>)");
}

struct ConvergenceReport {
  std::string method;
  std::string field;
  std::vector<std::size_t> step_counts;
  std::vector<double> step_sizes;     // strictly decreasing
  std::vector<double> global_errors;  // max over schedule times of ||x_n - x(t_n)||_2
  std::vector<double> final_errors;   // ||x_N - x(t_N)||_2
  std::vector<std::size_t> oracle_calls;
  double slope = 0.0;
  double intercept = 0.0;
  bool valid = true;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of ln(y) on ln(x).
inline LineFit loglog_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("loglog_fit: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw DegenerateRegressionError("loglog_fit: non-positive value; cannot take logarithms");
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw DegenerateRegressionError("loglog_fit: all abscissae equal");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

namespace detail {

// Runs `method` on a uniform grid. The first `order` states come from the
// reference so bootstrap error does not cap the measured order. Returns the
// states at every grid time.
inline std::vector<Vector> run_seeded(const Method& method, OracleHandle& oracle,
                                      const Schedule& schedule, const Reference& ref) {
  const auto& t = schedule.times;
  const std::size_t n_steps = schedule.steps();
  const int k = method.kind == MethodKind::Euler ? 1 : method.order;
  std::vector<Vector> xs;
  xs.reserve(t.size());
  History history(oracle.dim(), kMaxOrder);
  for (int j = 0; j < k; ++j) {
    xs.push_back(ref.states[static_cast<std::size_t>(j)]);
    history.push({t[static_cast<std::size_t>(j)], oracle(xs.back(), t[static_cast<std::size_t>(j)])});
  }
  for (std::size_t n = static_cast<std::size_t>(k) - 1; n < n_steps; ++n) {
    const Interval iv{t[n], t[n + 1]};
    const bool last = n + 1 == n_steps;
    switch (method.kind) {
      case MethodKind::Euler:
      case MethodKind::AB: {
        xs.push_back(ab_step(xs.back(), history, k, iv));
        if (!last) history.push({iv.end, oracle(xs.back(), iv.end)});
        break;
      }
      case MethodKind::ABM: {
        AbmResult r = abm_step(xs.back(), history, k, iv, oracle);
        xs.push_back(std::move(r.x));
        if (!last) history.push({iv.end, oracle(xs.back(), iv.end)});
        break;
      }
      case MethodKind::AM: {
        AbmResult r = abm_step(xs.back(), history, k, iv, oracle);
        xs.push_back(std::move(r.x));
        history.push({iv.end, std::move(r.f_next)});
        break;
      }
    }
  }
  return xs;
}

}  // namespace detail

/// Measures the global-error order of `method` on `spec` over `span`.
inline ConvergenceReport convergence_study(const Method& method, const FieldSpec& spec,
                                           std::span<const double> x0, const Interval& span,
                                           std::span<const std::size_t> step_counts,
                                           ReferenceMode mode = ReferenceMode::Auto) {
  spec.validate();
  if (method.order < 1 || method.order > kMaxOrder) throw UnsupportedOrderError("method order");
  if (step_counts.size() < 3) throw ConfigError("convergence study needs at least 3 step counts");
  const int k = method.kind == MethodKind::Euler ? 1 : method.order;
  for (std::size_t i = 0; i < step_counts.size(); ++i) {
    if (step_counts[i] < static_cast<std::size_t>(2 * k)) {
      throw ConfigError("step count " + std::to_string(step_counts[i]) +
                        " is below twice the method order");
    }
    if (i > 0 && step_counts[i] <= step_counts[i - 1]) {
      throw ConfigError("step counts must be strictly increasing");
    }
  }

  ConvergenceReport rep;
  rep.method = method.label();
  rep.field = spec.name();
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t count : step_counts) {
    const Schedule schedule = Schedule::uniform(span.start, span.end, count);
    const Reference ref = reference_solution(spec, x0, schedule, mode);
    OracleHandle oracle = make_field(spec);
    const auto xs = detail::run_seeded(method, oracle, schedule, ref);
    double global = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) global = std::max(global, l2_distance(xs[i], ref.states[i]));
    rep.step_counts.push_back(count);
    rep.step_sizes.push_back(std::abs(span.width()) / static_cast<double>(count));
    rep.global_errors.push_back(global);
    rep.final_errors.push_back(l2_distance(xs.back(), ref.states.back()));
    rep.oracle_calls.push_back(oracle.calls());
    smallest = std::min(smallest, global);
    if (!reference_is_clean(ref, global)) rep.valid = false;
  }
  if (smallest == 0.0) {
    throw DegenerateRegressionError("method " + rep.method + " is exact on the " + rep.field +
                                    " field; use a field with non-vanishing higher derivatives");
  }
  const LineFit fit = loglog_fit(rep.step_sizes, rep.global_errors);
  rep.slope = fit.slope;
  rep.intercept = fit.intercept;
  return rep;
}

// ---------------------------------------------------------------------------
// Drift

struct DriftReport {
  std::string policy_label;
  std::string field;
  std::vector<double> times;
  std::vector<double> per_step_error;  // ||x_n - x_ref(t_n)||_2 at every schedule time
  double accumulated_drift = 0.0;      // final error
  double max_drift = 0.0;
  std::size_t oracle_calls = 0;
  bool valid = true;
  RunStats stats;
};

inline DriftReport drift_study(const PolicySpec& policy, const FieldSpec& spec,
                               std::span<const double> x0, const Schedule& schedule,
                               ReferenceMode mode = ReferenceMode::Auto) {
  const Reference ref = reference_solution(spec, x0, schedule, mode);
  OracleHandle oracle = make_field(spec);
  SampleResult run = run_policy(policy, x0, schedule, oracle, true);

  DriftReport rep;
  rep.policy_label = policy.label();
  rep.field = spec.name();
  rep.times = schedule.times;
  rep.per_step_error.reserve(schedule.times.size());
  for (std::size_t i = 0; i < schedule.times.size(); ++i) {
    const double e = l2_distance(run.stats.x_trace[i], ref.states[i]);
    rep.per_step_error.push_back(e);
    rep.max_drift = std::max(rep.max_drift, e);
  }
  rep.accumulated_drift = rep.per_step_error.back();
  rep.oracle_calls = run.stats.oracle_calls;
  rep.valid = reference_is_clean(ref, rep.accumulated_drift);
  rep.stats = std::move(run.stats);
  return rep;
}

/// Oracle calls a policy spends on `spec` over `schedule`.
inline std::size_t policy_calls(const PolicySpec& policy, const FieldSpec& spec,
                                std::span<const double> x0, const Schedule& schedule) {
  OracleHandle oracle = make_field(spec);
  return run_policy(policy, x0, schedule, oracle).stats.oracle_calls;
}

inline bool within_budget(std::size_t calls, std::size_t target, double tolerance) {
  const double diff = std::abs(static_cast<double>(calls) - static_cast<double>(target));
  return diff <= tolerance * static_cast<double>(target);
}

/// Scales tau geometrically (factor 0.98 per probe, starting at the policy's
/// tau) toward the call budget. Among the probes whose call count is within
/// `tolerance` of `target_calls`, returns the one closest to the target (the
/// earliest on ties). Other knobs are untouched.
inline std::optional<PolicySpec> calibrate_tau(PolicySpec policy, const FieldSpec& spec,
                                               std::span<const double> x0,
                                               const Schedule& schedule,
                                               std::size_t target_calls,
                                               double tolerance = 0.1) {
  const double tau0 = policy.params.tau;
  const std::size_t start = policy_calls(policy, spec, x0, schedule);
  const bool lower = start < target_calls;  // smaller tau means more calls
  const double factor = lower ? 0.98 : 1.0 / 0.98;
  std::optional<PolicySpec> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 400; ++i) {
    policy.params.tau = tau0 * std::pow(factor, i);
    const std::size_t calls = i == 0 ? start : policy_calls(policy, spec, x0, schedule);
    const double gap = std::abs(static_cast<double>(calls) - static_cast<double>(target_calls));
    if (within_budget(calls, target_calls, tolerance) && gap < best_gap) {
      best = policy;
      best_gap = gap;
    }
    const bool overshot = lower ? calls > target_calls : calls < target_calls;
    if (overshot && !within_budget(calls, target_calls, tolerance)) break;
  }
  return best;
}

/// Interval in [1, max_interval] whose call count is closest to the target.
inline PolicySpec calibrate_interval(PolicySpec policy, const FieldSpec& spec,
                                     std::span<const double> x0, const Schedule& schedule,
                                     std::size_t target_calls, int max_interval = 64) {
  PolicySpec best = policy;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= max_interval; ++i) {
    policy.interval = i;
    const double gap = std::abs(static_cast<double>(policy_calls(policy, spec, x0, schedule)) -
                                static_cast<double>(target_calls));
    if (gap < best_gap) {
      best_gap = gap;
      best = policy;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Call allocation

using DecileProfile = std::array<std::size_t, 10>;

/// Number of computed (oracle-calling) steps whose start time falls in each
/// tenth of the schedule's time span.
inline DecileProfile call_allocation_profile(const RunStats& stats, const Schedule& schedule) {
  DecileProfile out{};
  const double t0 = schedule.front();
  const double span = schedule.back() - t0;
  for (const StepRecord& r : stats.decision_trace) {
    if (!r.computed()) continue;
    const double frac = (r.t - t0) / span;
    const auto bucket = static_cast<std::size_t>(std::clamp(std::floor(frac * 10.0 + 1e-9), 0.0, 9.0));
    ++out[bucket];
  }
  return out;
}

}  // namespace predit
