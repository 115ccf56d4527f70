#pragma once

// Sampling loops: the adaptive predictor-corrector sampler and the fixed
// baselines it is compared against (Euler, zero-order reuse, fixed-interval
// AB, fixed-interval ABM).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "predit/dynamics.hpp"
#include "predit/error.hpp"
#include "predit/multistep.hpp"
#include "predit/oracle.hpp"
#include "predit/vector_ops.hpp"

namespace predit {

/// Strictly monotone time grid t_0 .. t_N, N >= 1. Either direction.
struct Schedule {
  std::vector<double> times;

  Schedule() = default;
  explicit Schedule(std::vector<double> t) : times(std::move(t)) { validate(); }

  static Schedule uniform(double t_start, double t_end, std::size_t steps) {
    if (steps == 0) throw ConfigError("schedule needs at least one step");
    std::vector<double> t(steps + 1);
    const double h = (t_end - t_start) / static_cast<double>(steps);
    for (std::size_t i = 0; i <= steps; ++i) t[i] = t_start + h * static_cast<double>(i);
    t.back() = t_end;
    return Schedule(std::move(t));
  }

  /// Half-cosine spacing: fine steps near both ends, coarse in the middle.
  static Schedule cosine_ramp(double t_start, double t_end, std::size_t steps) {
    if (steps == 0) throw ConfigError("schedule needs at least one step");
    std::vector<double> t(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      const double s =
          0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(steps)));
      t[i] = t_start + (t_end - t_start) * s;
    }
    t.front() = t_start;
    t.back() = t_end;
    return Schedule(std::move(t));
  }

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  double front() const { return times.front(); }
  double back() const { return times.back(); }

  void validate() const {
    if (times.size() < 2) throw ConfigError("schedule needs at least two times");
    for (double t : times)
      if (!std::isfinite(t)) throw ConfigError("schedule time is not finite");
    const bool up = times[1] > times[0];
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (up ? !(times[i] > times[i - 1]) : !(times[i] < times[i - 1])) {
        throw ConfigError("schedule times are not strictly monotone");
      }
    }
  }
};

/// One schedule step as the sampler executed it.
struct StepRecord {
  std::size_t index = 0;
  double t = 0.0;
  std::optional<double> delta;   // only on computed steps after the first
  std::optional<Branch> branch;  // adaptive sampler computed steps only
  int skip = 0;                  // skip length set by this step
  int calls = 0;                 // oracle calls spent on this step
  bool warmup = false;

  bool computed() const noexcept { return calls > 0; }
};

struct RunStats {
  std::string label;
  std::size_t oracle_calls = 0;
  std::size_t steps_total = 0;
  std::size_t warmup_steps = 0;
  std::size_t warmup_calls = 0;
  std::map<int, std::size_t> skip_histogram;  // skip length J -> decisions
  std::vector<StepRecord> decision_trace;
  std::vector<Vector> x_trace;  // state at every schedule time when recorded

  std::size_t computed_steps() const {
    return static_cast<std::size_t>(std::count_if(decision_trace.begin(), decision_trace.end(),
                                                  [](const StepRecord& r) { return r.computed(); }));
  }
};

struct SampleResult {
  Vector x;
  RunStats stats;
};

/// Which step method each decided branch uses. `AbOnly` and `AbmOnly` keep
/// the skip lengths from the dynamics decision but force one method.
enum class Variant { PrediT, AbOnly, AbmOnly };

struct SamplerOptions {
  Variant variant = Variant::PrediT;
  /// Keep only the step-start evaluations in the history, dropping the
  /// corrector's evaluation at the step end.
  bool literal_history = false;
  /// Treat history nodes as uniformly spaced at the current step width
  /// instead of using their true times.
  bool uniform_coefficients = false;
  bool record_states = false;
};

namespace detail {

inline Vector evaluate_at_step(OracleHandle& oracle, std::span<const double> x, double t,
                               std::size_t step) {
  try {
    return oracle(x, t);
  } catch (const OracleFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw OracleFailure(step, e.what());
  }
}

// History view with node times replaced by t_start, t_start - h, ... so the
// kernels produce the fixed uniform-grid coefficients.
inline History uniform_view(const History& h, int order, const Interval& iv) {
  History out(h.dim(), h.capacity());
  const double w = iv.width();
  for (int j = order - 1; j >= 0; --j) {
    out.push({iv.start - w * j, h[static_cast<std::size_t>(j)].f});
  }
  return out;
}

inline Vector ab_advance(std::span<const double> x, const History& h, int order,
                         const Interval& iv, bool uniform) {
  if (!uniform) return ab_step(x, h, order, iv);
  return ab_step(x, uniform_view(h, order, iv), order, iv);
}

template <class Oracle>
AbmResult abm_advance(std::span<const double> x, const History& h, int order,
                      const Interval& iv, bool uniform, Oracle& oracle) {
  if (!uniform) return abm_step(x, h, order, iv, oracle);
  return abm_step(x, uniform_view(h, order, iv), order, iv, oracle);
}

inline void check_inputs(std::span<const double> x_init, const Schedule& schedule,
                         const OracleHandle& oracle) {
  schedule.validate();
  if (x_init.size() != oracle.dim()) {
    throw DimensionError("initial state has dimension " + std::to_string(x_init.size()) +
                         ", oracle expects " + std::to_string(oracle.dim()));
  }
}

inline void record_state(RunStats& stats, bool enabled, std::span<const double> x) {
  if (enabled) stats.x_trace.emplace_back(x.begin(), x.end());
}

}  // namespace detail

/// Adaptive sampler: each computed step measures the change rate of the
/// model output, picks full ABM / ABM then skip / AB then skip, and skipped
/// steps extrapolate from the cached history with zero oracle calls.
///
/// Warm-up: until the history holds `order` samples every step is a forced
/// full ABM step at the order the history supports.
inline SampleResult sample(std::span<const double> x_init, const Schedule& schedule,
                           OracleHandle& oracle, const PolicyParams& params,
                           const SamplerOptions& options = {}) {
  params.validate();
  detail::check_inputs(x_init, schedule, oracle);

  const auto& t = schedule.times;
  const std::size_t n_steps = schedule.steps();
  const std::size_t calls_before = oracle.calls();

  SampleResult out;
  RunStats& stats = out.stats;
  stats.label = "predit";
  stats.steps_total = n_steps;
  stats.decision_trace.reserve(n_steps);

  Vector x(x_init.begin(), x_init.end());
  History history(x.size(), kMaxOrder);
  std::optional<Vector> last_f;
  int skip_remaining = 0;
  detail::record_state(stats, options.record_states, x);

  for (std::size_t n = 0; n < n_steps; ++n) {
    const Interval iv{t[n], t[n + 1]};
    StepRecord rec;
    rec.index = n;
    rec.t = t[n];

    if (skip_remaining > 0) {
      const int k = std::min<int>(params.order, static_cast<int>(history.size()));
      x = detail::ab_advance(x, history, k, iv, options.uniform_coefficients);
      --skip_remaining;
      rec.skip = skip_remaining;
      stats.decision_trace.push_back(rec);
      detail::record_state(stats, options.record_states, x);
      continue;
    }

    const std::size_t step_calls_before = oracle.calls();
    Vector f_n = detail::evaluate_at_step(oracle, x, t[n], n);
    const double delta = last_f ? change_rate(f_n, *last_f, params.epsilon)
                                : std::numeric_limits<double>::infinity();
    if (last_f) rec.delta = delta;
    last_f = f_n;
    history.push_or_replace({t[n], std::move(f_n)});

    const bool warmup = history.size() < static_cast<std::size_t>(params.order);
    const int k = std::min<int>(params.order, static_cast<int>(history.size()));
    const StepDecision decision = warmup ? StepDecision{Branch::FullAbm, 0} : decide(delta, params);

    bool use_abm = decision.branch != Branch::AbWithSkip;
    if (!warmup && options.variant == Variant::AbOnly) use_abm = false;
    if (options.variant == Variant::AbmOnly) use_abm = true;

    if (use_abm) {
      auto eval = [&](std::span<const double> xs, double ts) {
        return detail::evaluate_at_step(oracle, xs, ts, n);
      };
      AbmResult r = detail::abm_advance(x, history, k, iv, options.uniform_coefficients, eval);
      x = std::move(r.x);
      if (!options.literal_history) history.push_or_replace({iv.end, std::move(r.f_next)});
    } else {
      x = detail::ab_advance(x, history, k, iv, options.uniform_coefficients);
    }
    skip_remaining = decision.skip;

    rec.branch = decision.branch;
    rec.skip = decision.skip;
    rec.warmup = warmup;
    rec.calls = static_cast<int>(oracle.calls() - step_calls_before);
    if (warmup) {
      ++stats.warmup_steps;
      stats.warmup_calls += static_cast<std::size_t>(rec.calls);
    }
    ++stats.skip_histogram[decision.skip];
    stats.decision_trace.push_back(rec);
    detail::record_state(stats, options.record_states, x);
  }

  stats.oracle_calls = oracle.calls() - calls_before;
  out.x = std::move(x);
  return out;
}

struct BaselineOptions {
  bool record_states = false;
};

/// Forward Euler, one oracle call per step.
inline SampleResult euler_sample(std::span<const double> x_init, const Schedule& schedule,
                                 OracleHandle& oracle, const BaselineOptions& options = {}) {
  detail::check_inputs(x_init, schedule, oracle);
  const auto& t = schedule.times;
  const std::size_t calls_before = oracle.calls();
  SampleResult out;
  out.stats.label = "euler";
  out.stats.steps_total = schedule.steps();
  Vector x(x_init.begin(), x_init.end());
  detail::record_state(out.stats, options.record_states, x);
  for (std::size_t n = 0; n < schedule.steps(); ++n) {
    const Vector f = detail::evaluate_at_step(oracle, x, t[n], n);
    axpy(t[n + 1] - t[n], f, x);
    out.stats.decision_trace.push_back({n, t[n], std::nullopt, std::nullopt, 0, 1, false});
    ++out.stats.skip_histogram[0];
    detail::record_state(out.stats, options.record_states, x);
  }
  out.stats.oracle_calls = oracle.calls() - calls_before;
  out.x = std::move(x);
  return out;
}

/// Zero-order caching: evaluate every `interval` steps, advance every step
/// with an Euler increment of the most recent (possibly stale) output.
inline SampleResult reuse_sample(std::span<const double> x_init, const Schedule& schedule,
                                 OracleHandle& oracle, int interval,
                                 const BaselineOptions& options = {}) {
  if (interval < 1) throw ConfigError("reuse interval must be at least 1");
  detail::check_inputs(x_init, schedule, oracle);
  const auto& t = schedule.times;
  const std::size_t calls_before = oracle.calls();
  SampleResult out;
  out.stats.label = "reuse:" + std::to_string(interval);
  out.stats.steps_total = schedule.steps();
  Vector x(x_init.begin(), x_init.end());
  Vector cached;
  detail::record_state(out.stats, options.record_states, x);
  for (std::size_t n = 0; n < schedule.steps(); ++n) {
    StepRecord rec{n, t[n], std::nullopt, std::nullopt, 0, 0, false};
    if (n % static_cast<std::size_t>(interval) == 0) {
      cached = detail::evaluate_at_step(oracle, x, t[n], n);
      rec.calls = 1;
      rec.skip = interval - 1;
      ++out.stats.skip_histogram[interval - 1];
    }
    axpy(t[n + 1] - t[n], cached, x);
    out.stats.decision_trace.push_back(rec);
    detail::record_state(out.stats, options.record_states, x);
  }
  out.stats.oracle_calls = oracle.calls() - calls_before;
  out.x = std::move(x);
  return out;
}

/// Fixed-interval AB prediction: evaluate every `interval` steps, advance
/// every step with AB over the cached history (order ramps up while the
/// history fills).
inline SampleResult ab_fixed_sample(std::span<const double> x_init, const Schedule& schedule,
                                    OracleHandle& oracle, int interval, int order,
                                    const BaselineOptions& options = {}) {
  if (interval < 1) throw ConfigError("AB interval must be at least 1");
  detail::check_order(order);
  detail::check_inputs(x_init, schedule, oracle);
  const auto& t = schedule.times;
  const std::size_t calls_before = oracle.calls();
  SampleResult out;
  out.stats.label = "abfixed:" + std::to_string(interval) + ":" + std::to_string(order);
  out.stats.steps_total = schedule.steps();
  Vector x(x_init.begin(), x_init.end());
  History history(x.size(), kMaxOrder);
  detail::record_state(out.stats, options.record_states, x);
  std::size_t since_compute = static_cast<std::size_t>(interval);
  for (std::size_t n = 0; n < schedule.steps(); ++n) {
    StepRecord rec{n, t[n], std::nullopt, std::nullopt, 0, 0, false};
    const bool warmup = history.size() < static_cast<std::size_t>(order);
    if (warmup || since_compute >= static_cast<std::size_t>(interval)) {
      history.push({t[n], detail::evaluate_at_step(oracle, x, t[n], n)});
      since_compute = 0;
      rec.calls = 1;
      rec.skip = warmup ? 0 : interval - 1;
      rec.warmup = warmup;
      if (warmup) {
        ++out.stats.warmup_steps;
        ++out.stats.warmup_calls;
      }
      ++out.stats.skip_histogram[rec.skip];
    }
    ++since_compute;
    const int k = std::min<int>(order, static_cast<int>(history.size()));
    x = ab_step(x, history, k, Interval{t[n], t[n + 1]});
    out.stats.decision_trace.push_back(rec);
    detail::record_state(out.stats, options.record_states, x);
  }
  out.stats.oracle_calls = oracle.calls() - calls_before;
  out.x = std::move(x);
  return out;
}

/// Fixed-interval ABM: every `interval`-th step is a full predictor-corrector
/// step (two calls); the steps in between extrapolate with AB. With
/// interval = 1 this is a plain ABM integration.
inline SampleResult abm_fixed_sample(std::span<const double> x_init, const Schedule& schedule,
                                     OracleHandle& oracle, int interval, int order,
                                     const BaselineOptions& options = {}) {
  if (interval < 1) throw ConfigError("ABM interval must be at least 1");
  detail::check_order(order);
  detail::check_inputs(x_init, schedule, oracle);
  const auto& t = schedule.times;
  const std::size_t calls_before = oracle.calls();
  SampleResult out;
  out.stats.label = "abmfixed:" + std::to_string(interval) + ":" + std::to_string(order);
  out.stats.steps_total = schedule.steps();
  Vector x(x_init.begin(), x_init.end());
  History history(x.size(), kMaxOrder);
  detail::record_state(out.stats, options.record_states, x);
  std::size_t since_compute = static_cast<std::size_t>(interval);
  for (std::size_t n = 0; n < schedule.steps(); ++n) {
    const Interval iv{t[n], t[n + 1]};
    StepRecord rec{n, t[n], std::nullopt, std::nullopt, 0, 0, false};
    const bool due = since_compute >= static_cast<std::size_t>(interval);
    if (due || history.size() < static_cast<std::size_t>(order)) {
      const std::size_t before = oracle.calls();
      history.push_or_replace({t[n], detail::evaluate_at_step(oracle, x, t[n], n)});
      const int k = std::min<int>(order, static_cast<int>(history.size()));
      const bool warmup = k < order;
      since_compute = 0;
      auto eval = [&](std::span<const double> xs, double ts) {
        return detail::evaluate_at_step(oracle, xs, ts, n);
      };
      AbmResult r = abm_step(x, history, k, iv, eval);
      x = std::move(r.x);
      history.push_or_replace({iv.end, std::move(r.f_next)});
      rec.calls = static_cast<int>(oracle.calls() - before);
      rec.skip = warmup ? 0 : interval - 1;
      rec.warmup = warmup;
      if (warmup) {
        ++out.stats.warmup_steps;
        out.stats.warmup_calls += static_cast<std::size_t>(rec.calls);
      }
      ++out.stats.skip_histogram[rec.skip];
    } else {
      const int k = std::min<int>(order, static_cast<int>(history.size()));
      x = ab_step(x, history, k, iv);
    }
    ++since_compute;
    out.stats.decision_trace.push_back(rec);
    detail::record_state(out.stats, options.record_states, x);
  }
  out.stats.oracle_calls = oracle.calls() - calls_before;
  out.x = std::move(x);
  return out;
}

}  // namespace predit
