#pragma once

// Relative change rate of consecutive model outputs, the skip length it
// implies, and the three-way step decision built on both.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "predit/error.hpp"
#include "predit/multistep.hpp"
#include "predit/vector_ops.hpp"

namespace predit {

struct PolicyParams {
  int order = 2;
  double tau = 2.0;        // change-rate threshold
  double ratio = 0.3;      // correction ratio r in (0, 1)
  int sensitivity = 1;     // exponent p
  double epsilon = 1e-8;
  int j_max = 8;

  void validate() const {
    if (order < 1 || order > kMaxOrder) {
      throw UnsupportedOrderError("policy order " + std::to_string(order) + " outside 1.." +
                                  std::to_string(kMaxOrder));
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("ratio must lie in (0, 1)");
    if (sensitivity < 0) throw ConfigError("sensitivity must be non-negative");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
    if (j_max < 1) throw ConfigError("j_max must be at least 1");
  }
};

enum class Branch { FullAbm, AbmWithSkip, AbWithSkip };

inline const char* to_string(Branch b) noexcept {
  switch (b) {
    case Branch::FullAbm: return "full_abm";
    case Branch::AbmWithSkip: return "abm_skip";
    case Branch::AbWithSkip: return "ab_skip";
  }
  return "?";
}

struct StepDecision {
  Branch branch = Branch::FullAbm;
  int skip = 0;

  friend bool operator==(const StepDecision&, const StepDecision&) = default;
};

/// ||f_n - f_prev||_1 / (||f_n||_1 + epsilon)
inline double change_rate(std::span<const double> f_n, std::span<const double> f_prev,
                          double epsilon) {
  require_same_dim(f_n, f_prev, "change_rate");
  return l1_distance(f_n, f_prev) / (l1_norm(f_n) + epsilon);
}

/// floor(tau / (delta + epsilon)^(1/(p+1))), capped at j_max.
inline int skip_interval(double delta, const PolicyParams& params) {
  if (!(delta >= 0.0)) throw ConfigError("change rate must be non-negative");
  if (std::isinf(delta)) return 0;
  const double root = std::pow(delta + params.epsilon, 1.0 / (params.sensitivity + 1.0));
  const double raw = std::floor(params.tau / root);
  if (!(raw < static_cast<double>(params.j_max))) return params.j_max;
  return static_cast<int>(raw);
}

/// delta >= tau: full ABM; tau*r <= delta < tau: ABM then skip; otherwise AB
/// then skip.
inline StepDecision decide(double delta, const PolicyParams& params) {
  if (!(delta >= 0.0)) throw ConfigError("change rate must be non-negative");
  if (delta >= params.tau) return {Branch::FullAbm, 0};
  if (delta >= params.tau * params.ratio) {
    return {Branch::AbmWithSkip, skip_interval(delta, params)};
  }
  return {Branch::AbWithSkip, skip_interval(delta, params)};
}

}  // namespace predit
