#pragma once

// Named sampling policies, so studies and the CLI can run any of them from a
// short text label such as "reuse:4" or "abfixed:4:2".

#include <charconv>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "predit/dynamics.hpp"
#include "predit/error.hpp"
#include "predit/oracle.hpp"
#include "predit/sampler.hpp"

namespace predit {

enum class PolicyKind { Euler, Reuse, AbFixed, AbmFixed, PrediT, AbDsm, AbmDsm };

struct PolicySpec {
  PolicyKind kind = PolicyKind::PrediT;
  int interval = 1;         // fixed-interval policies
  int order = 2;            // AbFixed / AbmFixed
  PolicyParams params;      // adaptive policies
  SamplerOptions options;

  std::string label() const {
    switch (kind) {
      case PolicyKind::Euler: return "euler";
      case PolicyKind::Reuse: return "reuse:" + std::to_string(interval);
      case PolicyKind::AbFixed:
        return "abfixed:" + std::to_string(interval) + ":" + std::to_string(order);
      case PolicyKind::AbmFixed:
        return "abmfixed:" + std::to_string(interval) + ":" + std::to_string(order);
      case PolicyKind::PrediT: return "predit";
      case PolicyKind::AbDsm: return "abdsm";
      case PolicyKind::AbmDsm: return "abmdsm";
    }
    return "?";
  }

  bool adaptive() const {
    return kind == PolicyKind::PrediT || kind == PolicyKind::AbDsm || kind == PolicyKind::AbmDsm;
  }
};

namespace detail {

inline int parse_policy_int(std::string_view tok, std::string_view label) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty()) {
    throw ConfigError("policy '" + std::string(label) + "': bad integer '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace detail

/// Parses "euler", "reuse:<i>", "abfixed:<i>[:<k>]", "abmfixed:<i>[:<k>]",
/// "predit", "abdsm", "abmdsm". Adaptive policies take `params`; fixed
/// policies without an explicit order use `params.order`.
inline PolicySpec parse_policy(std::string_view text, const PolicyParams& params = {}) {
  std::vector<std::string_view> parts;
  std::string_view rest = text;
  while (true) {
    const auto c = rest.find(':');
    parts.push_back(rest.substr(0, c));
    if (c == std::string_view::npos) break;
    rest.remove_prefix(c + 1);
  }
  PolicySpec p;
  p.params = params;
  p.order = params.order;
  const std::string_view name = parts[0];
  auto want = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() < lo || parts.size() > hi) {
      throw ConfigError("policy '" + std::string(text) + "': wrong number of fields");
    }
  };
  if (name == "euler") {
    want(1, 1);
    p.kind = PolicyKind::Euler;
  } else if (name == "reuse") {
    want(2, 2);
    p.kind = PolicyKind::Reuse;
    p.interval = detail::parse_policy_int(parts[1], text);
  } else if (name == "abfixed" || name == "abmfixed") {
    want(2, 3);
    p.kind = name == "abfixed" ? PolicyKind::AbFixed : PolicyKind::AbmFixed;
    p.interval = detail::parse_policy_int(parts[1], text);
    if (parts.size() == 3) p.order = detail::parse_policy_int(parts[2], text);
  } else if (name == "predit") {
    want(1, 1);
    p.kind = PolicyKind::PrediT;
  } else if (name == "abdsm") {
    want(1, 1);
    p.kind = PolicyKind::AbDsm;
  } else if (name == "abmdsm") {
    want(1, 1);
    p.kind = PolicyKind::AbmDsm;
  } else {
    throw ConfigError("unknown policy '" + std::string(text) + "'");
  }
  if (p.interval < 1) throw ConfigError("policy '" + std::string(text) + "': interval must be >= 1");
  if (p.order < 1 || p.order > kMaxOrder) {
    throw UnsupportedOrderError("policy '" + std::string(text) + "': unsupported order");
  }
  return p;
}

inline SampleResult run_policy(const PolicySpec& policy, std::span<const double> x_init,
                               const Schedule& schedule, OracleHandle& oracle,
                               bool record_states = false) {
  const BaselineOptions base{record_states};
  SampleResult r;
  switch (policy.kind) {
    case PolicyKind::Euler: r = euler_sample(x_init, schedule, oracle, base); break;
    case PolicyKind::Reuse: r = reuse_sample(x_init, schedule, oracle, policy.interval, base); break;
    case PolicyKind::AbFixed:
      r = ab_fixed_sample(x_init, schedule, oracle, policy.interval, policy.order, base);
      break;
    case PolicyKind::AbmFixed:
      r = abm_fixed_sample(x_init, schedule, oracle, policy.interval, policy.order, base);
      break;
    case PolicyKind::PrediT:
    case PolicyKind::AbDsm:
    case PolicyKind::AbmDsm: {
      SamplerOptions opts = policy.options;
      opts.record_states = record_states;
      opts.variant = policy.kind == PolicyKind::AbDsm    ? Variant::AbOnly
                     : policy.kind == PolicyKind::AbmDsm ? Variant::AbmOnly
                                                         : Variant::PrediT;
      r = sample(x_init, schedule, oracle, policy.params, opts);
      break;
    }
  }
  r.stats.label = policy.label();
  return r;
}

}  // namespace predit
