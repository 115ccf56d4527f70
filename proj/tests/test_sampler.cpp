#include <gtest/gtest.h>

#include <cmath>

#include "predit/fields.hpp"
#include "predit/policy.hpp"
#include "predit/sampler.hpp"

using namespace predit;

namespace {

PolicyParams params_with_tau(double tau) {
  PolicyParams p;
  p.tau = tau;
  return p;
}

}  // namespace

TEST(Schedule, Construction) {
  const Schedule u = Schedule::uniform(1.0, 0.0, 4);
  EXPECT_EQ(u.steps(), 4u);
  EXPECT_EQ(u.times.front(), 1.0);
  EXPECT_EQ(u.times.back(), 0.0);
  const Schedule c = Schedule::cosine_ramp(0.0, 1.0, 10);
  EXPECT_LT(c.times[1] - c.times[0], c.times[6] - c.times[5]);
  EXPECT_THROW(Schedule({0.0}), ConfigError);
  EXPECT_THROW(Schedule({0.0, 1.0, 1.0}), ConfigError);
  EXPECT_THROW(Schedule::uniform(0.0, 1.0, 0), ConfigError);
}

TEST(Sampler, ConstantFieldExactForAnyParams) {
  const FieldSpec spec = FieldSpec::constant_field({0.5, -2.0});
  const Vector x0{1.0, 1.0};
  for (int order = 1; order <= 4; ++order) {
    for (double tau : {1e-9, 0.5, 2.0, 100.0}) {
      for (const Schedule& s : {Schedule::uniform(0.0, 1.0, 37), Schedule::cosine_ramp(1.0, 0.0, 23)}) {
        PolicyParams p = params_with_tau(tau);
        p.order = order;
        OracleHandle o = make_field(spec);
        const auto r = sample(x0, s, o, p);
        const double span = s.back() - s.front();
        const double w0 = 1.0 + 0.5 * span, w1 = 1.0 - 2.0 * span;
        EXPECT_LE(std::abs(r.x[0] - w0), 1e-10 * std::abs(w0));
        EXPECT_LE(std::abs(r.x[1] - w1), 1e-10 * std::abs(w1));
      }
    }
  }
}

TEST(Sampler, ConstantFieldHandTrace) {
  // Step 0: delta undefined -> forced full ABM (2 calls). Step 1: delta = 0
  // -> AB with J = j_max = 8, so computes land every 9 steps: 1, 10, ..., 46.
  // Step 46 skips to the end of the 50-step schedule.
  OracleHandle o = make_field(FieldSpec::constant_field({1.0}));
  PolicyParams p;  // tau 2, r 0.3, p 1, j_max 8
  const auto r = sample(Vector{0.0}, Schedule::uniform(0.0, 1.0, 50), o, p);
  EXPECT_EQ(r.stats.oracle_calls, 8u);
  EXPECT_EQ(o.calls(), 8u);
  EXPECT_EQ(r.stats.warmup_steps, 1u);
  std::vector<std::size_t> computed;
  for (const auto& rec : r.stats.decision_trace) {
    if (!rec.computed()) continue;
    computed.push_back(rec.index);
    if (rec.index == 0) {
      EXPECT_EQ(rec.branch, Branch::FullAbm);
      EXPECT_EQ(rec.calls, 2);
      EXPECT_FALSE(rec.delta.has_value());
    } else {
      EXPECT_EQ(rec.branch, Branch::AbWithSkip);
      EXPECT_EQ(rec.skip, 8);
      EXPECT_EQ(rec.calls, 1);
      EXPECT_EQ(rec.delta, 0.0);
    }
  }
  EXPECT_EQ(computed, (std::vector<std::size_t>{0, 1, 10, 19, 28, 37, 46}));
  EXPECT_EQ(r.stats.skip_histogram.at(8), 6u);
  EXPECT_EQ(r.stats.decision_trace.size(), 50u);
  // bound: warmup + ceil((N - warmup) / (j_max + 1)) + 1
  EXPECT_LE(r.stats.oracle_calls, 1u + (49u + 8u) / 9u + 1u);
}

TEST(Sampler, FewerCallsAndBetterThanEulerOnDecay) {
  const FieldSpec spec = FieldSpec::linear(1.0);
  const Schedule s = Schedule::uniform(0.0, 1.0, 100);
  OracleHandle o = make_field(spec);
  const auto r = sample(Vector{1.0}, s, o, params_with_tau(2.0));
  OracleHandle oe = make_field(spec);
  const auto e = euler_sample(Vector{1.0}, s, oe);
  const double exact = std::exp(-1.0);
  EXPECT_LT(r.stats.oracle_calls, 100u);
  EXPECT_LT(std::abs(r.x[0] - exact), std::abs(e.x[0] - exact));
}

TEST(Sampler, DegeneratesToPlainAbmForTinyTau) {
  const FieldSpec spec = FieldSpec::linear(1.3, 2);
  const Schedule s = Schedule::uniform(0.0, 1.0, 40);
  for (int order = 1; order <= 4; ++order) {
    PolicyParams p = params_with_tau(1e-12);
    p.order = order;
    OracleHandle o = make_field(spec);
    const auto r = sample(Vector{1.0, -0.5}, s, o, p);
    OracleHandle ob = make_field(spec);
    const auto b = abm_fixed_sample(Vector{1.0, -0.5}, s, ob, 1, order);
    EXPECT_EQ(r.x, b.x) << order;
    EXPECT_EQ(r.stats.oracle_calls, 80u);
    EXPECT_EQ(r.stats.computed_steps(), 40u);
    std::size_t abm_steps = 0;
    for (const auto& rec : r.stats.decision_trace) {
      EXPECT_EQ(rec.branch, Branch::FullAbm);
      if (!rec.warmup) ++abm_steps;
    }
    EXPECT_EQ(r.stats.oracle_calls, r.stats.warmup_calls + 2 * abm_steps);
  }
}

TEST(Sampler, WarmupLastsOrderMinusOneSteps) {
  for (int order = 1; order <= 4; ++order) {
    PolicyParams p;
    p.order = order;
    OracleHandle o = make_field(FieldSpec::linear(1.0));
    const auto r = sample(Vector{1.0}, Schedule::uniform(0.0, 1.0, 30), o, p);
    EXPECT_EQ(r.stats.warmup_steps, static_cast<std::size_t>(order - 1)) << order;
    EXPECT_EQ(r.stats.warmup_calls, 2u * (order - 1));
  }
}

TEST(Sampler, DirectionAgnostic) {
  // dx/dt = -x forward over [0, 1] against dx/dt = x backward over [1, 0].
  const Schedule fwd = Schedule::uniform(0.0, 1.0, 100);
  std::vector<double> rev_times;
  for (double t : fwd.times) rev_times.push_back(1.0 - t);
  const Schedule bwd(rev_times);
  for (double tau : {0.01, 2.0}) {
    OracleHandle a = make_field(FieldSpec::linear(1.0));
    OracleHandle b = make_field(FieldSpec::linear(-1.0));
    const auto ra = sample(Vector{1.0}, fwd, a, params_with_tau(tau));
    const auto rb = sample(Vector{1.0}, bwd, b, params_with_tau(tau));
    const double ea = std::abs(ra.x[0] - std::exp(-1.0));
    const double eb = std::abs(rb.x[0] - std::exp(-1.0));
    EXPECT_NEAR(ea, eb, 1e-12) << tau;
    EXPECT_EQ(ra.stats.oracle_calls, rb.stats.oracle_calls);
  }
}

TEST(Sampler, SkipsNeverExceedCapAndTraceCoversSchedule) {
  for (int jmax : {1, 3, 8, 20}) {
    PolicyParams p;
    p.j_max = jmax;
    OracleHandle o = make_field(FieldSpec::nonuniform());
    const auto r = sample(Vector{0.0}, Schedule::uniform(0.0, 1.0, 77), o, p);
    ASSERT_EQ(r.stats.decision_trace.size(), 77u);
    for (const auto& rec : r.stats.decision_trace) EXPECT_LE(rec.skip, jmax);
    for (const auto& [j, n] : r.stats.skip_histogram) EXPECT_LE(j, jmax);
  }
}

TEST(Sampler, CallAccountingMatchesCounter) {
  const FieldSpec spec = FieldSpec::cosine();
  const Schedule s = Schedule::uniform(0.0, 3.0, 60);
  for (const char* text : {"euler", "reuse:3", "abfixed:3:2", "abmfixed:2:3", "predit", "abdsm", "abmdsm"}) {
    OracleHandle o = make_field(spec);
    (void)o(Vector{0.0}, 0.0);  // pre-existing calls are not attributed to the run
    const auto r = run_policy(parse_policy(text), Vector{0.0}, s, o);
    EXPECT_EQ(r.stats.oracle_calls, o.calls() - 1) << text;
    std::size_t per_step = 0;
    for (const auto& rec : r.stats.decision_trace) per_step += static_cast<std::size_t>(rec.calls);
    EXPECT_EQ(per_step, r.stats.oracle_calls) << text;
  }
}

TEST(Sampler, OracleFailureCarriesStepIndex) {
  const Schedule s = Schedule::uniform(0.0, 1.0, 20);
  auto failing = [&] {
    return OracleHandle(1, [&](std::span<const double> x, double t) -> Vector {
      if (t == s.times[7]) throw std::runtime_error("model exploded");
      return Vector{-x[0]};
    });
  };
  {
    OracleHandle o = failing();
    try {
      (void)euler_sample(Vector{1.0}, s, o);
      FAIL() << "no exception";
    } catch (const OracleFailure& e) {
      EXPECT_EQ(e.step(), 7u);
      EXPECT_EQ(e.cause(), "model exploded");
    }
  }
  {
    // every step is a full ABM step, so the corrector of step 6 is the first
    // evaluation at t_7
    OracleHandle o = failing();
    try {
      (void)sample(Vector{1.0}, s, o, params_with_tau(1e-12));
      FAIL() << "no exception";
    } catch (const OracleFailure& e) {
      EXPECT_EQ(e.step(), 6u);
    }
  }
  {
    PolicyParams p = params_with_tau(1e-12);
    OracleHandle o = failing();
    EXPECT_THROW((void)run_policy(parse_policy("abdsm", p), Vector{1.0}, s, o), OracleFailure);
  }
}

TEST(Sampler, RejectsBadInputs) {
  OracleHandle o = make_field(FieldSpec::linear(1.0, 2));
  EXPECT_THROW(sample(Vector{1.0}, Schedule::uniform(0, 1, 5), o, {}), DimensionError);
  PolicyParams p;
  p.ratio = 0.0;
  EXPECT_THROW(sample(Vector{1.0, 1.0}, Schedule::uniform(0, 1, 5), o, p), ConfigError);
  EXPECT_THROW(reuse_sample(Vector{1.0, 1.0}, Schedule::uniform(0, 1, 5), o, 0), ConfigError);
  EXPECT_THROW(ab_fixed_sample(Vector{1.0, 1.0}, Schedule::uniform(0, 1, 5), o, 2, 5),
               UnsupportedOrderError);
  EXPECT_THROW(sample(Vector{1.0, 1.0}, Schedule{}, o, {}), ConfigError);
}

TEST(Sampler, HistoryAndCoefficientOptions) {
  const Schedule s = Schedule::uniform(0.0, 1.0, 50);
  auto run = [&](const FieldSpec& spec, const PolicyParams& p, SamplerOptions opts) {
    OracleHandle o = make_field(spec);
    return sample(Vector{1.0}, s, o, p, opts);
  };
  SamplerOptions literal;
  literal.literal_history = true;
  SamplerOptions uniform;
  uniform.uniform_coefficients = true;
  const FieldSpec constant = FieldSpec::constant_field({2.0});
  EXPECT_NEAR(run(constant, {}, literal).x[0], 3.0, 1e-12);
  EXPECT_NEAR(run(constant, {}, uniform).x[0], 3.0, 1e-12);

  // The options only matter once a step skips after a correction, so use a
  // fast decay with tau low enough to reach the middle branch.
  PolicyParams p;
  p.tau = 0.5;
  const FieldSpec decay = FieldSpec::linear(5.0);
  const auto base = run(decay, p, {});
  const auto lit = run(decay, p, literal);
  const auto uni = run(decay, p, uniform);
  std::size_t corrected_skips = 0;
  for (const auto& r : base.stats.decision_trace)
    corrected_skips += r.branch == Branch::AbmWithSkip && r.skip > 0;
  EXPECT_GT(corrected_skips, 0u);
  EXPECT_NE(base.x, lit.x);
  EXPECT_NE(base.x, uni.x);
  for (const auto* r : {&base, &lit, &uni}) EXPECT_LT(std::abs(r->x[0] - std::exp(-5.0)), 1e-3);
}

TEST(Sampler, VariantsForceTheirMethod) {
  const Schedule s = Schedule::uniform(0.0, 1.0, 60);
  PolicyParams p = params_with_tau(0.05);
  for (auto [variant, want_calls] : {std::pair{Variant::AbOnly, 1}, std::pair{Variant::AbmOnly, 2}}) {
    OracleHandle o = make_field(FieldSpec::nonuniform());
    SamplerOptions opts;
    opts.variant = variant;
    const auto r = sample(Vector{0.0}, s, o, p, opts);
    for (const auto& rec : r.stats.decision_trace) {
      if (rec.computed() && !rec.warmup && rec.index > 0) EXPECT_EQ(rec.calls, want_calls);
    }
  }
}

TEST(Baselines, Identities) {
  const FieldSpec spec = FieldSpec::linear(0.7, 3);
  const Schedule s = Schedule::cosine_ramp(0.0, 2.0, 33);
  const Vector x0{1.0, -1.0, 0.5};
  OracleHandle a = make_field(spec), b = make_field(spec), c = make_field(spec);
  const auto e = euler_sample(x0, s, a);
  const auto r = reuse_sample(x0, s, b, 1);
  const auto f = ab_fixed_sample(x0, s, c, 1, 1);
  EXPECT_EQ(e.x, r.x);
  EXPECT_EQ(e.x, f.x);
  EXPECT_EQ(e.stats.oracle_calls, 33u);
  EXPECT_EQ(r.stats.oracle_calls, 33u);
}

TEST(Baselines, ExactOnConstantField) {
  const FieldSpec spec = FieldSpec::constant_field({3.0});
  const Schedule s = Schedule::uniform(0.0, 1.0, 25);
  for (const char* text : {"euler", "reuse:4", "abfixed:4:2", "abfixed:3:4", "abmfixed:4:2", "abmfixed:2:3"}) {
    OracleHandle o = make_field(spec);
    EXPECT_NEAR(run_policy(parse_policy(text), Vector{1.0}, s, o).x[0], 4.0, 1e-12) << text;
  }
}

TEST(Baselines, EulerErrorIsFirstOrder) {
  OracleHandle o = make_field(FieldSpec::linear(1.0));
  const auto r = euler_sample(Vector{1.0}, Schedule::uniform(0.0, 1.0, 100), o);
  const double err = std::abs(r.x[0] - std::exp(-1.0));
  // leading term h * e^{-1} / 2
  EXPECT_NEAR(err / 0.01, std::exp(-1.0) / 2.0, 0.01);
}

TEST(Baselines, ReuseDriftsMoreThanFixedAb) {
  const Schedule s = Schedule::uniform(0.0, 1.0, 100);
  OracleHandle a = make_field(FieldSpec::linear(1.0)), b = make_field(FieldSpec::linear(1.0));
  const double er = std::abs(reuse_sample(Vector{1.0}, s, a, 4).x[0] - std::exp(-1.0));
  const double ea = std::abs(ab_fixed_sample(Vector{1.0}, s, b, 4, 2).x[0] - std::exp(-1.0));
  EXPECT_GT(er, ea);
  EXPECT_EQ(a.calls(), 25u);
}

TEST(Baselines, RecordStatesOnRequest) {
  OracleHandle o = make_field(FieldSpec::linear(1.0));
  const Schedule s = Schedule::uniform(0.0, 1.0, 10);
  EXPECT_TRUE(euler_sample(Vector{1.0}, s, o).stats.x_trace.empty());
  const auto r = euler_sample(Vector{1.0}, s, o, BaselineOptions{true});
  ASSERT_EQ(r.stats.x_trace.size(), 11u);
  EXPECT_EQ(r.stats.x_trace.back(), r.x);
}

TEST(Policy, ParseLabels) {
  EXPECT_EQ(parse_policy("reuse:4").label(), "reuse:4");
  EXPECT_EQ(parse_policy("abfixed:4").label(), "abfixed:4:2");
  EXPECT_EQ(parse_policy("abmfixed:2:3").order, 3);
  EXPECT_TRUE(parse_policy("abdsm").adaptive());
  EXPECT_FALSE(parse_policy("euler").adaptive());
  EXPECT_THROW(parse_policy("reuse"), ConfigError);
  EXPECT_THROW(parse_policy("reuse:x"), ConfigError);
  EXPECT_THROW(parse_policy("reuse:0"), ConfigError);
  EXPECT_THROW(parse_policy("magic"), ConfigError);
  EXPECT_THROW(parse_policy("abfixed:2:9"), UnsupportedOrderError);
}
