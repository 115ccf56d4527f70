#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "predit/error_lab.hpp"

using namespace predit;

namespace {

const std::vector<std::size_t> kCounts{40, 80, 160, 320};

ConvergenceReport converge(const std::string& method) {
  return convergence_study(parse_method(method), FieldSpec::cosine(), Vector{0.0},
                           Interval{0.0, std::numbers::pi}, kCounts);
}

}  // namespace

TEST(Reference, ClosedForms) {
  const Schedule s = Schedule::uniform(0.0, 1.0, 10);
  const Reference lin = reference_solution(FieldSpec::linear(1.0), Vector{1.0}, s);
  EXPECT_TRUE(lin.exact);
  EXPECT_NEAR(lin.states.back()[0], 0.3678794412, 1e-10);
  const Reference c = reference_solution(FieldSpec::constant_field({2.0, -1.0}), Vector{1.0, 1.0}, s);
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    EXPECT_DOUBLE_EQ(c.states[i][0], 1.0 + 2.0 * s.times[i]);
    EXPECT_DOUBLE_EQ(c.states[i][1], 1.0 - s.times[i]);
  }
}

TEST(Reference, Rk4MatchesExactCosine) {
  const Schedule s = Schedule::uniform(0.0, std::numbers::pi, 40);
  const auto exact = reference_solution(FieldSpec::cosine(), Vector{0.0}, s);
  const auto rk4 = reference_solution(FieldSpec::cosine(), Vector{0.0}, s, ReferenceMode::Rk4);
  EXPECT_FALSE(rk4.exact);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    worst = std::max(worst, std::abs(rk4.states[i][0] - exact.states[i][0]));
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_LT(rk4.rk4_error_estimate, 1e-10);
}

TEST(Reference, Rk4OnStateDependentField) {
  const Schedule s = Schedule::uniform(0.0, 1.0, 20);
  const auto rk4 = reference_solution(FieldSpec::linear(2.0), Vector{1.0}, s, ReferenceMode::Rk4);
  EXPECT_NEAR(rk4.states.back()[0], std::exp(-2.0), 1e-12);
}

TEST(Reference, ReplayNeedsFallback) {
  RecordedTrajectory tr;
  tr.times = {0.0, 1.0};
  tr.values = {{1.0}, {3.0}};
  const FieldSpec spec = FieldSpec::replay(tr, Interpolation::Linear);
  const Schedule s = Schedule::uniform(0.0, 1.0, 4);
  EXPECT_THROW(reference_solution(spec, Vector{0.0}, s, ReferenceMode::ExactOnly), ConfigError);
  const auto r = reference_solution(spec, Vector{0.0}, s);
  EXPECT_NEAR(r.states.back()[0], 2.0, 1e-12);  // integral of 1 + 2t
}

TEST(Reference, Hygiene) {
  Reference r;
  r.rk4_error_estimate = 1e-8;
  EXPECT_TRUE(reference_is_clean(r, 1e-5));
  EXPECT_FALSE(reference_is_clean(r, 1e-6));
  r.exact = true;
  EXPECT_TRUE(reference_is_clean(r, 0.0));
}

TEST(Fit, LogLogRecoversPowerLaw) {
  const std::vector<double> h{0.1, 0.05, 0.025, 0.0125};
  std::vector<double> e;
  for (double x : h) e.push_back(3.0 * x * x * x);
  const LineFit f = loglog_fit(h, e);
  EXPECT_NEAR(f.slope, 3.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_THROW(loglog_fit(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 2.0}),
               DegenerateRegressionError);
  EXPECT_THROW(loglog_fit(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 2.0}),
               DegenerateRegressionError);
}

TEST(Methods, ParseAndLabel) {
  EXPECT_EQ(parse_method("euler").label(), "euler");
  EXPECT_EQ(parse_method("ab3").kind, MethodKind::AB);
  EXPECT_EQ(parse_method("am2").kind, MethodKind::AM);
  EXPECT_EQ(parse_method("abm4").order, 4);
  EXPECT_THROW(parse_method("ab5"), Error);
  EXPECT_THROW(parse_method("rk4"), ConfigError);
}

TEST(Convergence, EulerAndAdamsBashforthOrders) {
  const auto e = converge("euler");
  EXPECT_GE(e.slope, 0.75);
  EXPECT_LE(e.slope, 1.25);
  const auto ab2 = converge("ab2");
  EXPECT_GE(ab2.slope, 1.75);
  EXPECT_LE(ab2.slope, 2.25);
  const auto ab4 = converge("ab4");
  EXPECT_GE(ab4.slope, 3.7);
  EXPECT_LE(ab4.slope, 4.3);
  EXPECT_TRUE(ab4.valid);
  EXPECT_EQ(ab2.oracle_calls.front(), 40u);
}

TEST(Convergence, CorrectorRaisesTheOrder) {
  for (int k = 1; k <= 4; ++k) {
    const auto ab = converge("ab" + std::to_string(k));
    const auto abm = converge("abm" + std::to_string(k));
    EXPECT_GT(abm.slope, ab.slope) << k;
    EXPECT_EQ(abm.oracle_calls.back(), 2 * 320u + 1 - static_cast<std::size_t>(k)) << k;
  }
}

TEST(Convergence, GlobalErrorShrinksMonotonically) {
  const auto r = converge("am3");
  for (std::size_t i = 1; i < r.global_errors.size(); ++i) {
    EXPECT_LT(r.global_errors[i], r.global_errors[i - 1]);
    EXPECT_LT(r.step_sizes[i], r.step_sizes[i - 1]);
  }
  EXPECT_GE(r.slope, 2.5);
}

TEST(Convergence, Preconditions) {
  const Method ab2 = parse_method("ab2");
  const Interval span{0.0, 1.0};
  EXPECT_THROW(convergence_study(ab2, FieldSpec::cosine(), Vector{0.0}, span, std::vector<std::size_t>{10, 20}),
               ConfigError);
  EXPECT_THROW(convergence_study(ab2, FieldSpec::cosine(), Vector{0.0}, span, std::vector<std::size_t>{3, 20, 40}),
               ConfigError);
  EXPECT_THROW(convergence_study(ab2, FieldSpec::cosine(), Vector{0.0}, span, std::vector<std::size_t>{40, 20, 80}),
               ConfigError);
  // A zero field leaves every state untouched: nothing to regress.
  EXPECT_THROW(convergence_study(ab2, FieldSpec::constant_field({0.0}), Vector{1.0}, span, kCounts),
               DegenerateRegressionError);
}

TEST(Drift, EulerDriftIsSmallAndGrows) {
  const auto r = drift_study(parse_policy("euler"), FieldSpec::cosine(), Vector{0.0},
                             Schedule::uniform(0.0, 1.0, 200));
  EXPECT_LT(r.max_drift, 5e-3);
  EXPECT_EQ(r.per_step_error.front(), 0.0);
  EXPECT_GT(r.per_step_error[100], r.per_step_error[10]);
  EXPECT_EQ(r.oracle_calls, 200u);
  EXPECT_TRUE(r.valid);
}

TEST(Drift, OrderingAtMatchedInterval) {
  const FieldSpec spec = FieldSpec::linear(1.0);
  const Schedule s = Schedule::uniform(0.0, 1.0, 100);
  for (int i : {2, 4}) {
    const std::string is = std::to_string(i);
    const auto reuse = drift_study(parse_policy("reuse:" + is), spec, Vector{1.0}, s);
    const auto ab = drift_study(parse_policy("abfixed:" + is + ":2"), spec, Vector{1.0}, s);
    const auto abm = drift_study(parse_policy("abmfixed:" + is + ":2"), spec, Vector{1.0}, s);
    EXPECT_GT(reuse.accumulated_drift, ab.accumulated_drift) << i;
    EXPECT_GT(ab.accumulated_drift, abm.accumulated_drift) << i;
  }
}

TEST(Calibration, TauLandsInsideTheBudget) {
  const FieldSpec spec = FieldSpec::linear(1.0);
  const Schedule s = Schedule::uniform(0.0, 1.0, 100);
  for (std::size_t target : {20u, 26u, 40u}) {
    const auto tuned = calibrate_tau(parse_policy("predit"), spec, Vector{1.0}, s, target);
    ASSERT_TRUE(tuned.has_value()) << target;
    EXPECT_TRUE(within_budget(policy_calls(*tuned, spec, Vector{1.0}, s), target, 0.1));
    EXPECT_EQ(tuned->params.ratio, 0.3);
  }
  EXPECT_FALSE(calibrate_tau(parse_policy("predit"), spec, Vector{1.0}, s, 5000).has_value());
}

TEST(Calibration, IntervalClosestToBudget) {
  const FieldSpec spec = FieldSpec::cosine();
  const Schedule s = Schedule::uniform(0.0, 1.0, 100);
  const PolicySpec p = calibrate_interval(parse_policy("abfixed:1:2"), spec, Vector{0.0}, s, 25);
  EXPECT_EQ(p.interval, 4);
}

TEST(Profile, ConstantFieldSpacing) {
  OracleHandle o = make_field(FieldSpec::constant_field({1.0}));
  PolicyParams p;
  const Schedule s = Schedule::uniform(0.0, 1.0, 50);
  const auto r = sample(Vector{0.0}, s, o, p);
  std::vector<std::size_t> idx;
  for (const auto& rec : r.stats.decision_trace)
    if (rec.computed() && !rec.warmup) idx.push_back(rec.index);
  for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_EQ(idx[i] - idx[i - 1], 9u);
  const DecileProfile prof = call_allocation_profile(r.stats, s);
  std::size_t total = 0;
  for (auto c : prof) total += c;
  EXPECT_EQ(total, r.stats.computed_steps());
}

TEST(Profile, TinyTauFillsEveryDecile) {
  OracleHandle o = make_field(FieldSpec::nonuniform());
  PolicyParams p;
  p.tau = 1e-12;
  const Schedule s = Schedule::uniform(0.0, 1.0, 100);
  const auto r = sample(Vector{0.0}, s, o, p);
  for (auto c : call_allocation_profile(r.stats, s)) EXPECT_EQ(c, 10u);
}

TEST(Profile, BackwardScheduleBucketsByFraction) {
  OracleHandle o = make_field(FieldSpec::linear(-1.0));
  const Schedule s = Schedule::uniform(1.0, 0.0, 20);
  const auto r = euler_sample(Vector{1.0}, s, o);
  for (auto c : call_allocation_profile(r.stats, s)) EXPECT_EQ(c, 2u);
}
