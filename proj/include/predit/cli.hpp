#pragma once

// predit_bench front end: sample, converge, drift, ablate and profile.
//
// Exit codes: 0 success, 1 runtime failure, 2 malformed configuration,
// 3 a study whose reference solution is not accurate enough.

#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "predit/config.hpp"
#include "predit/error_lab.hpp"
#include "predit/policy.hpp"
#include "predit/report.hpp"

namespace predit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvalidStudy = 3;

namespace cli {

inline ojson params_json(const ExperimentConfig& cfg) {
  ojson p = ojson::object();
  for (const auto& k : config_keys()) {
    if (k.name == "csv" || k.name == "json" || k.name == "trace_csv") continue;
    p[k.name] = k.show(cfg);
  }
  return p;
}

inline void emit(const Table& table, const ExperimentConfig& cfg, std::ostream& out) {
  if (cfg.csv.empty()) write_csv(out, table);
  else write_csv_file(cfg.csv, table);
  if (!cfg.json.empty()) write_json_file(cfg.json, table);
}

inline PolicySpec make_policy(const ExperimentConfig& cfg, const std::string& text) {
  PolicySpec p = parse_policy(text, cfg.params);
  p.options = cfg.sampler_options();
  return p;
}

inline std::string histogram_text(const std::map<int, std::size_t>& h) {
  std::string s;
  for (const auto& [j, count] : h) {
    if (!s.empty()) s += ' ';
    s += std::to_string(j) + ':' + std::to_string(count);
  }
  return s;
}

inline Table trace_table(const RunStats& stats, const std::string& study) {
  Table t;
  t.study = study;
  t.method = stats.label;
  t.columns = {"step", "t", "computed", "calls", "delta", "branch", "skip", "warmup"};
  for (const StepRecord& r : stats.decision_trace) {
    t.add_row({r.index, r.t, r.computed(), r.calls, r.delta ? ojson(*r.delta) : ojson(nullptr),
               r.branch ? ojson(to_string(*r.branch)) : ojson(""), r.skip, r.warmup});
  }
  return t;
}

inline int run_sample(const ExperimentConfig& cfg, std::ostream& out) {
  const FieldSpec spec = field_spec(cfg, cfg.field_name());
  const Schedule schedule = make_schedule(cfg);
  const Vector x0 = initial_state(cfg, spec.dim);
  const PolicySpec policy = make_policy(cfg, "predit");
  OracleHandle oracle = make_field(spec);
  const SampleResult run = run_policy(policy, x0, schedule, oracle);

  out << "policy: " << run.stats.label << '\n';
  out << "field: " << spec.name() << '\n';
  out << "steps: " << run.stats.steps_total << '\n';
  out << "oracle_calls: " << run.stats.oracle_calls << '\n';
  out << "computed_steps: " << run.stats.computed_steps() << '\n';
  out << "warmup_steps: " << run.stats.warmup_steps << '\n';
  out << "warmup_calls: " << run.stats.warmup_calls << '\n';
  out << "skip_histogram: " << histogram_text(run.stats.skip_histogram) << '\n';
  int code = kExitOk;
  if (spec.kind != FieldKind::Replay) {
    const Reference ref = reference_solution(spec, x0, schedule);
    const double err = l2_distance(run.x, ref.states.back());
    out << "final_error: " << detail::format_double(err) << '\n';
    out << "reference: " << (ref.exact ? "exact" : "rk4") << '\n';
    if (!reference_is_clean(ref, err)) {
      out << "reference_valid: false\n";
      code = kExitInvalidStudy;
    }
  }
  if (!cfg.csv.empty() || !cfg.json.empty() || !cfg.trace_csv.empty()) {
    Table t = trace_table(run.stats, "sample");
    t.params = params_json(cfg);
    if (!cfg.csv.empty()) write_csv_file(cfg.csv, t);
    if (!cfg.trace_csv.empty()) write_csv_file(cfg.trace_csv, t);
    if (!cfg.json.empty()) write_json_file(cfg.json, t);
  }
  return code;
}

inline int run_converge(const ExperimentConfig& cfg, std::ostream& out) {
  const Method method = parse_method(cfg.method);
  const FieldSpec spec = field_spec(cfg, cfg.field_name());
  const Vector x0 = initial_state(cfg, spec.dim);
  const Interval span{cfg.start_time(), cfg.end_time()};
  const ConvergenceReport rep = convergence_study(method, spec, x0, span, cfg.steps);

  Table t;
  t.study = "converge";
  t.method = rep.method;
  t.params = params_json(cfg);
  t.columns = {"method", "field", "steps", "h", "global_error", "final_error",
               "oracle_calls", "slope", "intercept", "valid"};
  for (std::size_t i = 0; i < rep.step_counts.size(); ++i) {
    t.add_row({rep.method, rep.field, rep.step_counts[i], rep.step_sizes[i], rep.global_errors[i],
               rep.final_errors[i], rep.oracle_calls[i], rep.slope, rep.intercept, rep.valid});
  }
  emit(t, cfg, out);
  return rep.valid ? kExitOk : kExitInvalidStudy;
}

inline int run_drift(const ExperimentConfig& cfg, std::ostream& out) {
  const FieldSpec spec = field_spec(cfg, cfg.field_name());
  const Schedule schedule = make_schedule(cfg);
  const Vector x0 = initial_state(cfg, spec.dim);
  if (cfg.policies.empty()) throw ConfigKeyError("policies", "policies must not be empty");

  std::vector<PolicySpec> policies;
  for (const auto& text : cfg.policies) {
    try {
      policies.push_back(make_policy(cfg, text));
    } catch (const ConfigError& e) {
      throw ConfigKeyError("policies", e.what());
    } catch (const UnsupportedOrderError& e) {
      throw ConfigKeyError("policies", e.what());
    }
  }

  if (cfg.match_budget) {
    const PolicySpec* anchor = nullptr;
    for (const auto& p : policies)
      if (!p.adaptive()) {
        anchor = &p;
        break;
      }
    if (anchor == nullptr) {
      throw ConfigKeyError("match_budget", "match_budget needs at least one fixed-interval policy");
    }
    const std::size_t target = policy_calls(*anchor, spec, x0, schedule);
    for (auto& p : policies) {
      if (!p.adaptive()) continue;
      auto tuned = calibrate_tau(p, spec, x0, schedule, target);
      if (!tuned) {
        throw Error("cannot match " + p.label() + " to a budget of " + std::to_string(target) +
                    " oracle calls by scaling tau");
      }
      p = *tuned;
    }
  }

  Table t;
  t.study = "drift";
  t.method = "policies";
  t.params = params_json(cfg);
  t.columns = {"policy", "field", "tau", "oracle_calls", "final_drift", "max_drift", "valid"};
  Table trace;
  trace.study = "drift_trace";
  trace.method = "policies";
  trace.params = t.params;
  trace.columns = {"policy", "step", "t", "error", "computed"};
  bool valid = true;
  for (const auto& p : policies) {
    const DriftReport rep = drift_study(p, spec, x0, schedule);
    valid = valid && rep.valid;
    t.add_row({rep.policy_label, rep.field, p.adaptive() ? ojson(p.params.tau) : ojson(nullptr),
               rep.oracle_calls, rep.accumulated_drift, rep.max_drift, rep.valid});
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
      const bool computed = i < rep.stats.decision_trace.size() && rep.stats.decision_trace[i].computed();
      trace.add_row({rep.policy_label, i, rep.times[i], rep.per_step_error[i], computed});
    }
  }
  emit(t, cfg, out);
  if (!cfg.trace_csv.empty()) write_csv_file(cfg.trace_csv, trace);
  return valid ? kExitOk : kExitInvalidStudy;
}

/// The grid roles in fixed order.
inline std::vector<std::pair<std::string, std::string>> ablation_policies(const ExperimentConfig& cfg) {
  const std::string i = std::to_string(cfg.interval);
  const std::string k = std::to_string(cfg.params.order);
  return {{"reuse", "reuse:" + i},
          {"ab_only", "abfixed:" + i + ":" + k},
          {"ab_dsm", "abdsm"},
          {"abm_only", "abmfixed:" + i + ":" + k},
          {"abm_dsm", "abmdsm"},
          {"predit", "predit"}};
}

inline int run_ablate(const ExperimentConfig& cfg, std::ostream& out) {
  if (cfg.fields.empty()) throw ConfigKeyError("fields", "fields must not be empty");
  const Schedule schedule = make_schedule(cfg);
  Table t;
  t.study = "ablate";
  t.method = "grid";
  t.params = params_json(cfg);
  t.columns = {"field", "variant", "policy", "oracle_calls", "final_error", "max_error", "valid"};
  bool valid = true;
  for (const auto& name : cfg.fields) {
    const FieldSpec spec = field_spec(cfg, name);
    const Vector x0 = initial_state(cfg, spec.dim);
    for (const auto& [role, text] : ablation_policies(cfg)) {
      const DriftReport rep = drift_study(make_policy(cfg, text), spec, x0, schedule);
      valid = valid && rep.valid;
      t.add_row({rep.field, role, rep.policy_label, rep.oracle_calls, rep.accumulated_drift,
                 rep.max_drift, rep.valid});
    }
  }
  emit(t, cfg, out);
  return valid ? kExitOk : kExitInvalidStudy;
}

inline int run_profile(const ExperimentConfig& cfg, std::ostream& out) {
  const FieldSpec spec = field_spec(cfg, cfg.field_name());
  const Schedule schedule = make_schedule(cfg);
  const Vector x0 = initial_state(cfg, spec.dim);
  const PolicySpec policy = make_policy(cfg, "predit");
  OracleHandle oracle = make_field(spec);
  const SampleResult run = run_policy(policy, x0, schedule, oracle);
  const DecileProfile prof = call_allocation_profile(run.stats, schedule);

  Table t;
  t.study = "profile";
  t.method = policy.label();
  t.params = params_json(cfg);
  t.columns = {"decile", "t_start", "t_end", "computed_steps"};
  const double t0 = schedule.front();
  const double span = schedule.back() - t0;
  for (std::size_t d = 0; d < prof.size(); ++d) {
    t.add_row({d, t0 + span * static_cast<double>(d) / 10.0,
               t0 + span * static_cast<double>(d + 1) / 10.0, prof[d]});
  }
  emit(t, cfg, out);
  if (!cfg.trace_csv.empty()) write_csv_file(cfg.trace_csv, trace_table(run.stats, "profile_trace"));
  return kExitOk;
}

struct Subcommand {
  Experiment experiment;
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::pair<const ConfigKey*, CLI::Option*>> options;
  std::map<std::string, std::string> values;
};

inline const char* describe(Experiment e) {
  switch (e) {
    case Experiment::Sample: return "Run the adaptive sampler once and print its call statistics";
    case Experiment::Converge: return "Measure the global-error order of a multistep method";
    case Experiment::Drift: return "Compare accumulated drift of sampling policies on one field";
    case Experiment::Ablate: return "Run the policy ablation grid over several fields";
    case Experiment::Profile: return "Count full-compute steps per tenth of the schedule";
  }
  return "";
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Multistep feature forecasting benchmark harness", "predit_bench"};
  app.require_subcommand(1, 1);
  app.footer("Exit codes: 0 ok, 1 runtime error, 2 bad configuration, 3 reference not accurate enough.");

  std::vector<std::unique_ptr<cli::Subcommand>> subs;
  for (Experiment e : {Experiment::Sample, Experiment::Converge, Experiment::Drift,
                       Experiment::Ablate, Experiment::Profile}) {
    auto sub = std::make_unique<cli::Subcommand>();
    sub->experiment = e;
    sub->app = app.add_subcommand(to_string(e), cli::describe(e));
    ExperimentConfig defaults;
    defaults.experiment = e;
    sub->app->add_option("--config", sub->config_path,
                         "key=value config file; flags given here override it");
    for (const ConfigKey& key : config_keys()) {
      std::string flag = "--" + key.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      const std::string shown = key.show(defaults);
      const std::string help = key.help + " (default: " + (shown.empty() ? "none" : shown) + ")";
      CLI::Option* opt = key.is_flag ? sub->app->add_flag(flag, help)
                                     : sub->app->add_option(flag, sub->values[key.name], help)->type_name("VALUE");
      sub->options.emplace_back(&key, opt);
    }
    subs.push_back(std::move(sub));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  cli::Subcommand* chosen = nullptr;
  for (auto& s : subs)
    if (s->app->parsed()) chosen = s.get();

  try {
    ExperimentConfig cfg;
    cfg.experiment = chosen->experiment;
    if (!chosen->config_path.empty()) apply_config_file(cfg, chosen->config_path);
    for (const auto& [key, opt] : chosen->options) {
      if (opt->count() == 0) continue;
      apply_key(cfg, key->name, key->is_flag ? "true" : chosen->values[key->name]);
    }
    validate_config(cfg);
    switch (cfg.experiment) {
      case Experiment::Sample: return cli::run_sample(cfg, out);
      case Experiment::Converge: return cli::run_converge(cfg, out);
      case Experiment::Drift: return cli::run_drift(cfg, out);
      case Experiment::Ablate: return cli::run_ablate(cfg, out);
      case Experiment::Profile: return cli::run_profile(cfg, out);
    }
  } catch (const ConfigKeyError& e) {
    err << "error: config key '" << e.key() << "': " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedOrderError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

/// Convenience overload; `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"predit_bench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace predit
