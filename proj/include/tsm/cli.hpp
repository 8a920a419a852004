#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "tsm/io.hpp"

namespace tsm::cli {

/// Stable exit-code contract of the command line.
enum ExitCode : int {
  kSolved = 0,
  kInputError = 1,
  kNoEquilibrium = 2,
  kNonConvergence = 3,
};

struct SolveFlags {
  std::optional<Policy> policy;
  std::optional<Behavior> behavior;
  bool numeric = false;
  std::string format = "json";  // json | text
  std::string out;              // empty: stdout
  bool dump_normalized = false;
};

struct ExperimentFlags {
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";  // csv | jsonl
  std::string out;             // empty: derived from kind + TSM_OUT_DIR
};

namespace cli_detail {

inline std::string default_out_dir() {
  if (const char* env = std::getenv("TSM_OUT_DIR")) return env;
  return ".";
}

inline void print_text_report(const EquilibriumOutcome& o,
                              const SettlementReport* rep, std::ostream& os) {
  os << "status: " << to_string(o.status) << '\n';
  if (!o.detail.empty()) os << "detail: " << o.detail << '\n';
  if (!o.family.empty()) os << "family: " << o.family << '\n';
  if (o.condition)
    os << "condition: lhs=" << fmt12(o.condition->lhs)
       << " rhs=" << fmt12(o.condition->rhs)
       << (o.condition->satisfied ? " (satisfied)" : " (violated)") << '\n';
  if (!o.allocation) return;
  const auto& a = *o.allocation;
  os << "lambda_d: " << fmt12(a.lambda_d) << "  lambda_r: " << fmt12(a.lambda_r)
     << '\n';
  os << "generator  g_d          g_r          profit\n";
  for (size_t j = 0; j < a.g_d.size(); ++j) {
    os << "  " << j << "        " << fmt12(a.g_d[j]) << "  " << fmt12(a.g_r[j]);
    if (rep) os << "  " << fmt12(rep->profit[j]);
    os << '\n';
  }
  os << "load       d_d          d_r          payment\n";
  for (size_t l = 0; l < a.d_d.size(); ++l) {
    os << "  " << l << "        " << fmt12(a.d_d[l]) << "  " << fmt12(a.d_r[l]);
    if (rep) os << "  " << fmt12(rep->payment[l]);
    os << '\n';
  }
  if (rep)
    os << "social cost: " << fmt12(rep->social_cost)
       << "  aggregate profit: " << fmt12(rep->aggregate_profit)
       << "  aggregate payment: " << fmt12(rep->aggregate_payment) << '\n';
}

inline int emit(const std::string& text, const std::string& out_path,
                std::ostream& os, std::ostream& err) {
  if (out_path.empty()) {
    os << text;
    return kSolved;
  }
  std::ofstream f(out_path);
  if (!f) {
    err << "cannot write " << out_path << '\n';
    return kInputError;
  }
  f << text;
  return kSolved;
}

}  // namespace cli_detail

/// Solves the scenario in `path` with the matching solver: closed form
/// where one applies, the numerical Stackelberg-Nash solver otherwise or
/// when `numeric` is forced. Returns the exit-code contract.
inline int cmd_solve(const std::string& path, const SolveFlags& flags,
                     std::ostream& os = std::cout,
                     std::ostream& err = std::cerr) {
  ScenarioFile file{MarketScenario({GeneratorParams{1.0, 0.0}}, {LoadParams{1.0}},
                                   Policy::Standard, Behavior::PriceTaking),
                    std::nullopt, std::nullopt};
  try {
    file = load_scenario_file(path);
    if (flags.policy) file.scenario = file.scenario.with_policy(*flags.policy);
    if (flags.behavior)
      file.scenario = file.scenario.with_behavior(*flags.behavior);
  } catch (const invalid_input& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  }

  if (flags.dump_normalized)
    return cli_detail::emit(dump_normalized(file).dump(2) + "\n", flags.out, os,
                            err);

  const MarketScenario& s = file.scenario;
  const SolverConfig config = file.solver.value_or(SolverConfig{});

  EquilibriumOutcome outcome;
  std::optional<BestResponseTrace> trace;
  try {
    switch (s.policy()) {
      case Policy::Standard:
        if (s.behavior() == Behavior::PriceTaking) {
          outcome = competitive_standard(s);
        } else if (s.homogeneous_cost()) {
          outcome = nash_standard(s);
        } else {
          err << "input error: the standard market has no closed-form Nash "
                 "equilibrium for heterogeneous costs and the numerical "
                 "solver covers only the day-ahead MPM regime\n";
          return kInputError;
        }
        break;
      case Policy::RealTimeMpm:
        if (s.behavior() == Behavior::PriceTaking) {
          outcome = competitive_rt_mpm(s);
        } else {
          outcome = nash_rt_mpm(s);
          if (flags.numeric) trace = probe_rt_mpm_nonexistence(s, config);
        }
        break;
      case Policy::DayAheadMpm:
        if (s.behavior() == Behavior::PriceTaking) {
          outcome = competitive_da_mpm(s);
        } else if (s.homogeneous() && !flags.numeric) {
          outcome = nash_da_mpm_symmetric(s);
        } else {
          auto [o, t] = solve_stackelberg_nash(s, config);
          outcome = std::move(o);
          trace = std::move(t);
        }
        break;
    }
  } catch (const invalid_input& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const regime_error& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const solver_error& e) {
    err << "solver error: " << e.what() << '\n';
    return kNonConvergence;
  }

  std::optional<SettlementReport> rep;
  if (outcome.allocation) rep = settle(*outcome.allocation, s);

  std::string text;
  if (flags.format == "json") {
    json j{{"scenario", dump_normalized(file)}, {"outcome", to_json(outcome)}};
    if (rep) j["settlement"] = to_json(*rep);
    if (trace)
      j["trace"] = {{"rows", trace->rows.size()},
                    {"converged", trace->converged},
                    {"cycle_detected", trace->cycle_detected},
                    {"rule2_deviation", trace->rule2_deviation},
                    {"detail", trace->detail}};
    text = j.dump(2) + "\n";
  } else {
    std::ostringstream buf;
    cli_detail::print_text_report(outcome, rep ? &*rep : nullptr, buf);
    if (trace && !trace->detail.empty())
      buf << "trace: " << trace->detail << '\n';
    text = buf.str();
  }
  const int emit_rc = cli_detail::emit(text, flags.out, os, err);
  if (emit_rc != kSolved) return emit_rc;

  if (outcome.solved()) return kSolved;
  // Closed-form nonexistence and detected cycles are definitive; an
  // iteration cap is merely a failure to converge.
  if (trace && !trace->cycle_detected && !trace->converged &&
      outcome.status == EquilibriumStatus::NoEquilibrium &&
      outcome.detail.rfind("numerical: outer", 0) == 0)
    return kNonConvergence;
  return kNoEquilibrium;
}

/// Runs one of the named studies and writes its records. Returns the
/// exit-code contract and prints a one-line summary.
inline int cmd_experiment(const std::string& kind_name, const std::string& path,
                          const ExperimentFlags& flags,
                          std::ostream& os = std::cout,
                          std::ostream& err = std::cerr) {
  ExperimentKind kind;
  try {
    kind = io_detail::parse_kind(kind_name);
  } catch (const invalid_input& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  }

  std::optional<ScenarioFile> file;
  try {
    if (!path.empty()) file = load_scenario_file(path);
  } catch (const invalid_input& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  }

  ExperimentBlock block;
  if (file && file->experiment && file->experiment->kind == kind)
    block = *file->experiment;
  else
    block.kind = kind;
  if (kind == ExperimentKind::CostHetero && !(file && file->experiment &&
                                              file->experiment->kind == kind)) {
    block.mean = 0.1;
    block.variance = 0.001;
  }
  if (flags.samples) block.samples = *flags.samples;
  if (flags.seed) block.seed = *flags.seed;

  const MarketScenario base =
      file ? file->scenario : study_base_scenario();
  const SolverConfig config =
      file && file->solver ? *file->solver : SolverConfig{};

  std::string out_path = flags.out;
  if (out_path.empty()) {
    out_path = cli_detail::default_out_dir() + "/" + to_string(kind) +
               (flags.format == "jsonl" ? ".jsonl" : ".csv");
  }

  const auto t0 = std::chrono::steady_clock::now();
  size_t rows = 0;
  int excluded = 0;
  try {
    std::ostringstream buf;
    switch (kind) {
      case ExperimentKind::RatioGrid: {
        const auto cells = ratio_grid(block.sweep);
        rows = cells.size();
        for (const auto& c : cells)
          if (!c.exists) ++excluded;
        if (flags.format == "jsonl")
          write_jsonl(cells, buf);
        else
          write_csv(cells, buf);
        break;
      }
      case ExperimentKind::ErrorSweep: {
        SampleSpec spec{base, SampleTarget::ProportionalError, block.mean,
                        block.variance, block.samples, block.seed,
                        block.variance_is_stddev, config};
        const auto study = error_sensitivity_study(spec);
        rows = study.samples.size();
        excluded = study.nonconverged;
        if (flags.format == "jsonl")
          write_jsonl(study, buf);
        else
          write_csv(study, buf);
        break;
      }
      case ExperimentKind::CostHetero: {
        SampleSpec spec{base, SampleTarget::CostCoefficient, block.mean,
                        block.variance, block.samples, block.seed,
                        block.variance_is_stddev, config};
        const auto study = cost_heterogeneity_study(spec);
        rows = study.samples.size();
        excluded = study.nonconverged;
        if (flags.format == "jsonl")
          write_jsonl(study, buf);
        else
          write_csv(study, buf);
        break;
      }
      case ExperimentKind::LoadSize: {
        std::vector<double> fractions = block.fractions;
        if (fractions.empty()) {
          fractions.reserve(block.points);
          for (int i = 0; i < block.points; ++i)
            fractions.push_back(0.02 +
                                (0.5 - 0.02) * i / (block.points - 1.0));
        }
        const auto points = load_size_study(base, fractions, config);
        rows = points.size();
        for (const auto& p : points)
          if (!p.converged) ++excluded;
        if (flags.format == "jsonl")
          write_jsonl(points, buf);
        else
          write_csv(points, buf);
        break;
      }
    }
    std::ofstream f(out_path);
    if (!f) {
      err << "cannot write " << out_path << '\n';
      return kInputError;
    }
    f << buf.str();
  } catch (const invalid_input& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const solver_error& e) {
    err << "solver error: " << e.what() << '\n';
    return kNonConvergence;
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  os << to_string(kind) << ": " << rows << " rows, " << excluded
     << " excluded (rate " << fmt12(rows ? double(excluded) / rows : 0.0)
     << "), wall " << fmt12(secs) << " s, wrote " << out_path << '\n';
  return kSolved;
}

}  // namespace tsm::cli
