#pragma once

#include <fstream>

#include <json.hpp>

#include "tsm/experiments.hpp"
#include "tsm/solver.hpp"
#include "tsm/types.hpp"

namespace tsm {

using nlohmann::json;

enum class ExperimentKind { RatioGrid, ErrorSweep, CostHetero, LoadSize };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::RatioGrid: return "ratio-grid";
    case ExperimentKind::ErrorSweep: return "error-sweep";
    case ExperimentKind::CostHetero: return "cost-hetero";
    case ExperimentKind::LoadSize: return "load-size";
  }
  return "?";
}

/// Experiment parameters carried by a scenario file. Only the fields of
/// the named kind are meaningful; the rest keep their defaults.
struct ExperimentBlock {
  ExperimentKind kind = ExperimentKind::RatioGrid;
  // ratio-grid
  SweepSpec sweep;
  // error-sweep / cost-hetero
  int samples = 200;
  std::uint64_t seed = 42;
  double mean = 0.1;
  double variance = 0.025;
  bool variance_is_stddev = false;
  // load-size
  std::vector<double> fractions;
  int points = 25;
};

/// Parsed declarative scenario document.
struct ScenarioFile {
  MarketScenario scenario;
  std::optional<SolverConfig> solver;
  std::optional<ExperimentBlock> experiment;
};

namespace io_detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw invalid_input(std::string("unknown key '") + it.key() + "' in " +
                          where);
  }
}

inline double number(const json& j, const char* key, double fallback,
                     bool* present = nullptr) {
  if (!j.contains(key)) {
    if (present) *present = false;
    return fallback;
  }
  if (present) *present = true;
  if (!j[key].is_number())
    throw invalid_input(std::string("'") + key + "' must be a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v))
    throw invalid_input(std::string("'") + key + "' must be finite");
  return v;
}

inline Policy parse_policy(const std::string& s) {
  if (s == "standard") return Policy::Standard;
  if (s == "rt-mpm") return Policy::RealTimeMpm;
  if (s == "da-mpm") return Policy::DayAheadMpm;
  throw invalid_input("policy must be one of standard | rt-mpm | da-mpm");
}

inline Behavior parse_behavior(const std::string& s) {
  if (s == "price-taking") return Behavior::PriceTaking;
  if (s == "price-anticipating") return Behavior::PriceAnticipating;
  throw invalid_input(
      "behavior must be price-taking | price-anticipating");
}

inline ExperimentKind parse_kind(const std::string& s) {
  if (s == "ratio-grid") return ExperimentKind::RatioGrid;
  if (s == "error-sweep") return ExperimentKind::ErrorSweep;
  if (s == "cost-hetero") return ExperimentKind::CostHetero;
  if (s == "load-size") return ExperimentKind::LoadSize;
  throw invalid_input(
      "experiment kind must be ratio-grid | error-sweep | cost-hetero | "
      "load-size");
}

}  // namespace io_detail

inline SolverConfig parse_solver_config(const json& j) {
  using io_detail::number;
  io_detail::check_keys(j,
                        {"max_outer_iters", "max_inner_iters", "damping",
                         "tol_fixed_point", "line_search_grid", "probe_iters",
                         "force_numeric_load_br"},
                        "solver");
  SolverConfig c;
  c.max_outer_iters = static_cast<int>(number(j, "max_outer_iters", c.max_outer_iters));
  c.max_inner_iters = static_cast<int>(number(j, "max_inner_iters", c.max_inner_iters));
  c.damping = number(j, "damping", c.damping);
  c.tol_fixed_point = number(j, "tol_fixed_point", c.tol_fixed_point);
  c.line_search_grid = static_cast<int>(number(j, "line_search_grid", c.line_search_grid));
  c.probe_iters = static_cast<int>(number(j, "probe_iters", c.probe_iters));
  if (j.contains("force_numeric_load_br")) {
    if (!j["force_numeric_load_br"].is_boolean())
      throw invalid_input("'force_numeric_load_br' must be a boolean");
    c.force_numeric_load_br = j["force_numeric_load_br"].get<bool>();
  }
  c.validate();
  return c;
}

inline ExperimentBlock parse_experiment_block(const json& j) {
  using io_detail::number;
  if (!j.contains("kind") || !j["kind"].is_string())
    throw invalid_input("experiment block needs a string 'kind'");
  ExperimentBlock e;
  e.kind = io_detail::parse_kind(j["kind"].get<std::string>());
  switch (e.kind) {
    case ExperimentKind::RatioGrid: {
      io_detail::check_keys(j,
                            {"kind", "g_min", "g_max", "l_min", "l_max", "cost",
                             "error", "demand", "regimes"},
                            "experiment (ratio-grid)");
      e.sweep.g_min = static_cast<int>(number(j, "g_min", e.sweep.g_min));
      e.sweep.g_max = static_cast<int>(number(j, "g_max", e.sweep.g_max));
      e.sweep.l_min = static_cast<int>(number(j, "l_min", e.sweep.l_min));
      e.sweep.l_max = static_cast<int>(number(j, "l_max", e.sweep.l_max));
      e.sweep.cost = number(j, "cost", e.sweep.cost);
      e.sweep.error = number(j, "error", e.sweep.error);
      e.sweep.demand = number(j, "demand", e.sweep.demand);
      if (j.contains("regimes")) {
        if (!j["regimes"].is_array())
          throw invalid_input("'regimes' must be an array of policy names");
        e.sweep.regimes.clear();
        for (const auto& r : j["regimes"])
          e.sweep.regimes.push_back(
              io_detail::parse_policy(r.get<std::string>()));
      }
      e.sweep.validate();
      break;
    }
    case ExperimentKind::ErrorSweep:
    case ExperimentKind::CostHetero: {
      io_detail::check_keys(j,
                            {"kind", "samples", "seed", "mean", "variance",
                             "variance_is_stddev"},
                            "experiment (sampled study)");
      e.samples = static_cast<int>(number(j, "samples", e.samples));
      e.seed = static_cast<std::uint64_t>(number(j, "seed", static_cast<double>(e.seed)));
      e.mean = number(j, "mean",
                      e.kind == ExperimentKind::CostHetero ? 0.1 : e.mean);
      e.variance = number(j, "variance",
                          e.kind == ExperimentKind::CostHetero ? 0.001 : e.variance);
      if (j.contains("variance_is_stddev")) {
        if (!j["variance_is_stddev"].is_boolean())
          throw invalid_input("'variance_is_stddev' must be a boolean");
        e.variance_is_stddev = j["variance_is_stddev"].get<bool>();
      }
      if (e.samples < 1) throw invalid_input("'samples' must be >= 1");
      if (e.variance < 0.0) throw invalid_input("'variance' must be >= 0");
      break;
    }
    case ExperimentKind::LoadSize: {
      io_detail::check_keys(j, {"kind", "fractions", "points"},
                            "experiment (load-size)");
      if (j.contains("fractions")) {
        if (!j["fractions"].is_array())
          throw invalid_input("'fractions' must be an array of numbers");
        for (const auto& f : j["fractions"]) {
          if (!f.is_number() || !std::isfinite(f.get<double>()))
            throw invalid_input("'fractions' entries must be finite numbers");
          e.fractions.push_back(f.get<double>());
        }
      }
      e.points = static_cast<int>(number(j, "points", e.points));
      if (e.points < 2) throw invalid_input("'points' must be >= 2");
      break;
    }
  }
  return e;
}

inline ScenarioFile parse_scenario_file(const json& j) {
  io_detail::check_keys(
      j, {"generators", "loads", "policy", "behavior", "solver", "experiment"},
      "scenario file");
  if (!j.contains("generators") || !j["generators"].is_array())
    throw invalid_input("scenario file needs a 'generators' array");
  if (!j.contains("loads") || !j["loads"].is_array())
    throw invalid_input("scenario file needs a 'loads' array");
  if (!j.contains("policy") || !j["policy"].is_string())
    throw invalid_input("scenario file needs a string 'policy'");
  if (!j.contains("behavior") || !j["behavior"].is_string())
    throw invalid_input("scenario file needs a string 'behavior'");

  std::vector<GeneratorParams> gens;
  for (const auto& g : j["generators"]) {
    io_detail::check_keys(g, {"c", "eps"}, "generator entry");
    GeneratorParams p;
    bool has_c = false;
    p.c = io_detail::number(g, "c", 0.0, &has_c);
    if (!has_c) throw invalid_input("generator entry needs 'c'");
    p.eps = io_detail::number(g, "eps", 0.0);
    gens.push_back(p);
  }
  std::vector<LoadParams> loads;
  for (const auto& l : j["loads"]) {
    io_detail::check_keys(l, {"d"}, "load entry");
    bool has_d = false;
    LoadParams p{io_detail::number(l, "d", 0.0, &has_d)};
    if (!has_d) throw invalid_input("load entry needs 'd'");
    loads.push_back(p);
  }

  ScenarioFile out{
      MarketScenario(std::move(gens), std::move(loads),
                     io_detail::parse_policy(j["policy"].get<std::string>()),
                     io_detail::parse_behavior(j["behavior"].get<std::string>())),
      std::nullopt, std::nullopt};
  if (j.contains("solver")) out.solver = parse_solver_config(j["solver"]);
  if (j.contains("experiment"))
    out.experiment = parse_experiment_block(j["experiment"]);
  return out;
}

inline ScenarioFile load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw invalid_input(std::string("scenario file is not valid JSON: ") +
                        e.what());
  }
  return parse_scenario_file(j);
}

/// Normalized (defaults materialized, canonical key order) document for a
/// parsed scenario file. Re-parsing the dump yields an identical file.
inline json dump_normalized(const ScenarioFile& f) {
  json j;
  j["generators"] = json::array();
  for (const auto& g : f.scenario.generators())
    j["generators"].push_back({{"c", g.c}, {"eps", g.eps}});
  j["loads"] = json::array();
  for (const auto& l : f.scenario.loads())
    j["loads"].push_back({{"d", l.d}});
  j["policy"] = to_string(f.scenario.policy());
  j["behavior"] = to_string(f.scenario.behavior());
  if (f.solver) {
    j["solver"] = {{"max_outer_iters", f.solver->max_outer_iters},
                   {"max_inner_iters", f.solver->max_inner_iters},
                   {"damping", f.solver->damping},
                   {"tol_fixed_point", f.solver->tol_fixed_point},
                   {"line_search_grid", f.solver->line_search_grid},
                   {"probe_iters", f.solver->probe_iters},
                   {"force_numeric_load_br", f.solver->force_numeric_load_br}};
  }
  if (f.experiment) {
    const auto& e = *f.experiment;
    json je{{"kind", to_string(e.kind)}};
    switch (e.kind) {
      case ExperimentKind::RatioGrid: {
        je["g_min"] = e.sweep.g_min;
        je["g_max"] = e.sweep.g_max;
        je["l_min"] = e.sweep.l_min;
        je["l_max"] = e.sweep.l_max;
        je["cost"] = e.sweep.cost;
        je["error"] = e.sweep.error;
        je["demand"] = e.sweep.demand;
        je["regimes"] = json::array();
        for (Policy p : e.sweep.regimes) je["regimes"].push_back(to_string(p));
        break;
      }
      case ExperimentKind::ErrorSweep:
      case ExperimentKind::CostHetero:
        je["samples"] = e.samples;
        je["seed"] = e.seed;
        je["mean"] = e.mean;
        je["variance"] = e.variance;
        je["variance_is_stddev"] = e.variance_is_stddev;
        break;
      case ExperimentKind::LoadSize:
        if (!e.fractions.empty()) je["fractions"] = e.fractions;
        je["points"] = e.points;
        break;
    }
    j["experiment"] = std::move(je);
  }
  return j;
}

// ---------------------------------------------------------------------------
// JSON emission of results (machine contract of the solve command) and
// JSON-lines study records.
// ---------------------------------------------------------------------------

inline json to_json(const StageAllocation& a) {
  json j;
  if (a.theta_d) j["theta_d"] = *a.theta_d;
  if (a.theta_r) j["theta_r"] = *a.theta_r;
  j["g_d"] = a.g_d;
  j["g_r"] = a.g_r;
  j["d_d"] = a.d_d;
  j["d_r"] = a.d_r;
  j["lambda_d"] = a.lambda_d;
  j["lambda_r"] = a.lambda_r;
  return j;
}

inline json to_json(const ExistenceCondition& c) {
  return {{"kind", c.kind == ExistenceCondition::Kind::MinGenerators
                       ? "min-generators"
                       : "load-count-bound"},
          {"lhs", c.lhs},
          {"rhs", c.rhs},
          {"satisfied", c.satisfied}};
}

inline json to_json(const EquilibriumOutcome& o) {
  json j{{"status", to_string(o.status)}};
  if (!o.detail.empty()) j["detail"] = o.detail;
  if (!o.family.empty()) j["family"] = o.family;
  if (o.condition) j["condition"] = to_json(*o.condition);
  if (o.allocation) j["allocation"] = to_json(*o.allocation);
  return j;
}

inline json to_json(const SettlementReport& r) {
  json j{{"profit", r.profit},
         {"payment", r.payment},
         {"social_cost", r.social_cost},
         {"aggregate_profit", r.aggregate_profit},
         {"aggregate_payment", r.aggregate_payment}};
  if (r.normalized) {
    j["normalized"] = {{"profit", r.normalized->profit},
                       {"payment", r.normalized->payment},
                       {"aggregate_profit", r.normalized->aggregate_profit},
                       {"aggregate_payment", r.normalized->aggregate_payment}};
  }
  return j;
}

inline void write_jsonl(const std::vector<RatioCell>& cells, std::ostream& os) {
  for (const auto& c : cells)
    os << json{{"G", c.G},
               {"L", c.L},
               {"regime", to_string(c.regime)},
               {"exists", c.exists},
               {"norm_profit", c.norm_profit},
               {"norm_payment", c.norm_payment}}
              .dump()
       << '\n';
}

inline void write_jsonl(const ErrorStudy& study, std::ostream& os) {
  for (const auto& r : study.samples)
    os << json{{"sample", r.index},
               {"mean_delta", r.mean_delta},
               {"converged", r.converged},
               {"clamped", r.clamped},
               {"delta", r.delta},
               {"profit", r.net_profit},
               {"norm_profit", r.norm_profit},
               {"aggregate_profit", r.aggregate_profit},
               {"aggregate_payment", r.aggregate_payment}}
              .dump()
       << '\n';
}

inline void write_jsonl(const CostStudy& study, std::ostream& os) {
  for (const auto& r : study.samples)
    os << json{{"sample", r.index},
               {"converged", r.converged},
               {"resampled", r.resampled},
               {"c", r.cost},
               {"profit", r.profit},
               {"norm_profit", r.norm_profit}}
              .dump()
       << '\n';
}

inline void write_jsonl(const std::vector<LoadSizePoint>& points,
                        std::ostream& os) {
  for (const auto& p : points)
    os << json{{"fraction", p.fraction},
               {"d_1", p.d_1},
               {"d_2", p.d_2},
               {"converged", p.converged},
               {"payment_1", p.payment_1},
               {"payment_2", p.payment_2},
               {"norm_payment_1", p.norm_payment_1},
               {"norm_payment_2", p.norm_payment_2},
               {"analytic_norm_1", p.analytic_norm_1},
               {"analytic_norm_2", p.analytic_norm_2},
               {"aggregate_payment", p.aggregate_payment}}
              .dump()
       << '\n';
}

/// Iteration log rows as JSON lines (the trace serialization format).
inline void write_jsonl(const BestResponseTrace& trace, std::ostream& os) {
  for (const auto& row : trace.rows)
    os << json{{"iteration", row.iteration},
               {"phase", row.phase},
               {"values", row.values},
               {"objectives", row.objectives},
               {"lambda_d", row.lambda_d},
               {"lambda_r", row.lambda_r},
               {"metric", row.metric}}
              .dump()
       << '\n';
}

}  // namespace tsm
