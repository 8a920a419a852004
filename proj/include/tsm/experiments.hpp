#pragma once

#include <cstdio>
#include <ostream>

#include "tsm/closed_form.hpp"
#include "tsm/rng.hpp"
#include "tsm/solver.hpp"

namespace tsm {

/// Formats a double with 12 significant digits (the record contract).
inline std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// The §-style base case used by the studies: five generators at cost
/// 0.1, two loads of 99.4 and 199.6 MW, day-ahead MPM, strategic bidding.
inline MarketScenario study_base_scenario() {
  return MarketScenario(
      std::vector<GeneratorParams>(5, GeneratorParams{0.1, 0.0}),
      {LoadParams{99.4}, LoadParams{199.6}}, Policy::DayAheadMpm,
      Behavior::PriceAnticipating);
}

// ---------------------------------------------------------------------------
// Participant-count ratio grid
// ---------------------------------------------------------------------------

struct SweepSpec {
  int g_min = 4, g_max = 20;
  int l_min = 1;
  int l_max = 0;  // 0: up to G-3 per column
  double cost = 1.0;
  double error = 0.1;
  double demand = 1.0;
  std::vector<Policy> regimes = {Policy::DayAheadMpm, Policy::Standard};

  void validate() const {
    if (g_min < 3 || g_max < g_min) throw invalid_input("sweep: bad G range");
    if (l_min < 1) throw invalid_input("sweep: bad L range");
    if (cost <= 0.0 || error < 0.0 || demand <= 0.0)
      throw invalid_input("sweep: bad fixed parameters");
    if (regimes.empty()) throw invalid_input("sweep: no regimes");
    for (Policy p : regimes)
      if (p == Policy::RealTimeMpm)
        throw invalid_input("sweep: rt-mpm has no Nash table to compare");
  }
};

/// One grid cell: Nash aggregates normalized by the competitive ones, or
/// NaN when the symmetric Nash equilibrium does not exist there.
struct RatioCell {
  int G = 0, L = 0;
  Policy regime = Policy::Standard;
  bool exists = false;
  double norm_profit = std::numeric_limits<double>::quiet_NaN();
  double norm_payment = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<RatioCell> ratio_grid(const SweepSpec& spec) {
  spec.validate();
  std::vector<RatioCell> cells;
  for (int G = spec.g_min; G <= spec.g_max; ++G) {
    const int l_hi = spec.l_max > 0 ? std::min(spec.l_max, G - 3) : G - 3;
    for (int L = spec.l_min; L <= l_hi; ++L) {
      for (Policy regime : spec.regimes) {
        RatioCell cell;
        cell.G = G;
        cell.L = L;
        cell.regime = regime;
        MarketScenario s(
            std::vector<GeneratorParams>(G, {spec.cost, spec.error}),
            std::vector<LoadParams>(L, {spec.demand / L}), regime,
            Behavior::PriceAnticipating);
        bool exists = G >= 3;
        if (regime == Policy::DayAheadMpm)
          exists = exists &&
                   load_count_condition(G, L, spec.cost, spec.error).satisfied;
        cell.exists = exists;
        if (exists) {
          const AggregateTable t = aggregate_tables(s);
          cell.norm_profit = t.ne_profit / t.ce_profit;
          cell.norm_payment = t.ne_payment / t.ce_payment;
        }
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Monte-Carlo studies
// ---------------------------------------------------------------------------

enum class SampleTarget { CostCoefficient, ProportionalError };

struct SampleSpec {
  MarketScenario base;
  SampleTarget target = SampleTarget::ProportionalError;
  double mean = 0.1;
  double variance = 0.025;
  int count = 200;
  std::uint64_t seed = 42;
  // The dispersion figures in the source studies are ambiguous between
  // variance and standard deviation; default reads them as variance.
  bool variance_is_stddev = false;
  SolverConfig solver;

  void validate() const {
    if (variance < 0.0) throw invalid_input("sample spec: variance must be >= 0");
    if (count < 1) throw invalid_input("sample spec: count must be >= 1");
    solver.validate();
  }
  double stddev() const {
    return variance_is_stddev ? variance : std::sqrt(variance);
  }
};

/// One draw of the cost-estimation-error study: proportional errors
/// δ_j ~ N(mean, var) clamped at zero, ε_j = δ_j·c_j, then a full
/// Stackelberg-Nash solve settled against the competitive benchmark.
struct ErrorSample {
  int index = 0;
  std::vector<double> delta;
  double mean_delta = 0.0;
  int clamped = 0;
  bool converged = false;
  std::vector<double> net_profit;
  std::vector<double> norm_profit;
  double aggregate_profit = std::numeric_limits<double>::quiet_NaN();
  double aggregate_payment = std::numeric_limits<double>::quiet_NaN();
};

struct ErrorStudy {
  std::vector<ErrorSample> samples;  // sorted by mean delta
  int nonconverged = 0;
  int clamped_draws = 0;
};

inline ErrorStudy error_sensitivity_study(const SampleSpec& spec) {
  spec.validate();
  if (spec.target != SampleTarget::ProportionalError)
    throw invalid_input("error_sensitivity_study: target must be the "
                        "proportional error");
  const double sd = spec.stddev();
  const int G = spec.base.num_generators();

  ErrorStudy study;
  study.samples.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(i));
    ErrorSample rec;
    rec.index = i;
    auto gens = spec.base.generators();
    for (int j = 0; j < G; ++j) {
      double delta = rng.gaussian(spec.mean, sd);
      if (delta < 0.0) {  // errors are non-negative by assumption
        delta = 0.0;
        ++rec.clamped;
      }
      rec.delta.push_back(delta);
      rec.mean_delta += delta / G;
      gens[j].eps = delta * gens[j].c;
    }
    study.clamped_draws += rec.clamped;

    const MarketScenario ne_scenario = spec.base.with_generators(gens)
                                           .with_policy(Policy::DayAheadMpm)
                                           .with_behavior(Behavior::PriceAnticipating);
    const auto [outcome, trace] = solve_stackelberg_nash(ne_scenario, spec.solver);
    if (outcome.solved()) {
      rec.converged = true;
      const MarketScenario ce_scenario =
          ne_scenario.with_behavior(Behavior::PriceTaking);
      const auto ce = competitive_da_mpm(ce_scenario);
      const SettlementReport bench = settle(*ce.allocation, ce_scenario);
      const SettlementReport rep =
          settle(*outcome.allocation, ne_scenario, &bench);
      rec.net_profit = rep.profit;
      rec.norm_profit = rep.normalized->profit;
      rec.aggregate_profit = rep.aggregate_profit;
      rec.aggregate_payment = rep.aggregate_payment;
    } else {
      ++study.nonconverged;
    }
    study.samples.push_back(std::move(rec));
  }

  std::stable_sort(study.samples.begin(), study.samples.end(),
                   [](const ErrorSample& a, const ErrorSample& b) {
                     return a.mean_delta < b.mean_delta;
                   });
  return study;
}

/// One draw of the cost-heterogeneity study: c_j ~ N(mean, var) with
/// non-positive draws rejected and resampled, ε = 0, full numerical
/// solve, settlement against the competitive benchmark.
struct CostSample {
  int index = 0;
  std::vector<double> cost;
  int resampled = 0;
  bool converged = false;
  std::vector<double> profit;
  std::vector<double> norm_profit;
};

struct CostStudy {
  std::vector<CostSample> samples;
  int nonconverged = 0;
  int resampled_draws = 0;
};

inline CostStudy cost_heterogeneity_study(const SampleSpec& spec) {
  spec.validate();
  if (spec.target != SampleTarget::CostCoefficient)
    throw invalid_input("cost_heterogeneity_study: target must be the cost "
                        "coefficient");
  const double sd = spec.stddev();
  const int G = spec.base.num_generators();

  CostStudy study;
  study.samples.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(i));
    CostSample rec;
    rec.index = i;
    auto gens = spec.base.generators();
    for (int j = 0; j < G; ++j) {
      double c = rng.gaussian(spec.mean, sd);
      int guard = 0;
      while (c <= 0.0) {  // cost coefficients must be positive
        c = rng.gaussian(spec.mean, sd);
        ++rec.resampled;
        if (++guard > 1000)
          throw solver_error("cost study: cannot draw a positive coefficient");
      }
      rec.cost.push_back(c);
      gens[j].c = c;
      gens[j].eps = 0.0;
    }
    study.resampled_draws += rec.resampled;

    const MarketScenario ne_scenario = spec.base.with_generators(gens)
                                           .with_policy(Policy::DayAheadMpm)
                                           .with_behavior(Behavior::PriceAnticipating);
    const auto [outcome, trace] = solve_stackelberg_nash(ne_scenario, spec.solver);
    if (outcome.solved()) {
      rec.converged = true;
      const MarketScenario ce_scenario =
          ne_scenario.with_behavior(Behavior::PriceTaking);
      const auto ce = competitive_da_mpm(ce_scenario);
      const SettlementReport bench = settle(*ce.allocation, ce_scenario);
      const SettlementReport rep =
          settle(*outcome.allocation, ne_scenario, &bench);
      rec.profit = rep.profit;
      rec.norm_profit = rep.normalized->profit;
    } else {
      ++study.nonconverged;
    }
    study.samples.push_back(std::move(rec));
  }
  return study;
}

// ---------------------------------------------------------------------------
// Load-size diversity
// ---------------------------------------------------------------------------

/// One re-split of the fixed total demand across the two loads.
struct LoadSizePoint {
  double fraction = 0.0;  // d_1 / d
  double d_1 = 0.0, d_2 = 0.0;
  bool converged = false;
  double payment_1 = std::numeric_limits<double>::quiet_NaN();
  double payment_2 = std::numeric_limits<double>::quiet_NaN();
  double norm_payment_1 = std::numeric_limits<double>::quiet_NaN();
  double norm_payment_2 = std::numeric_limits<double>::quiet_NaN();
  // Closed-form normalized-payment ratio for homogeneous generators.
  double analytic_norm_1 = std::numeric_limits<double>::quiet_NaN();
  double analytic_norm_2 = std::numeric_limits<double>::quiet_NaN();
  double aggregate_payment = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<LoadSizePoint> load_size_study(
    const MarketScenario& base, std::span<const double> d1_fractions,
    const SolverConfig& config = {}) {
  if (base.num_loads() != 2)
    throw invalid_input("load_size_study: base scenario must have two loads");
  const double d = base.total_demand();
  const int G = base.num_generators();
  const int L = 2;

  std::vector<LoadSizePoint> points;
  points.reserve(d1_fractions.size());
  for (double f : d1_fractions) {
    if (!(f > 0.0 && f < 1.0))
      throw invalid_input("load_size_study: fractions must lie in (0, 1)");
    LoadSizePoint p;
    p.fraction = f;
    p.d_1 = f * d;
    p.d_2 = d - p.d_1;

    const MarketScenario ne_scenario =
        base.with_loads({LoadParams{p.d_1}, LoadParams{p.d_2}})
            .with_policy(Policy::DayAheadMpm)
            .with_behavior(Behavior::PriceAnticipating);
    const auto [outcome, trace] = solve_stackelberg_nash(ne_scenario, config);
    if (outcome.solved()) {
      p.converged = true;
      const MarketScenario ce_scenario =
          ne_scenario.with_behavior(Behavior::PriceTaking);
      const auto ce = competitive_da_mpm(ce_scenario);
      const SettlementReport bench = settle(*ce.allocation, ce_scenario);
      const SettlementReport rep =
          settle(*outcome.allocation, ne_scenario, &bench);
      p.payment_1 = rep.payment[0];
      p.payment_2 = rep.payment[1];
      p.norm_payment_1 = rep.normalized->payment[0];
      p.norm_payment_2 = rep.normalized->payment[1];
      p.aggregate_payment = rep.aggregate_payment;
    }
    if (base.homogeneous()) {
      const double gm1 = G - 1.0, gm2 = G - 2.0, lp1 = L + 1.0;
      auto ratio = [&](double dl) {
        return gm1 / gm2 * (1.0 - 1.0 / (lp1 * lp1) * gm1 / gm2 * d / dl);
      };
      p.analytic_norm_1 = ratio(p.d_1);
      p.analytic_norm_2 = ratio(p.d_2);
    }
    points.push_back(p);
  }
  return points;
}

// ---------------------------------------------------------------------------
// Record emission: CSV with a fixed column order, JSON lines alternative
// ---------------------------------------------------------------------------

inline void write_csv(const std::vector<RatioCell>& cells, std::ostream& os) {
  os << "G,L,regime,exists,norm_profit,norm_payment\n";
  for (const auto& c : cells)
    os << c.G << ',' << c.L << ',' << to_string(c.regime) << ','
       << (c.exists ? 1 : 0) << ',' << fmt12(c.norm_profit) << ','
       << fmt12(c.norm_payment) << '\n';
}

inline void write_csv(const ErrorStudy& study, std::ostream& os) {
  if (study.samples.empty()) return;
  const size_t G = study.samples.front().delta.size();
  os << "sample,mean_delta,converged,clamped";
  for (size_t j = 0; j < G; ++j) os << ",delta_" << j;
  for (size_t j = 0; j < G; ++j) os << ",profit_" << j;
  for (size_t j = 0; j < G; ++j) os << ",norm_profit_" << j;
  os << ",aggregate_profit,aggregate_payment\n";
  for (const auto& r : study.samples) {
    os << r.index << ',' << fmt12(r.mean_delta) << ',' << (r.converged ? 1 : 0)
       << ',' << r.clamped;
    for (size_t j = 0; j < G; ++j) os << ',' << fmt12(r.delta[j]);
    for (size_t j = 0; j < G; ++j)
      os << ',' << fmt12(r.converged ? r.net_profit[j]
                                     : std::numeric_limits<double>::quiet_NaN());
    for (size_t j = 0; j < G; ++j)
      os << ',' << fmt12(r.converged ? r.norm_profit[j]
                                     : std::numeric_limits<double>::quiet_NaN());
    os << ',' << fmt12(r.aggregate_profit) << ',' << fmt12(r.aggregate_payment)
       << '\n';
  }
}

inline void write_csv(const CostStudy& study, std::ostream& os) {
  if (study.samples.empty()) return;
  const size_t G = study.samples.front().cost.size();
  os << "sample,converged,resampled";
  for (size_t j = 0; j < G; ++j) os << ",c_" << j;
  for (size_t j = 0; j < G; ++j) os << ",profit_" << j;
  for (size_t j = 0; j < G; ++j) os << ",norm_profit_" << j;
  os << '\n';
  for (const auto& r : study.samples) {
    os << r.index << ',' << (r.converged ? 1 : 0) << ',' << r.resampled;
    for (size_t j = 0; j < G; ++j) os << ',' << fmt12(r.cost[j]);
    for (size_t j = 0; j < G; ++j)
      os << ',' << fmt12(r.converged ? r.profit[j]
                                     : std::numeric_limits<double>::quiet_NaN());
    for (size_t j = 0; j < G; ++j)
      os << ',' << fmt12(r.converged ? r.norm_profit[j]
                                     : std::numeric_limits<double>::quiet_NaN());
    os << '\n';
  }
}

inline void write_csv(const std::vector<LoadSizePoint>& points,
                      std::ostream& os) {
  os << "fraction,d_1,d_2,converged,payment_1,payment_2,norm_payment_1,"
        "norm_payment_2,analytic_norm_1,analytic_norm_2,aggregate_payment\n";
  for (const auto& p : points)
    os << fmt12(p.fraction) << ',' << fmt12(p.d_1) << ',' << fmt12(p.d_2)
       << ',' << (p.converged ? 1 : 0) << ',' << fmt12(p.payment_1) << ','
       << fmt12(p.payment_2) << ',' << fmt12(p.norm_payment_1) << ','
       << fmt12(p.norm_payment_2) << ',' << fmt12(p.analytic_norm_1) << ','
       << fmt12(p.analytic_norm_2) << ',' << fmt12(p.aggregate_payment)
       << '\n';
}

}  // namespace tsm
