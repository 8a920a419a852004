#pragma once

#include "tsm/market.hpp"
#include "tsm/types.hpp"

namespace tsm {

/// G ≥ 3 requirement shared by both symmetric Nash equilibria.
inline ExistenceCondition min_generator_condition(int G) {
  ExistenceCondition c;
  c.kind = ExistenceCondition::Kind::MinGenerators;
  c.lhs = static_cast<double>(G);
  c.rhs = 3.0;
  c.satisfied = G >= 3;
  return c;
}

/// Load-count bound for the symmetric Nash equilibrium under a day-ahead
/// MPM policy: 1/L > (c − ε(G−2)) / ((c+ε)(G−2)), strictly. Requires
/// G ≥ 3 so the bound is well defined.
inline ExistenceCondition load_count_condition(int G, int L, double c,
                                               double eps) {
  ExistenceCondition cond;
  cond.kind = ExistenceCondition::Kind::LoadCountBound;
  cond.lhs = 1.0 / static_cast<double>(L);
  cond.rhs = (c - eps * (G - 2)) / ((c + eps) * (G - 2));
  cond.satisfied = cond.lhs > cond.rhs;
  return cond;
}

namespace detail {

inline void require(bool ok, const char* msg) {
  if (!ok) throw regime_error(msg);
}

inline double common_cost(const MarketScenario& s) {
  require(s.homogeneous_cost(),
          "heterogeneous generator costs: symmetric closed form does not "
          "apply, use the numerical solver");
  return s.generators().front().c;
}

inline double common_error(const MarketScenario& s) {
  require(s.homogeneous_error(),
          "heterogeneous estimation errors: symmetric closed form does not "
          "apply, use the numerical solver");
  return s.generators().front().eps;
}

}  // namespace detail

/// Competitive equilibrium of the standard market (no mitigation).
/// Equal prices d / Σc⁻¹ in both stages; total per-generator output
/// solves the planner problem. The family is indexed by any split
/// θ_j^d + θ_j^r = c_j⁻¹ (both non-negative) and any per-load split;
/// the canonical representative settles everything day-ahead.
inline EquilibriumOutcome competitive_standard(const MarketScenario& s) {
  detail::require(s.policy() == Policy::Standard,
                  "competitive_standard: scenario policy is not standard");
  detail::require(s.behavior() == Behavior::PriceTaking,
                  "competitive_standard: scenario behavior is not price-taking");

  const double d = s.total_demand();
  const double lambda = d / s.sum_inverse_cost();

  StageAllocation a;
  a.lambda_d = lambda;
  a.lambda_r = lambda;
  std::vector<double> theta_d, theta_r;
  for (const auto& g : s.generators()) {
    theta_d.push_back(1.0 / g.c);
    theta_r.push_back(0.0);
    a.g_d.push_back(lambda / g.c);
    a.g_r.push_back(0.0);
  }
  a.theta_d = std::move(theta_d);
  a.theta_r = std::move(theta_r);
  for (const auto& l : s.loads()) {
    a.d_d.push_back(l.d);
    a.d_r.push_back(0.0);
  }

  EquilibriumOutcome out;
  out.status = EquilibriumStatus::NonUniqueFamily;
  out.allocation = std::move(a);
  out.family =
      "any theta_d + theta_r = 1/c_j with both non-negative, any per-load "
      "stage split; canonical representative settles all quantity day-ahead";
  return out;
}

/// Unique Nash equilibrium of the standard market for homogeneous
/// generators and at least three firms.
inline EquilibriumOutcome nash_standard(const MarketScenario& s) {
  detail::require(s.policy() == Policy::Standard,
                  "nash_standard: scenario policy is not standard");
  detail::require(s.behavior() == Behavior::PriceAnticipating,
                  "nash_standard: scenario behavior is not price-anticipating");
  const double c = detail::common_cost(s);

  const int G = s.num_generators();
  const int L = s.num_loads();
  EquilibriumOutcome out;
  out.condition = min_generator_condition(G);
  if (!out.condition->satisfied) {
    out.status = EquilibriumStatus::ConditionViolated;
    out.detail = "Nash equilibrium in the standard market requires at least "
                 "three generators";
    return out;
  }

  const double d = s.total_demand();
  const double gm1 = G - 1.0, gm2 = G - 2.0;
  const double theta_d = (L * gm1 + 1.0) / (L * gm1) * gm2 / gm1 / c;
  const double theta_r = 1.0 / (L + 1.0) * (gm2 * gm2) / (gm1 * gm1) / c;
  const double dl_d = (L * gm1 + 1.0) / (L * (L + 1.0) * gm1) * d;
  const double lambda_r = gm1 / gm2 * c / G * d;
  const double lambda_d = L / (L + 1.0) * lambda_r;

  StageAllocation a;
  a.lambda_d = lambda_d;
  a.lambda_r = lambda_r;
  a.theta_d = std::vector<double>(G, theta_d);
  a.theta_r = std::vector<double>(G, theta_r);
  a.g_d.assign(G, theta_d * lambda_d);
  a.g_r.assign(G, theta_r * lambda_r);
  for (const auto& l : s.loads()) {
    a.d_d.push_back(dl_d);
    a.d_r.push_back(l.d - dl_d);
  }

  out.status = EquilibriumStatus::Unique;
  out.allocation = std::move(a);
  return out;
}

/// Competitive equilibrium under a real-time MPM policy: the operator
/// dispatches real-time from default bids, so prices settle at
/// d / Σ(c+ε)⁻¹ in both stages and total outputs follow the default-bid
/// proportions (inefficient whenever some ε > 0). Day-ahead slopes and
/// the load split are free; the canonical representative settles all
/// quantity day-ahead, leaving the real-time stage to inherit the
/// day-ahead price.
inline EquilibriumOutcome competitive_rt_mpm(const MarketScenario& s) {
  detail::require(s.policy() == Policy::RealTimeMpm,
                  "competitive_rt_mpm: scenario policy is not rt-mpm");
  detail::require(s.behavior() == Behavior::PriceTaking,
                  "competitive_rt_mpm: scenario behavior is not price-taking");

  const double d = s.total_demand();
  const double lambda = d / s.sum_inverse_default();

  StageAllocation a;
  a.lambda_d = lambda;
  a.lambda_r = lambda;
  std::vector<double> theta_d;
  for (const auto& g : s.generators()) {
    theta_d.push_back(1.0 / (g.c + g.eps));
    a.g_d.push_back(lambda / (g.c + g.eps));
    a.g_r.push_back(0.0);
  }
  a.theta_d = std::move(theta_d);
  // Real-time output is the default-bid residual (c+ε)⁻¹λ − g_d, not a
  // slope bid; no real-time slope vector applies.
  for (const auto& l : s.loads()) {
    a.d_d.push_back(l.d);
    a.d_r.push_back(0.0);
  }

  EquilibriumOutcome out;
  out.status = EquilibriumStatus::NonUniqueFamily;
  out.allocation = std::move(a);
  out.family =
      "any non-negative day-ahead slopes and any per-load stage split; "
      "canonical representative settles all quantity day-ahead";
  return out;
}

/// Under a real-time MPM policy no Nash equilibrium exists: competition
/// drives all demand out of the day-ahead market, and at the resulting
/// zero-quantity fixed point loads can deviate back into a zero-priced
/// day-ahead stage.
inline EquilibriumOutcome nash_rt_mpm(const MarketScenario& s) {
  detail::require(s.policy() == Policy::RealTimeMpm,
                  "nash_rt_mpm: scenario policy is not rt-mpm");
  detail::require(s.behavior() == Behavior::PriceAnticipating,
                  "nash_rt_mpm: scenario behavior is not price-anticipating");

  EquilibriumOutcome out;
  out.status = EquilibriumStatus::NoEquilibrium;
  if (s.num_generators() == 1) {
    out.detail =
        "no equilibrium with one generator: arbitrarily small day-ahead "
        "bids push all demand to the truthfully cleared real-time stage, "
        "after which a load gains by re-entering the day-ahead market at "
        "the zero price of the even-split rule";
  } else {
    out.detail =
        "no equilibrium: day-ahead best responses contract demand to zero, "
        "and at the zero fixed point a load gains by re-entering the "
        "day-ahead market at the zero price of the even-split rule";
  }
  return out;
}

/// Competitive equilibrium under a day-ahead MPM policy. Prices equal
/// d / Σc⁻¹ in both stages, total dispatch solves the planner problem for
/// every ε ≥ 0, and generators with over-estimated cost sell their
/// residual ε c⁻¹/(c+ε) slope in real time. Only the per-load split of
/// the fixed aggregate day-ahead demand is free; the canonical
/// representative splits it in proportion to each load's demand.
inline EquilibriumOutcome competitive_da_mpm(const MarketScenario& s) {
  detail::require(s.policy() == Policy::DayAheadMpm,
                  "competitive_da_mpm: scenario policy is not da-mpm");
  detail::require(s.behavior() == Behavior::PriceTaking,
                  "competitive_da_mpm: scenario behavior is not price-taking");

  const double d = s.total_demand();
  const double sum_inv_c = s.sum_inverse_cost();
  const double lambda = d / sum_inv_c;
  const double dd = s.sum_inverse_default() / sum_inv_c * d;

  StageAllocation a;
  a.lambda_d = lambda;
  a.lambda_r = lambda;
  std::vector<double> theta_d, theta_r;
  for (const auto& g : s.generators()) {
    theta_d.push_back(1.0 / (g.c + g.eps));
    theta_r.push_back(g.eps / (g.c * (g.c + g.eps)));
    a.g_d.push_back(1.0 / (g.c + g.eps) * d / sum_inv_c);
    a.g_r.push_back(g.eps / (g.c * (g.c + g.eps)) * d / sum_inv_c);
  }
  a.theta_d = std::move(theta_d);
  a.theta_r = std::move(theta_r);
  for (const auto& l : s.loads()) {
    a.d_d.push_back(dd * l.d / d);
    a.d_r.push_back(l.d - dd * l.d / d);
  }

  EquilibriumOutcome out;
  out.status = EquilibriumStatus::NonUniqueFamily;
  out.allocation = std::move(a);
  out.family =
      "aggregate day-ahead demand is fixed but its per-load split is free; "
      "canonical representative splits in proportion to each load's demand";
  return out;
}

/// Unique symmetric Nash equilibrium under a day-ahead MPM policy for
/// homogeneous generators with a common estimation error. Requires G ≥ 3
/// and the strict load-count bound; at the boundary (equality) and beyond
/// no symmetric equilibrium exists.
inline EquilibriumOutcome nash_da_mpm_symmetric(const MarketScenario& s) {
  detail::require(s.policy() == Policy::DayAheadMpm,
                  "nash_da_mpm_symmetric: scenario policy is not da-mpm");
  detail::require(
      s.behavior() == Behavior::PriceAnticipating,
      "nash_da_mpm_symmetric: scenario behavior is not price-anticipating");
  const double c = detail::common_cost(s);
  const double eps = detail::common_error(s);

  const int G = s.num_generators();
  const int L = s.num_loads();
  EquilibriumOutcome out;
  out.condition = min_generator_condition(G);
  if (!out.condition->satisfied) {
    out.status = EquilibriumStatus::ConditionViolated;
    out.detail = "symmetric Nash equilibrium under a day-ahead MPM policy "
                 "requires at least three generators";
    return out;
  }

  out.condition = load_count_condition(G, L, c, eps);
  if (!out.condition->satisfied) {
    out.status = EquilibriumStatus::NoEquilibrium;
    out.detail =
        nearly_equal(out.condition->lhs, out.condition->rhs)
            ? "boundary case 1/L = (c-eps(G-2))/((c+eps)(G-2)): real-time "
              "demand collapses to zero and loads deviate; no symmetric "
              "equilibrium"
            : "1/L <= (c-eps(G-2))/((c+eps)(G-2)): real-time demand would be "
              "negative and the symmetric bid fails the first-order "
              "condition; no symmetric equilibrium";
    return out;
  }

  const double d = s.total_demand();
  const double gm1 = G - 1.0, gm2 = G - 2.0;
  const double shade = c / (c + eps);  // default-bid discount factor
  const double gj_d = shade * L / (L + 1.0) * gm1 / gm2 * d / G;
  const double gj_r = (1.0 - shade * L / (L + 1.0) * gm1 / gm2) * d / G;
  const double dl_d = shade / (L + 1.0) * gm1 / gm2 * d;
  const double theta_r = (gm2 / gm1 - shade * L / (L + 1.0)) / c;
  const double lambda_r = gm1 / gm2 * c / G * d;
  const double lambda_d = L / (L + 1.0) * lambda_r;

  StageAllocation a;
  a.lambda_d = lambda_d;
  a.lambda_r = lambda_r;
  a.theta_d = std::vector<double>(G, 1.0 / (c + eps));
  a.theta_r = std::vector<double>(G, theta_r);
  a.g_d.assign(G, gj_d);
  a.g_r.assign(G, gj_r);
  for (const auto& l : s.loads()) {
    a.d_d.push_back(dl_d);
    a.d_r.push_back(l.d - dl_d);
  }

  out.status = EquilibriumStatus::Unique;
  out.allocation = std::move(a);
  return out;
}

/// Aggregate profit and payment of the market's competitive and Nash
/// equilibria in closed form (homogeneous generators; standard or
/// day-ahead MPM regime).
struct AggregateTable {
  double ce_profit = 0.0;
  double ce_payment = 0.0;
  double ne_profit = 0.0;
  double ne_payment = 0.0;
};

inline AggregateTable aggregate_tables(const MarketScenario& s) {
  const double c = detail::common_cost(s);
  const int G = s.num_generators();
  const int L = s.num_loads();
  const double d = s.total_demand();
  const double base = c / G * d * d;

  AggregateTable t;
  t.ce_profit = 0.5 * base;
  t.ce_payment = base;

  const double gm1 = G - 1.0, gm2 = G - 2.0;
  const double lp1 = L + 1.0;
  switch (s.policy()) {
    case Policy::Standard:
      t.ne_profit = 0.5 * base *
                    (G / gm2 - (2.0 * L * gm1 + 2.0) / (lp1 * lp1 * gm2));
      t.ne_payment = base * (gm1 / gm2 - (L * gm1 + 1.0) / (lp1 * lp1 * gm2));
      break;
    case Policy::DayAheadMpm: {
      const double eps = detail::common_error(s);
      const double shade = c / (c + eps);
      t.ne_profit = 0.5 * base *
                    (G / gm2 - shade * (gm1 * gm1) / (gm2 * gm2) * 2.0 * L /
                                   (lp1 * lp1));
      t.ne_payment =
          base *
          (gm1 / gm2 - shade * (gm1 * gm1) / (gm2 * gm2) * L / (lp1 * lp1));
      break;
    }
    case Policy::RealTimeMpm:
      throw regime_error(
          "aggregate_tables: no closed-form table for the rt-mpm regime "
          "(its Nash equilibrium does not exist)");
  }
  return t;
}

/// Change in the CE-normalized aggregate Nash profit when moving from a
/// standard market to one with a day-ahead MPM policy,
///   2/(L+1)² · 1/(G−2) · (1 − L/(G−2) − L + ε/(c+ε)·L(G−1)).
/// For ε = 0 this equals the direct normalized table difference exactly;
/// the L → ∞ limit is zero. Pure formula arithmetic — existence of the
/// underlying equilibria is the caller's concern.
inline double normalized_ne_difference(int G, int L, double c, double eps) {
  if (G < 3) throw invalid_input("normalized_ne_difference requires G >= 3");
  if (L < 1) throw invalid_input("normalized_ne_difference requires L >= 1");
  const double gm1 = G - 1.0, gm2 = G - 2.0, lp1 = L + 1.0;
  return 2.0 / (lp1 * lp1) / gm2 *
         (1.0 - L / gm2 - L + eps / (c + eps) * L * gm1);
}

}  // namespace tsm
