#pragma once

#include <numeric>
#include <span>
#include <sstream>

#include "tsm/types.hpp"

namespace tsm {

/// Outcome of clearing one stage. `even_split` signals the degenerate
/// zero-supply, non-zero-demand case: price zero with the stage demand
/// split evenly across all loads (the caller materializes the split).
struct ClearingResult {
  double price = 0.0;
  bool even_split = false;
};

/// Clears one stage of the market from supply-function slopes and the
/// stage demand. With non-zero aggregate slope the price is
/// demand / Σθ. With zero aggregate slope the degenerate rules apply:
/// zero demand inherits the other stage's price, non-zero demand clears
/// at price zero with the even-split flag raised.
inline ClearingResult clear_stage(std::span<const double> slopes, double demand,
                                  std::optional<double> other_stage_price = {}) {
  double sum = 0.0;
  for (double t : slopes) {
    if (!std::isfinite(t)) throw invalid_input("clear_stage: non-finite slope");
    sum += t;
  }
  if (!std::isfinite(demand)) throw invalid_input("clear_stage: non-finite demand");

  if (sum != 0.0) return {demand / sum, false};
  if (demand == 0.0) {
    if (!other_stage_price)
      throw clearing_error(
          "clear_stage: zero supply and zero demand but no other-stage price "
          "to inherit");
    return {*other_stage_price, false};
  }
  return {0.0, true};
}

/// Minimum-cost dispatch meeting the aggregate demand, and its cost.
struct PlannerSolution {
  std::vector<double> dispatch;
  double cost = 0.0;
};

/// Solves the social planner problem: equal marginal cost across
/// generators gives g_j = (c_j⁻¹ / Σ c_k⁻¹)·d.
inline PlannerSolution solve_social_planner(const MarketScenario& scenario) {
  const double d = scenario.total_demand();
  const double sum_inv = scenario.sum_inverse_cost();
  PlannerSolution out;
  out.dispatch.reserve(scenario.generators().size());
  for (const auto& g : scenario.generators()) {
    const double gj = (1.0 / g.c) / sum_inv * d;
    out.dispatch.push_back(gj);
    out.cost += 0.5 * g.c * gj * gj;
  }
  return out;
}

/// Social cost of an arbitrary dispatch under the scenario's true costs.
inline double dispatch_cost(std::span<const double> dispatch,
                            const MarketScenario& scenario) {
  double cost = 0.0;
  for (size_t j = 0; j < dispatch.size(); ++j)
    cost += 0.5 * scenario.generators()[j].c * dispatch[j] * dispatch[j];
  return cost;
}

/// Checks sizes, per-load identities, stage balance and supply-function
/// consistency (where slopes are present). Throws allocation_error with
/// a description of the first violation.
inline void validate_allocation(const StageAllocation& a,
                                const MarketScenario& scenario,
                                double rtol = kRelTol) {
  const size_t G = scenario.generators().size();
  const size_t L = scenario.loads().size();
  if (a.g_d.size() != G || a.g_r.size() != G)
    throw allocation_error("allocation: generator vector size mismatch");
  if (a.d_d.size() != L || a.d_r.size() != L)
    throw allocation_error("allocation: load vector size mismatch");
  if (a.theta_d && a.theta_d->size() != G)
    throw allocation_error("allocation: day-ahead slope vector size mismatch");
  if (a.theta_r && a.theta_r->size() != G)
    throw allocation_error("allocation: real-time slope vector size mismatch");

  const double d = scenario.total_demand();
  for (size_t l = 0; l < L; ++l) {
    if (!nearly_equal(a.d_d[l] + a.d_r[l], scenario.loads()[l].d, rtol,
                      kAbsTol * std::max(1.0, d)))
      throw allocation_error("allocation: load stage split does not sum to d_l");
  }
  const double scale = std::max(1.0, d);
  if (std::abs(a.day_ahead_supply() - a.day_ahead_demand()) >
      std::max(rtol * scale, kAbsTol))
    throw allocation_error("allocation: day-ahead stage imbalance");
  if (std::abs(a.real_time_supply() - a.real_time_demand()) >
      std::max(rtol * scale, kAbsTol))
    throw allocation_error("allocation: real-time stage imbalance");

  if (a.theta_d) {
    for (size_t j = 0; j < G; ++j)
      if (!nearly_equal(a.g_d[j], (*a.theta_d)[j] * a.lambda_d, rtol,
                        kAbsTol * scale))
        throw allocation_error("allocation: day-ahead supply function violated");
  }
  if (a.theta_r) {
    for (size_t j = 0; j < G; ++j)
      if (!nearly_equal(a.g_r[j], (*a.theta_r)[j] * a.lambda_r, rtol,
                        kAbsTol * scale))
        throw allocation_error("allocation: real-time supply function violated");
  }
}

/// Settles an allocation: per-generator profit λ^d g^d + λ^r g^r − c/2·g²,
/// per-load payment λ^d d^d + λ^r d^r, social cost, and aggregates. With a
/// benchmark settlement the normalized ratios are attached. The
/// allocation is validated first; imbalance raises allocation_error.
inline SettlementReport settle(const StageAllocation& a,
                               const MarketScenario& scenario,
                               const SettlementReport* benchmark = nullptr) {
  validate_allocation(a, scenario);

  SettlementReport r;
  const auto& gens = scenario.generators();
  r.profit.reserve(gens.size());
  for (size_t j = 0; j < gens.size(); ++j) {
    const double g = a.output(static_cast<int>(j));
    const double pi = a.lambda_d * a.g_d[j] + a.lambda_r * a.g_r[j] -
                      0.5 * gens[j].c * g * g;
    r.profit.push_back(pi);
    r.social_cost += 0.5 * gens[j].c * g * g;
    r.aggregate_profit += pi;
  }
  r.payment.reserve(scenario.loads().size());
  for (size_t l = 0; l < scenario.loads().size(); ++l) {
    const double rho = a.lambda_d * a.d_d[l] + a.lambda_r * a.d_r[l];
    r.payment.push_back(rho);
    r.aggregate_payment += rho;
  }

  if (benchmark) {
    SettlementReport::Normalized n;
    n.profit.reserve(r.profit.size());
    for (size_t j = 0; j < r.profit.size(); ++j)
      n.profit.push_back(r.profit[j] / benchmark->profit[j]);
    n.payment.reserve(r.payment.size());
    for (size_t l = 0; l < r.payment.size(); ++l)
      n.payment.push_back(r.payment[l] / benchmark->payment[l]);
    n.aggregate_profit = r.aggregate_profit / benchmark->aggregate_profit;
    n.aggregate_payment = r.aggregate_payment / benchmark->aggregate_payment;
    r.normalized = std::move(n);
  }
  return r;
}

}  // namespace tsm
