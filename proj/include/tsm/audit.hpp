#pragma once

#include "tsm/solver.hpp"

namespace tsm::audit {

/// Outcome of sweeping one participant's decision variable over a grid
/// of unilateral deviations. `best_gain_rel` is the largest improvement
/// of that participant's own objective relative to its equilibrium
/// value; a Nash outcome keeps it at numerical-noise level.
struct DeviationResult {
  double base_objective = std::numeric_limits<double>::quiet_NaN();
  double best_gain = 0.0;
  double best_gain_rel = 0.0;
  int candidates = 0;
  int feasible = 0;
};

namespace detail {

inline void accumulate(DeviationResult& r, double objective_gain) {
  ++r.feasible;
  if (objective_gain > r.best_gain) r.best_gain = objective_gain;
}

inline void finalize(DeviationResult& r) {
  r.best_gain_rel = r.best_gain / std::max(std::abs(r.base_objective), 1e-12);
}

}  // namespace detail

/// Generator j moves its real-time slope alone; every other bid and the
/// day-ahead outcome stay fixed, the real-time stage re-clears. This is
/// the within-stage deviation of the strategic generator problem.
inline DeviationResult generator_real_time_deviation(
    const MarketScenario& s, const StageAllocation& a, int j, int grid_points,
    double span = 0.5) {
  if (!a.theta_r)
    throw invalid_input("deviation audit: allocation has no real-time slopes");
  const auto& gen = s.generators()[j];
  const double d_r = a.real_time_demand();
  double T = 0.0;
  for (size_t k = 0; k < a.theta_r->size(); ++k)
    if (static_cast<int>(k) != j) T += (*a.theta_r)[k];

  const double day_ahead_part = a.lambda_d * a.g_d[j];
  auto profit = [&](double theta) {
    const double S = T + theta;
    if (std::abs(S) < 1e-12) return -std::numeric_limits<double>::infinity();
    const double lam = d_r / S;
    const double g_r = theta * lam;
    const double g = a.g_d[j] + g_r;
    return day_ahead_part + g_r * lam - 0.5 * gen.c * g * g;
  };

  DeviationResult out;
  const double theta_star = (*a.theta_r)[j];
  out.base_objective = profit(theta_star);
  double scale = std::abs(theta_star);
  for (double t : *a.theta_r) scale = std::max(scale, std::abs(t));
  const double w = span * std::max(scale, 1e-9);
  for (int i = 0; i < grid_points; ++i) {
    const double theta = theta_star - w + 2.0 * w * i / (grid_points - 1.0);
    ++out.candidates;
    const double pi = profit(theta);
    if (std::isfinite(pi)) detail::accumulate(out, pi - out.base_objective);
  }
  detail::finalize(out);
  return out;
}

/// Generator j moves its day-ahead slope in the standard market. The
/// day-ahead stage re-clears against the fixed bids of everyone else and
/// the real-time stage then re-equilibrates: all generators play the
/// follower game from their new committed positions (the sequential
/// structure of the two-stage game).
inline DeviationResult generator_day_ahead_deviation_standard(
    const MarketScenario& s, const StageAllocation& a, int j, int grid_points,
    const SolverConfig& config, double span = 0.5) {
  if (s.policy() != Policy::Standard)
    throw regime_error("day-ahead slope deviations apply to the standard market");
  if (!a.theta_d || !a.theta_r)
    throw invalid_input("deviation audit: allocation has no slopes");
  const int G = s.num_generators();
  const double d_d = a.day_ahead_demand();
  const double d_r = a.real_time_demand();
  std::vector<double> costs;
  for (const auto& g : s.generators()) costs.push_back(g.c);

  double others = 0.0;
  for (int k = 0; k < G; ++k)
    if (k != j) others += (*a.theta_d)[k];

  auto profit = [&](double t) -> double {
    const double S = others + t;
    if (std::abs(S) < 1e-12) return -std::numeric_limits<double>::infinity();
    const double lam_d = d_d / S;
    std::vector<double> q(G);
    for (int k = 0; k < G; ++k)
      q[k] = (k == j ? t : (*a.theta_d)[k]) * lam_d;
    const auto sub = solve_real_time_nash(q, costs, d_r, config, *a.theta_r);
    if (!sub.converged()) return -std::numeric_limits<double>::infinity();
    const double g_r = sub.theta_r[j] * sub.lambda_r;
    const double g = q[j] + g_r;
    return lam_d * q[j] + sub.lambda_r * g_r - 0.5 * costs[j] * g * g;
  };

  DeviationResult out;
  const double theta_star = (*a.theta_d)[j];
  out.base_objective = profit(theta_star);
  const double w = span * std::max(std::abs(theta_star), 1e-9);
  for (int i = 0; i < grid_points; ++i) {
    const double t = theta_star - w + 2.0 * w * i / (grid_points - 1.0);
    ++out.candidates;
    const double pi = profit(t);
    if (std::isfinite(pi)) detail::accumulate(out, pi - out.base_objective);
  }
  detail::finalize(out);
  return out;
}

/// Load l moves its day-ahead allocation alone. The day-ahead stage
/// re-clears and the load anticipates the followers' re-equilibrated
/// real-time price: the inner Nash under a day-ahead MPM policy, the
/// committed-position follower game in the standard market. Candidates
/// whose continuation game has no equilibrium are infeasible and cannot
/// witness an improvement.
inline DeviationResult load_day_ahead_deviation(const MarketScenario& s,
                                                const StageAllocation& a,
                                                int l, int grid_points,
                                                const SolverConfig& config,
                                                double span = 0.5) {
  const int G = s.num_generators();
  const int L = s.num_loads();
  const double d = s.total_demand();
  const double d_l = s.loads()[l].d;
  double others = 0.0;
  for (int k = 0; k < L; ++k)
    if (k != l) others += a.d_d[k];
  std::vector<double> costs;
  for (const auto& g : s.generators()) costs.push_back(g.c);

  auto payment = [&](double x) -> double {
    const double dd = x + others;
    const double dr = d - dd;
    double lam_d, lam_r;
    if (s.policy() == Policy::DayAheadMpm) {
      lam_d = dd / s.sum_inverse_default();
      const auto inner = inner_generator_nash(dd, dr, s, config);
      if (inner.status == RealTimeNash::Status::ZeroDemand)
        lam_r = lam_d;
      else if (!inner.converged())
        return std::numeric_limits<double>::infinity();
      else
        lam_r = inner.lambda_r;
    } else if (s.policy() == Policy::Standard) {
      if (!a.theta_d || !a.theta_r)
        throw invalid_input("deviation audit: allocation has no slopes");
      double S = 0.0;
      for (double t : *a.theta_d) S += t;
      if (std::abs(S) < 1e-12)
        return std::numeric_limits<double>::infinity();
      lam_d = dd / S;
      std::vector<double> q(G);
      for (int k = 0; k < G; ++k) q[k] = (*a.theta_d)[k] * lam_d;
      const auto sub = solve_real_time_nash(q, costs, dr, config, *a.theta_r);
      if (sub.status == RealTimeNash::Status::ZeroDemand)
        lam_r = lam_d;
      else if (!sub.converged())
        return std::numeric_limits<double>::infinity();
      else
        lam_r = sub.lambda_r;
    } else {
      throw regime_error("load deviations audit the standard or da-mpm regimes");
    }
    return lam_d * x + lam_r * (d_l - x);
  };

  DeviationResult out;
  const double x_star = a.d_d[l];
  out.base_objective = payment(x_star);
  const double w = span * std::max(std::abs(x_star), d_l);
  for (int i = 0; i < grid_points; ++i) {
    const double x = x_star - w + 2.0 * w * i / (grid_points - 1.0);
    ++out.candidates;
    const double rho = payment(x);
    // A load improves by paying less.
    if (std::isfinite(rho)) detail::accumulate(out, out.base_objective - rho);
  }
  detail::finalize(out);
  return out;
}

}  // namespace tsm::audit
