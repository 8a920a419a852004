#pragma once

#include <algorithm>
#include <cstdint>
#include <span>

#include "tsm/golden.hpp"
#include "tsm/market.hpp"
#include "tsm/types.hpp"

namespace tsm {

/// Relative first-order-condition residual accepted when certifying a
/// converged follower equilibrium.
inline constexpr double kFocRtol = 1e-8;

struct SolverConfig {
  int max_outer_iters = 200;
  int max_inner_iters = 2000;
  double damping = 0.5;           // both loops
  double tol_fixed_point = 1e-10; // relative
  int line_search_grid = 96;      // leader 1-D minimization scan
  int probe_iters = 200;          // nonexistence probe round cap
  // Route homogeneous leaders through the numeric search as well
  // (default: they take the symmetric closed form).
  bool force_numeric_load_br = false;

  void validate() const {
    if (max_outer_iters < 1 || max_inner_iters < 1 || probe_iters < 1)
      throw invalid_input("solver config: iteration counts must be positive");
    if (!(damping > 0.0 && damping <= 1.0))
      throw invalid_input("solver config: damping must lie in (0, 1]");
    if (!(tol_fixed_point > 0.0 && tol_fixed_point <= 1e-3))
      throw invalid_input("solver config: tolerance must lie in (0, 1e-3]");
    if (line_search_grid < 3)
      throw invalid_input("solver config: line search grid needs >= 3 points");
  }
};

struct TraceRow {
  int iteration = 0;
  std::string phase;
  std::vector<double> values;      // per-player decisions in index order
  std::vector<double> objectives;  // per-player objective values, if computed
  double lambda_d = std::numeric_limits<double>::quiet_NaN();
  double lambda_r = std::numeric_limits<double>::quiet_NaN();
  double metric = std::numeric_limits<double>::quiet_NaN();
};

/// Iteration log of a best-response run. Convergence and the failure
/// flags are mutually exclusive; rows keep a monotone iteration index.
struct BestResponseTrace {
  std::vector<TraceRow> rows;
  bool converged = false;
  bool cycle_detected = false;
  bool rule2_deviation = false;
  std::string detail;

  void add(TraceRow row) {
    if (!rows.empty() && row.iteration < rows.back().iteration)
      throw solver_error("trace: iteration index must not decrease");
    rows.push_back(std::move(row));
  }
};

namespace detail {

/// First-order condition of a follower in the real-time game, written as
/// dπ/dθ = d_r/S³ · (m − n·θ) with S the slope total. `cq` is the
/// follower's cost times its committed (day-ahead) position, `T` the
/// other followers' slope total.
inline double br_m(double d_r, double cq, double T) {
  return d_r * T - cq * T * T;
}
inline double br_n(double d_r, double cq, double c, double T) {
  return d_r + cq * T + c * d_r * T;
}

/// Second derivative of the follower objective at slope theta, via
/// d²π/dθ² = d_r/S³ · (m̃ + ñ·θ).
inline double br_second_order(double d_r, double cq, double c, double T,
                              double theta) {
  const double S = T + theta;
  if (S == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double mt = (-4.0 * d_r * T - c * d_r * T * T) / S + 2.0 * cq * T;
  const double nt = (2.0 * d_r + 2.0 * c * d_r * T) / S;
  return d_r / (S * S * S) * (mt + nt * theta);
}

}  // namespace detail

/// Real-time Nash game among generators holding committed positions
/// (their settled day-ahead quantities): each picks a supply-function
/// slope given the others', demand d_r clears at d_r/Σθ. This is the
/// follower stage of the day-ahead MPM game and the continuation game
/// used by the deviation audits.
struct RealTimeNash {
  enum class Status { Converged, NoEquilibrium, NonConvergence, ZeroDemand };
  Status status = Status::NonConvergence;
  std::vector<double> theta_r;
  double lambda_r = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string detail;
  std::vector<double> foc_residual;   // m − nθ per generator
  std::vector<double> second_order;   // d²π/dθ² at the returned point

  bool converged() const { return status == Status::Converged; }
};

inline RealTimeNash solve_real_time_nash(std::span<const double> positions,
                                         std::span<const double> costs,
                                         double d_r, const SolverConfig& config,
                                         std::span<const double> init = {}) {
  config.validate();
  const int G = static_cast<int>(costs.size());
  RealTimeNash out;

  if (d_r == 0.0) {
    out.status = RealTimeNash::Status::ZeroDemand;
    out.theta_r.assign(G, 0.0);
    out.detail = "zero real-time demand: any slope family clears; price "
                 "inherited from day-ahead";
    return out;
  }
  if (d_r < 0.0) {
    out.status = RealTimeNash::Status::NoEquilibrium;
    out.detail = "negative real-time demand: the symmetric candidate slope "
                 "is negative and fails the second-order condition";
    return out;
  }
  if (G < 3) {
    out.status = RealTimeNash::Status::NoEquilibrium;
    out.detail = "fewer than three generators: slopes contract toward zero "
                 "without an interior fixed point";
    return out;
  }

  double total = d_r;
  for (double q : positions) total += q;
  if (total <= 0.0) total = d_r;

  std::vector<double> theta(G);
  if (!init.empty()) {
    theta.assign(init.begin(), init.end());
  } else {
    // Symmetric turning-point guess per generator.
    for (int j = 0; j < G; ++j)
      theta[j] = (G - 2.0) / (G - 1.0) * d_r / (costs[j] * total);
  }
  double S = 0.0;
  for (double t : theta) S += t;
  if (S == 0.0) {
    for (int j = 0; j < G; ++j)
      theta[j] = (G - 2.0) / (G - 1.0) * d_r / (costs[j] * total);
    S = 0.0;
    for (double t : theta) S += t;
  }

  const double gamma = config.damping;
  double worst_change = 0.0, worst_resid = 0.0;
  for (int it = 1; it <= config.max_inner_iters; ++it) {
    worst_change = 0.0;
    for (int j = 0; j < G; ++j) {
      const double T = S - theta[j];
      const double cq = costs[j] * positions[j];
      const double n = detail::br_n(d_r, cq, costs[j], T);
      if (n == 0.0) {
        out.status = RealTimeNash::Status::NoEquilibrium;
        out.detail = "singular best response (n = 0)";
        out.iterations = it;
        return out;
      }
      const double target = detail::br_m(d_r, cq, T) / n;
      const double next = theta[j] + gamma * (target - theta[j]);
      worst_change = std::max(worst_change,
                              std::abs(next - theta[j]) /
                                  std::max(std::abs(next), kAbsTol));
      S += next - theta[j];
      theta[j] = next;
    }

    worst_resid = 0.0;
    for (int j = 0; j < G; ++j) {
      const double T = S - theta[j];
      const double cq = costs[j] * positions[j];
      const double m = detail::br_m(d_r, cq, T);
      const double n = detail::br_n(d_r, cq, costs[j], T);
      worst_resid = std::max(worst_resid,
                             std::abs(m - n * theta[j]) /
                                 std::max(std::abs(n * theta[j]), kAbsTol));
    }
    out.iterations = it;
    if (worst_change <= config.tol_fixed_point && worst_resid <= 0.1 * kFocRtol)
      break;
  }

  if (worst_change > config.tol_fixed_point || worst_resid > 0.1 * kFocRtol) {
    out.status = RealTimeNash::Status::NonConvergence;
    out.detail = "follower fixed-point iteration hit the cap";
    out.theta_r = std::move(theta);
    return out;
  }

  // Full-step polish sweeps push the fixed point to machine precision so
  // that callers differentiating through this equilibrium (the leader
  // search) see a noise floor far below their own tolerance.
  double prev_change = worst_change;
  for (int p = 0; p < 80; ++p) {
    double change = 0.0;
    for (int j = 0; j < G; ++j) {
      const double T = S - theta[j];
      const double cq = costs[j] * positions[j];
      const double n = detail::br_n(d_r, cq, costs[j], T);
      if (n == 0.0) break;
      const double next = detail::br_m(d_r, cq, T) / n;
      change = std::max(change, std::abs(next - theta[j]) /
                                    std::max(std::abs(next), kAbsTol));
      S += next - theta[j];
      theta[j] = next;
    }
    ++out.iterations;
    if (change <= 1e-15 || change >= prev_change) break;
    prev_change = change;
  }

  out.theta_r = std::move(theta);
  out.foc_residual.resize(G);
  out.second_order.resize(G);
  bool maximizer = true;
  for (int j = 0; j < G; ++j) {
    const double T = S - out.theta_r[j];
    const double cq = costs[j] * positions[j];
    out.foc_residual[j] =
        detail::br_m(d_r, cq, T) -
        detail::br_n(d_r, cq, costs[j], T) * out.theta_r[j];
    out.second_order[j] =
        detail::br_second_order(d_r, cq, costs[j], T, out.theta_r[j]);
    if (!(out.second_order[j] < 0.0)) maximizer = false;
  }
  if (!maximizer) {
    out.status = RealTimeNash::Status::NoEquilibrium;
    out.detail = "stationary point is not a profit maximizer for every "
                 "generator";
    return out;
  }
  out.status = RealTimeNash::Status::Converged;
  out.lambda_r = d_r / S;
  return out;
}

/// Committed day-ahead positions under a day-ahead MPM policy: the
/// operator dispatches the aggregate day-ahead demand across default-bid
/// slopes.
inline std::vector<double> da_mpm_positions(const MarketScenario& s,
                                            double d_d) {
  const double sum = s.sum_inverse_default();
  std::vector<double> q;
  q.reserve(s.generators().size());
  for (const auto& g : s.generators())
    q.push_back((1.0 / (g.c + g.eps)) / sum * d_d);
  return q;
}

/// Best real-time slope of generator j given the other followers' slopes
/// and the day-ahead outcome. `second_order` is the curvature at the
/// returned stationary point; a non-negative value marks a non-maximizer
/// (nonexistence evidence for the caller).
struct GeneratorResponse {
  double theta_r = 0.0;
  double second_order = std::numeric_limits<double>::quiet_NaN();
  bool is_maximizer = false;
  bool zero_demand_branch = false;
};

inline GeneratorResponse generator_br_da_mpm(int j,
                                             std::span<const double> others_theta_r,
                                             double d_d, double d_r,
                                             const MarketScenario& s) {
  if (j < 0 || j >= s.num_generators())
    throw invalid_input("generator_br_da_mpm: index out of range");
  GeneratorResponse out;
  if (d_r == 0.0) {
    // Price-independent profit: any slope is a best response; report the
    // zero member of the family.
    out.zero_demand_branch = true;
    out.theta_r = 0.0;
    return out;
  }
  double T = 0.0;
  for (double t : others_theta_r) T += t;
  const auto& gen = s.generators()[j];
  const double q = (1.0 / (gen.c + gen.eps)) / s.sum_inverse_default() * d_d;
  const double cq = gen.c * q;
  const double n = detail::br_n(d_r, cq, gen.c, T);
  if (n == 0.0)
    throw solver_error("generator_br_da_mpm: singular response (n = 0)");
  out.theta_r = detail::br_m(d_r, cq, T) / n;
  out.second_order =
      detail::br_second_order(d_r, cq, gen.c, T, out.theta_r);
  out.is_maximizer = out.second_order < 0.0;
  return out;
}

/// Follower Nash equilibrium of the real-time stage given the day-ahead
/// split (d_d, d_r) of a day-ahead MPM scenario. Initializes at the
/// truthful-residual slopes ε c⁻¹/(c+ε); when those all vanish (ε = 0)
/// the symmetric turning point seeds the iteration instead.
inline RealTimeNash inner_generator_nash(double d_d, double d_r,
                                         const MarketScenario& s,
                                         const SolverConfig& config,
                                         BestResponseTrace* trace = nullptr) {
  const auto positions = da_mpm_positions(s, d_d);
  std::vector<double> costs;
  costs.reserve(s.generators().size());
  for (const auto& g : s.generators()) costs.push_back(g.c);

  std::vector<double> init;
  double init_sum = 0.0;
  for (const auto& g : s.generators()) {
    init.push_back(g.eps / (g.c * (g.c + g.eps)));
    init_sum += init.back();
  }
  std::span<const double> init_span;
  if (init_sum > 0.0) init_span = init;

  RealTimeNash result =
      solve_real_time_nash(positions, costs, d_r, config, init_span);
  if (trace) {
    TraceRow row;
    row.iteration = trace->rows.empty() ? 0 : trace->rows.back().iteration;
    row.phase = "inner-nash";
    row.values = result.theta_r;
    row.lambda_r = result.lambda_r;
    row.metric = static_cast<double>(result.iterations);
    trace->add(std::move(row));
  }
  return result;
}

/// Best day-ahead allocation of load l given the other loads' day-ahead
/// bids. The leader anticipates the operator-estimated day-ahead price
/// and the followers' real-time equilibrium price. Homogeneous scenarios
/// use the symmetric closed form unless the config forces the numeric
/// path; heterogeneous ones run a grid-seeded golden-section search over
/// [−d, 2d] with the follower game re-solved per candidate.
struct LoadResponse {
  double d_l_d = 0.0;
  bool closed_form = false;
};

inline LoadResponse load_br_da_mpm(int l, std::span<const double> others_d_d,
                                   const MarketScenario& s,
                                   const SolverConfig& config) {
  config.validate();
  if (l < 0 || l >= s.num_loads())
    throw invalid_input("load_br_da_mpm: index out of range");
  const int G = s.num_generators();
  if (G < 3)
    throw solver_error(
        "load_br_da_mpm: leader response undefined, the follower game needs "
        "at least three generators");

  const double d = s.total_demand();
  if (s.homogeneous() && !config.force_numeric_load_br) {
    const double c = s.generators().front().c;
    const double eps = s.generators().front().eps;
    const int L = s.num_loads();
    return {c / (c + eps) / (L + 1.0) * (G - 1.0) / (G - 2.0) * d, true};
  }

  double others = 0.0;
  for (double x : others_d_d) others += x;
  const double d_l = s.loads()[l].d;
  const double sum_inv_default = s.sum_inverse_default();

  // Anticipated real-time price at a candidate day-ahead allocation:
  // the follower equilibrium, or the day-ahead price itself when the
  // real-time stage empties.
  auto anticipated_rt_price = [&](double x) -> std::optional<double> {
    const double dd = x + others;
    const double dr = d - dd;
    const auto inner = inner_generator_nash(dd, dr, s, config);
    if (inner.status == RealTimeNash::Status::ZeroDemand)
      return dd / sum_inv_default;
    if (!inner.converged()) return std::nullopt;
    return inner.lambda_r;
  };
  auto payment = [&](double x) -> double {
    const auto lam_r = anticipated_rt_price(x);
    if (!lam_r) return std::numeric_limits<double>::infinity();
    return (x + others) / sum_inv_default * x + *lam_r * (d_l - x);
  };

  const auto found = grid_then_golden(payment, -d, 2.0 * d,
                                      config.line_search_grid,
                                      1e-9 * std::max(1.0, d));
  if (!found)
    throw solver_error(
        "load_br_da_mpm: leader response undefined, the follower game "
        "failed at every probed day-ahead allocation");

  // Newton polish on the exact first-order condition
  //   (2x + others)/Σ(c+ε)⁻¹ − λ^r(x) + λ^r'(x)·(d_l − x) = 0,
  // with the price sensitivity taken through the follower equilibrium by
  // central differences. Value-based search alone only locates the
  // minimum to the square root of the payment noise.
  double x = found->x;
  const double h = 1e-4 * std::max(1.0, d);
  for (int it = 0; it < 6; ++it) {
    const auto mu0 = anticipated_rt_price(x);
    const auto mup = anticipated_rt_price(x + h);
    const auto mum = anticipated_rt_price(x - h);
    if (!mu0 || !mup || !mum) break;
    const double dmu = (*mup - *mum) / (2.0 * h);
    const double f = (2.0 * x + others) / sum_inv_default - *mu0 +
                     dmu * (d_l - x);
    const double fprime = 2.0 / sum_inv_default - 2.0 * dmu;
    if (!(fprime > 0.0)) break;
    const double step = -f / fprime;
    x += step;
    if (std::abs(step) <= 1e-14 * std::max(std::abs(x), 1.0)) break;
  }
  if (x >= -d && x <= 2.0 * d && std::isfinite(payment(x)))
    return {x, false};
  return {found->x, false};
}

namespace detail {

inline EquilibriumOutcome no_equilibrium(std::string why) {
  EquilibriumOutcome out;
  out.status = EquilibriumStatus::NoEquilibrium;
  out.detail = std::move(why);
  return out;
}

}  // namespace detail

/// Numerical Stackelberg-Nash solve of the day-ahead MPM game: damped
/// sequential best responses of the leader loads, each anticipating the
/// follower equilibrium, until a fixed point (status Unique), a revisited
/// state (numerical nonexistence) or the iteration cap.
inline std::pair<EquilibriumOutcome, BestResponseTrace> solve_stackelberg_nash(
    const MarketScenario& s, const SolverConfig& config = {}) {
  config.validate();
  if (s.policy() != Policy::DayAheadMpm)
    throw regime_error("solve_stackelberg_nash: scenario policy is not da-mpm");
  if (s.behavior() != Behavior::PriceAnticipating)
    throw regime_error(
        "solve_stackelberg_nash: scenario behavior is not price-anticipating");

  BestResponseTrace trace;
  const int G = s.num_generators();
  const int L = s.num_loads();
  const double d = s.total_demand();
  const double sum_inv_default = s.sum_inverse_default();

  if (G < 3) {
    EquilibriumOutcome out;
    out.status = EquilibriumStatus::ConditionViolated;
    out.condition = ExistenceCondition{
        ExistenceCondition::Kind::MinGenerators, static_cast<double>(G), 3.0,
        false};
    out.detail = "follower game needs at least three generators";
    trace.detail = out.detail;
    return {std::move(out), std::move(trace)};
  }

  // Start from the competitive allocation, split in proportion to load size.
  const double dd_ce = sum_inv_default / s.sum_inverse_cost() * d;
  std::vector<double> x(L);
  for (int l = 0; l < L; ++l) x[l] = dd_ce * s.loads()[l].d / d;

  // Cap the sweep damping so the symmetric load mode stays contractive
  // as L grows (undamped responses overshoot for three or more loads).
  const double gamma = std::min(config.damping, 2.0 / (L + 1.0));

  std::vector<std::vector<double>> history;
  history.push_back(x);

  auto snapshot = [&](int iter, double change) {
    TraceRow row;
    row.iteration = iter;
    row.phase = "load-sweep";
    row.values = x;
    row.metric = change;
    const double dd = std::accumulate(x.begin(), x.end(), 0.0);
    row.lambda_d = dd / sum_inv_default;
    const auto inner = inner_generator_nash(dd, d - dd, s, config);
    if (inner.converged()) {
      row.lambda_r = inner.lambda_r;
      row.objectives.resize(L);
      for (int l = 0; l < L; ++l)
        row.objectives[l] =
            row.lambda_d * x[l] + row.lambda_r * (s.loads()[l].d - x[l]);
    }
    trace.add(std::move(row));
  };

  bool converged = false;
  for (int iter = 1; iter <= config.max_outer_iters; ++iter) {
    double change = 0.0;
    for (int l = 0; l < L; ++l) {
      std::vector<double> others;
      others.reserve(L - 1);
      for (int k = 0; k < L; ++k)
        if (k != l) others.push_back(x[k]);
      LoadResponse br;
      try {
        br = load_br_da_mpm(l, others, s, config);
      } catch (const solver_error& e) {
        trace.detail = e.what();
        snapshot(iter, std::numeric_limits<double>::quiet_NaN());
        return {detail::no_equilibrium(
                    std::string("numerical: leader best response failed: ") +
                    e.what()),
                std::move(trace)};
      }
      // The symmetric closed form is already the simultaneous optimum;
      // damping is only needed to stabilize the numeric search path.
      const double step = br.closed_form ? 1.0 : gamma;
      const double next = x[l] + step * (br.d_l_d - x[l]);
      change = std::max(change, std::abs(next - x[l]) /
                                    std::max(std::abs(next), kAbsTol));
      x[l] = next;
    }
    snapshot(iter, change);

    if (change <= config.tol_fixed_point) {
      converged = true;
      break;
    }
    // Revisiting an earlier state while still above tolerance means the
    // sweep is cycling, not converging. The revisit distance must also be
    // far below the current step, otherwise plain geometric convergence
    // (neighboring iterates shrinking toward the fixed point) would
    // trigger a false positive.
    for (size_t h = 0; h + 3 <= history.size(); ++h) {
      double dist = 0.0;
      for (int l = 0; l < L; ++l)
        dist = std::max(dist, std::abs(x[l] - history[h][l]) /
                                  std::max(std::abs(x[l]), 1.0));
      if (dist <= 1e-6 && dist <= 0.01 * change) {
        trace.cycle_detected = true;
        trace.detail = "best-response cycle detected";
        return {detail::no_equilibrium(
                    "numerical: best-response cycle, no fixed point"),
                std::move(trace)};
      }
    }
    history.push_back(x);
  }

  if (!converged) {
    trace.detail = "outer iteration cap reached";
    return {detail::no_equilibrium(
                "numerical: outer best-response loop did not converge"),
            std::move(trace)};
  }

  const double dd = std::accumulate(x.begin(), x.end(), 0.0);
  const double dr = d - dd;
  const auto inner = inner_generator_nash(dd, dr, s, config);
  if (!inner.converged()) {
    trace.detail = inner.detail;
    return {detail::no_equilibrium(
                "numerical: follower equilibrium failed at the leader fixed "
                "point (" + inner.detail + ")"),
            std::move(trace)};
  }
  trace.converged = true;

  StageAllocation a;
  a.lambda_d = dd / sum_inv_default;
  a.lambda_r = inner.lambda_r;
  std::vector<double> theta_d;
  for (const auto& g : s.generators()) {
    theta_d.push_back(1.0 / (g.c + g.eps));
    a.g_d.push_back((1.0 / (g.c + g.eps)) * a.lambda_d);
  }
  a.theta_d = std::move(theta_d);
  a.theta_r = inner.theta_r;
  for (double t : inner.theta_r) a.g_r.push_back(t * a.lambda_r);
  for (int l = 0; l < L; ++l) {
    a.d_d.push_back(x[l]);
    a.d_r.push_back(s.loads()[l].d - x[l]);
  }

  EquilibriumOutcome out;
  out.status = EquilibriumStatus::Unique;
  out.allocation = std::move(a);
  out.detail = "numerical fixed point of the leader-follower best responses";
  return {std::move(out), std::move(trace)};
}

/// Exhibits the loss of equilibrium under a real-time MPM policy:
/// alternating day-ahead best responses contract the day-ahead demand
/// geometrically to zero, and at the zero fixed point a load profits by
/// re-entering the day-ahead stage at the zero price of the even-split
/// rule. Each load-response row's metric is the composed-round ratio
/// d_l^d(next) / d^d(current) = (G−2)/((G−1)(L+1)).
inline BestResponseTrace probe_rt_mpm_nonexistence(const MarketScenario& s,
                                                   const SolverConfig& config = {}) {
  config.validate();
  if (s.policy() != Policy::RealTimeMpm)
    throw regime_error("probe_rt_mpm_nonexistence: scenario policy is not rt-mpm");
  if (s.behavior() != Behavior::PriceAnticipating)
    throw regime_error(
        "probe_rt_mpm_nonexistence: scenario behavior is not "
        "price-anticipating");

  BestResponseTrace trace;
  const int G = s.num_generators();
  const int L = s.num_loads();
  const double d = s.total_demand();
  const double sum_inv_default = s.sum_inverse_default();
  const double lambda_rt = d / sum_inv_default;

  if (G == 1) {
    trace.rule2_deviation = true;
    trace.detail =
        "one generator: it bids arbitrarily small day-ahead slopes while the "
        "load bids arbitrarily small quantities; all demand settles in the "
        "truthful real-time stage, after which a load gains by re-entering "
        "the zero-priced day-ahead stage (even-split rule)";
    return trace;
  }

  double dd = d;  // canonical start: everything day-ahead
  for (int round = 1; round <= config.probe_iters; ++round) {
    // Generators' day-ahead turning point given the current demand split.
    const double theta =
        1.0 / G * sum_inv_default * (G - 2.0) / (G - 1.0) * dd / d;
    TraceRow gen_row;
    gen_row.iteration = round;
    gen_row.phase = "gen-response";
    gen_row.values.assign(G, theta);
    gen_row.lambda_r = lambda_rt;
    if (theta != 0.0) gen_row.lambda_d = dd / (G * theta);
    trace.add(std::move(gen_row));

    // Loads' simultaneous optimum against those slopes.
    const double x = 1.0 / (L + 1.0) * (G * theta) / sum_inv_default * d;
    TraceRow load_row;
    load_row.iteration = round;
    load_row.phase = "load-response";
    load_row.values.assign(L, x);
    load_row.lambda_r = lambda_rt;
    load_row.metric = dd != 0.0 ? x / dd : 0.0;  // composed-round ratio
    trace.add(std::move(load_row));

    dd = L * x;
    if (dd <= 1e-14 * d) break;
  }

  // Fixed point d^d = 0, θ^d = 0: both stages priced at the real-time
  // default level by the zero-quantity rule. A load moving δ back into
  // the day-ahead faces the even-split zero price and saves λ^r·δ.
  const double delta = s.loads().front().d / 2.0;
  const double saving = lambda_rt * delta;
  trace.rule2_deviation = saving > 0.0;
  trace.detail =
      "day-ahead demand contracts to zero; the zero fixed point is not an "
      "equilibrium because a load re-entering the day-ahead stage pays the "
      "even-split zero price (saving " + std::to_string(saving) + ")";
  return trace;
}

}  // namespace tsm
