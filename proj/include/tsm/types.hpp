#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsm {

/// Relative tolerance used for balance / identity checks throughout the
/// library, with an absolute floor for quantities near zero.
inline constexpr double kRelTol = 1e-9;
inline constexpr double kAbsTol = 1e-12;

/// Generators whose coefficients agree within this relative tolerance are
/// treated as homogeneous and qualify for the symmetric closed forms.
inline constexpr double kHomogeneityRtol = 1e-9;

/// True when |a − b| is within kRelTol of the larger magnitude (floored
/// by kAbsTol).
inline bool nearly_equal(double a, double b,
                         double rtol = kRelTol, double atol = kAbsTol) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= std::max(rtol * scale, atol);
}

struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation called on a scenario whose policy/behavior tags (or
/// homogeneity assumptions) it does not cover.
struct regime_error : std::logic_error {
  using std::logic_error::logic_error;
};

/// Degenerate clearing configuration (price rule needs data it was not
/// given).
struct clearing_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Allocation violates stage balance or per-participant identities.
struct allocation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One generator: true quadratic-cost coefficient c (cost c/2·g²) and the
/// operator's estimation error eps used by default bids.
struct GeneratorParams {
  double c = 0.0;
  double eps = 0.0;
};

/// One inelastic load: demand quantity in MW.
struct LoadParams {
  double d = 0.0;
};

enum class Policy { Standard, RealTimeMpm, DayAheadMpm };
enum class Behavior { PriceTaking, PriceAnticipating };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::Standard: return "standard";
    case Policy::RealTimeMpm: return "rt-mpm";
    case Policy::DayAheadMpm: return "da-mpm";
  }
  return "?";
}

inline const char* to_string(Behavior b) {
  return b == Behavior::PriceTaking ? "price-taking" : "price-anticipating";
}

/// A full problem instance: participant sets plus the policy regime and
/// behavior model under which it is to be solved. Immutable after
/// construction; validation happens once here so that every solver can
/// rely on c > 0, eps ≥ 0, d_l > 0 and non-empty participant lists.
class MarketScenario {
 public:
  MarketScenario(std::vector<GeneratorParams> generators,
                 std::vector<LoadParams> loads,
                 Policy policy, Behavior behavior)
      : generators_(std::move(generators)),
        loads_(std::move(loads)),
        policy_(policy),
        behavior_(behavior) {
    if (generators_.empty()) throw invalid_input("scenario needs at least one generator");
    if (loads_.empty()) throw invalid_input("scenario needs at least one load");
    for (const auto& g : generators_) {
      if (!std::isfinite(g.c) || g.c <= 0.0)
        throw invalid_input("generator cost coefficient must be finite and > 0");
      if (!std::isfinite(g.eps) || g.eps < 0.0)
        throw invalid_input("generator estimation error must be finite and >= 0");
    }
    for (const auto& l : loads_) {
      if (!std::isfinite(l.d) || l.d <= 0.0)
        throw invalid_input("load demand must be finite and > 0");
    }
  }

  const std::vector<GeneratorParams>& generators() const { return generators_; }
  const std::vector<LoadParams>& loads() const { return loads_; }
  Policy policy() const { return policy_; }
  Behavior behavior() const { return behavior_; }

  int num_generators() const { return static_cast<int>(generators_.size()); }
  int num_loads() const { return static_cast<int>(loads_.size()); }

  double total_demand() const {
    double d = 0.0;
    for (const auto& l : loads_) d += l.d;
    return d;
  }

  /// Σ c_j⁻¹ over generators.
  double sum_inverse_cost() const {
    double s = 0.0;
    for (const auto& g : generators_) s += 1.0 / g.c;
    return s;
  }

  /// Σ (c_j+ε_j)⁻¹ over generators (default-bid slopes).
  double sum_inverse_default() const {
    double s = 0.0;
    for (const auto& g : generators_) s += 1.0 / (g.c + g.eps);
    return s;
  }

  bool homogeneous_cost(double rtol = kHomogeneityRtol) const {
    const double c0 = generators_.front().c;
    for (const auto& g : generators_)
      if (std::abs(g.c - c0) > rtol * std::abs(c0)) return false;
    return true;
  }

  bool homogeneous_error(double rtol = kHomogeneityRtol) const {
    const double e0 = generators_.front().eps;
    for (const auto& g : generators_)
      if (std::abs(g.eps - e0) > std::max(rtol * std::abs(e0), kAbsTol)) return false;
    return true;
  }

  /// Common cost and common error, the assumption behind the symmetric
  /// Nash closed forms.
  bool homogeneous(double rtol = kHomogeneityRtol) const {
    return homogeneous_cost(rtol) && homogeneous_error(rtol);
  }

  MarketScenario with_policy(Policy p) const {
    return MarketScenario(generators_, loads_, p, behavior_);
  }
  MarketScenario with_behavior(Behavior b) const {
    return MarketScenario(generators_, loads_, policy_, b);
  }
  MarketScenario with_generators(std::vector<GeneratorParams> g) const {
    return MarketScenario(std::move(g), loads_, policy_, behavior_);
  }
  MarketScenario with_loads(std::vector<LoadParams> l) const {
    return MarketScenario(generators_, std::move(l), policy_, behavior_);
  }

 private:
  std::vector<GeneratorParams> generators_;
  std::vector<LoadParams> loads_;
  Policy policy_;
  Behavior behavior_;
};

/// Stage-wise bids, dispatches, demand allocations and clearing prices.
/// Slope vectors are absent for a stage that is not cleared through
/// supply-function bids (e.g. the real-time stage under a real-time MPM
/// policy, where the operator dispatches from default bids directly).
struct StageAllocation {
  std::optional<std::vector<double>> theta_d;  // day-ahead slopes, MW²/$
  std::optional<std::vector<double>> theta_r;  // real-time slopes, MW²/$
  std::vector<double> g_d, g_r;                // per-generator dispatch, MW
  std::vector<double> d_d, d_r;                // per-load allocation, MW
  double lambda_d = 0.0;                       // $/MW
  double lambda_r = 0.0;

  double day_ahead_demand() const {
    double s = 0.0;
    for (double x : d_d) s += x;
    return s;
  }
  double real_time_demand() const {
    double s = 0.0;
    for (double x : d_r) s += x;
    return s;
  }
  double day_ahead_supply() const {
    double s = 0.0;
    for (double x : g_d) s += x;
    return s;
  }
  double real_time_supply() const {
    double s = 0.0;
    for (double x : g_r) s += x;
    return s;
  }
  /// Net output of generator j over both stages.
  double output(int j) const { return g_d[j] + g_r[j]; }
};

enum class EquilibriumStatus {
  Unique,
  NonUniqueFamily,
  NoEquilibrium,
  ConditionViolated,
};

inline const char* to_string(EquilibriumStatus s) {
  switch (s) {
    case EquilibriumStatus::Unique: return "unique";
    case EquilibriumStatus::NonUniqueFamily: return "non-unique-family";
    case EquilibriumStatus::NoEquilibrium: return "no-equilibrium";
    case EquilibriumStatus::ConditionViolated: return "condition-violated";
  }
  return "?";
}

/// One of the participant-count requirements attached to the symmetric
/// Nash equilibria. `satisfied` applies the strictness the theorems
/// state (boundary cases are not satisfied).
struct ExistenceCondition {
  enum class Kind { MinGenerators, LoadCountBound };
  Kind kind;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

/// Result of an equilibrium constructor or solver. The allocation is
/// present exactly when the status is Unique or NonUniqueFamily; a
/// NonUniqueFamily allocation is the canonical representative and
/// `family` describes the remaining degrees of freedom.
struct EquilibriumOutcome {
  EquilibriumStatus status = EquilibriumStatus::NoEquilibrium;
  std::optional<StageAllocation> allocation;
  std::string detail;
  std::string family;
  std::optional<ExistenceCondition> condition;

  bool solved() const {
    return status == EquilibriumStatus::Unique ||
           status == EquilibriumStatus::NonUniqueFamily;
  }
};

/// Per-participant settlement plus aggregates. `normalized` is filled
/// when a benchmark settlement (typically the competitive equilibrium)
/// is supplied.
struct SettlementReport {
  std::vector<double> profit;   // per generator
  std::vector<double> payment;  // per load
  double social_cost = 0.0;
  double aggregate_profit = 0.0;
  double aggregate_payment = 0.0;

  struct Normalized {
    std::vector<double> profit;
    std::vector<double> payment;
    double aggregate_profit = 0.0;
    double aggregate_payment = 0.0;
  };
  std::optional<Normalized> normalized;
};

}  // namespace tsm
