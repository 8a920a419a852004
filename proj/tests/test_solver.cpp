#include <catch2/catch_amalgamated.hpp>

#include "tsm/audit.hpp"
#include "tsm/closed_form.hpp"
#include "tsm/rng.hpp"
#include "tsm/solver.hpp"

using namespace tsm;
using Catch::Approx;

namespace {

MarketScenario homogeneous(int G, int L, double c, double eps, double d,
                           Policy policy = Policy::DayAheadMpm,
                           Behavior behavior = Behavior::PriceAnticipating) {
  return MarketScenario(std::vector<GeneratorParams>(G, {c, eps}),
                        std::vector<LoadParams>(L, {d / L}), policy, behavior);
}

MarketScenario heterogeneous(std::vector<double> c, std::vector<double> eps,
                             std::vector<double> loads,
                             Policy policy = Policy::DayAheadMpm,
                             Behavior behavior = Behavior::PriceAnticipating) {
  std::vector<GeneratorParams> gens;
  for (size_t j = 0; j < c.size(); ++j)
    gens.push_back({c[j], eps.empty() ? 0.0 : eps[j]});
  std::vector<LoadParams> ls;
  for (double d : loads) ls.push_back({d});
  return MarketScenario(std::move(gens), std::move(ls), policy, behavior);
}

void expect_allocations_close(const StageAllocation& a,
                              const StageAllocation& b, double rtol) {
  CHECK(a.lambda_d == Approx(b.lambda_d).epsilon(rtol));
  CHECK(a.lambda_r == Approx(b.lambda_r).epsilon(rtol));
  for (size_t j = 0; j < a.g_d.size(); ++j) {
    CHECK(a.g_d[j] == Approx(b.g_d[j]).epsilon(rtol));
    CHECK(a.g_r[j] == Approx(b.g_r[j]).epsilon(rtol));
    CHECK((*a.theta_r)[j] == Approx((*b.theta_r)[j]).epsilon(rtol));
  }
  for (size_t l = 0; l < a.d_d.size(); ++l) {
    CHECK(a.d_d[l] == Approx(b.d_d[l]).epsilon(rtol));
    CHECK(a.d_r[l] == Approx(b.d_r[l]).epsilon(rtol));
  }
}

}  // namespace

TEST_CASE("config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.damping = 0.0;
  CHECK_THROWS_AS(c.validate(), invalid_input);
  c = SolverConfig{};
  c.tol_fixed_point = 1e-2;  // above the contract ceiling
  CHECK_THROWS_AS(c.validate(), invalid_input);
  c = SolverConfig{};
  c.max_inner_iters = 0;
  CHECK_THROWS_AS(c.validate(), invalid_input);
}

TEST_CASE("generator best response") {
  const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0);

  SECTION("fixed point of the symmetric equilibrium") {
    const std::vector<double> others(3, 1.0 / 6.0);
    const auto br = generator_br_da_mpm(0, others, 0.75, 0.25, s);
    CHECK(br.theta_r == Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(br.is_maximizer);
    // first-order residual at the returned point
    const double T = 0.5;
    const double cq = 1.0 * (0.75 / 4.0);
    const double resid = detail::br_m(0.25, cq, T) -
                         detail::br_n(0.25, cq, 1.0, T) * br.theta_r;
    CHECK(std::abs(resid) < 1e-10);
  }

  SECTION("reproduces the symmetric turning point") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
      const int G = rng.uniform_int(3, 12);
      const double c = rng.uniform(0.05, 4.0);
      const double d = rng.uniform(1.0, 50.0);
      const double dr = rng.uniform(0.05, 0.6) * d;
      const auto sc = homogeneous(G, 1, c, 0.0, d);
      const double turning = (G - 2.0) / (G - 1.0) * dr / (c * d);
      const std::vector<double> others(G - 1, turning);
      const auto br = generator_br_da_mpm(0, others, d - dr, dr, sc);
      CHECK(br.theta_r == Approx(turning).epsilon(1e-10));
      CHECK(br.is_maximizer);
    }
  }

  SECTION("zero real-time demand reports the degenerate branch") {
    const std::vector<double> others(3, 0.1);
    const auto br = generator_br_da_mpm(0, others, 1.0, 0.0, s);
    CHECK(br.zero_demand_branch);
    CHECK(br.theta_r == 0.0);
  }

  SECTION("negative demand: the symmetric turning point is no maximum") {
    // With negative real-time demand the symmetric stationary slope is
    // negative and sits at a profit minimum, so no symmetric equilibrium.
    const double turning = 2.0 / 3.0 * (-0.1) / 1.0;
    const std::vector<double> others(3, turning);
    const auto br = generator_br_da_mpm(0, others, 1.1, -0.1, s);
    CHECK(br.theta_r == Approx(turning));
    CHECK(br.second_order > 0.0);
    CHECK_FALSE(br.is_maximizer);
  }
}

TEST_CASE("real-time follower equilibrium") {
  SolverConfig config;

  SECTION("homogeneous case matches the closed form") {
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0);
    const auto inner = inner_generator_nash(0.75, 0.25, s, config);
    REQUIRE(inner.converged());
    for (double t : inner.theta_r) CHECK(t == Approx(1.0 / 6.0));
    CHECK(inner.lambda_r == Approx(0.375));
    for (double so : inner.second_order) CHECK(so < 0.0);
  }

  SECTION("heterogeneous costs: first-order residuals certify the point") {
    const auto s = heterogeneous({0.09, 0.1, 0.11}, {}, {1.0});
    const auto inner = inner_generator_nash(0.9, 0.1, s, config);
    REQUIRE(inner.converged());
    double S = 0.0;
    for (double t : inner.theta_r) S += t;
    for (int j = 0; j < 3; ++j) {
      const double nj = detail::br_n(
          0.1, s.generators()[j].c * (1.0 / (s.generators()[j].c) /
                                      s.sum_inverse_default() * 0.9),
          s.generators()[j].c, S - inner.theta_r[j]);
      CHECK(std::abs(inner.foc_residual[j]) <
            1e-8 * std::abs(nj * inner.theta_r[j]));
      CHECK(inner.second_order[j] < 0.0);
    }
    CHECK(inner.lambda_r == Approx(0.1 / S));
  }

  SECTION("two generators have no interior equilibrium") {
    const auto s = homogeneous(2, 1, 1.0, 0.0, 1.0);
    const auto inner = inner_generator_nash(0.75, 0.25, s, config);
    CHECK(inner.status == RealTimeNash::Status::NoEquilibrium);
  }

  SECTION("negative and zero demand branches") {
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0);
    CHECK(inner_generator_nash(1.1, -0.1, s, config).status ==
          RealTimeNash::Status::NoEquilibrium);
    CHECK(inner_generator_nash(1.0, 0.0, s, config).status ==
          RealTimeNash::Status::ZeroDemand);
  }
}

TEST_CASE("leader best response") {
  SolverConfig config;

  SECTION("symmetric closed form") {
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0);
    const auto br = load_br_da_mpm(0, {}, s, config);
    CHECK(br.closed_form);
    CHECK(br.d_l_d == Approx(0.75));
  }

  SECTION("numeric path agrees with the closed form") {
    SolverConfig numeric = config;
    numeric.force_numeric_load_br = true;
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0);
    const auto br = load_br_da_mpm(0, {}, s, numeric);
    CHECK_FALSE(br.closed_form);
    CHECK(br.d_l_d == Approx(0.75).epsilon(1e-8));
  }

  SECTION("payment at the response is minimal over a fine grid") {
    SolverConfig numeric = config;
    numeric.force_numeric_load_br = true;
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0);
    const auto br = load_br_da_mpm(0, {}, s, numeric);
    auto payment = [&](double x) {
      const double lam_d = x / s.sum_inverse_default();
      const auto inner = inner_generator_nash(x, 1.0 - x, s, numeric);
      if (!inner.converged())
        return std::numeric_limits<double>::infinity();
      return lam_d * x + inner.lambda_r * (1.0 - x);
    };
    const double base = payment(br.d_l_d);
    for (int i = 0; i < 1000; ++i) {
      const double x = -1.0 + 3.0 * i / 999.0;
      CHECK(payment(x) >= base - 1e-8 * std::abs(base));
    }
  }

  SECTION("large estimation error shrinks the day-ahead allocation") {
    // eps = 9c scales the closed form by c/(c+eps) = 0.1
    const auto s = homogeneous(4, 1, 1.0, 9.0, 1.0);
    const auto br = load_br_da_mpm(0, {}, s, config);
    CHECK(br.d_l_d == Approx(0.1 * 0.75));
    double prev = 1.0;
    for (double eps : {0.0, 0.5, 1.0, 4.0, 9.0}) {
      const auto cur =
          load_br_da_mpm(0, {}, homogeneous(4, 1, 1.0, eps, 1.0), config);
      CHECK(cur.d_l_d < prev + 1e-12);
      prev = cur.d_l_d;
    }
  }

  SECTION("many generators push the allocation toward d/2") {
    const auto s = homogeneous(100, 1, 1.0, 0.0, 1.0);
    const auto br = load_br_da_mpm(0, {}, s, config);
    CHECK(br.d_l_d == Approx(0.5 * 99.0 / 98.0));
  }

  SECTION("fewer than three generators leaves the leader undefined") {
    const auto s = homogeneous(2, 1, 1.0, 0.0, 1.0);
    CHECK_THROWS_AS(load_br_da_mpm(0, {}, s, config), solver_error);
  }
}

TEST_CASE("Stackelberg-Nash solve") {
  SolverConfig config;

  SECTION("matches the symmetric closed form") {
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0);
    const auto cf = nash_da_mpm_symmetric(s);
    const auto [out, trace] = solve_stackelberg_nash(s, config);
    REQUIRE(out.status == EquilibriumStatus::Unique);
    CHECK(trace.converged);
    expect_allocations_close(*out.allocation, *cf.allocation, 1e-6);

    SolverConfig numeric = config;
    numeric.force_numeric_load_br = true;
    const auto [out2, trace2] = solve_stackelberg_nash(s, numeric);
    REQUIRE(out2.status == EquilibriumStatus::Unique);
    expect_allocations_close(*out2.allocation, *cf.allocation, 1e-6);
  }

  SECTION("forced numeric path reproduces the closed form across cases") {
    Rng rng(31);
    SolverConfig numeric = config;
    numeric.force_numeric_load_br = true;
    for (int rep = 0; rep < 8; ++rep) {
      const int G = rng.uniform_int(4, 9);
      const int L = rng.uniform_int(1, std::min(4, G - 3));
      const double c = rng.uniform(0.05, 2.0);
      const double eps = rng.uniform(0.0, c);
      const double d = rng.uniform(1.0, 400.0);
      const auto s = homogeneous(G, L, c, eps, d);
      const auto cf = nash_da_mpm_symmetric(s);
      REQUIRE(cf.status == EquilibriumStatus::Unique);
      const auto [out, trace] = solve_stackelberg_nash(s, numeric);
      REQUIRE(out.status == EquilibriumStatus::Unique);
      expect_allocations_close(*out.allocation, *cf.allocation, 1e-6);
    }
  }

  SECTION("study base case with heterogeneous loads") {
    const auto s = heterogeneous(std::vector<double>(5, 0.1), {},
                                 {99.4, 199.6});
    const auto [out, trace] = solve_stackelberg_nash(s, config);
    REQUIRE(out.status == EquilibriumStatus::Unique);
    const auto ce = competitive_da_mpm(s.with_behavior(Behavior::PriceTaking));
    const auto bench =
        settle(*ce.allocation, s.with_behavior(Behavior::PriceTaking));
    const auto rep = settle(*out.allocation, s, &bench);
    // the smaller load pays under the competitive benchmark, the larger
    // above it
    CHECK(rep.normalized->payment[0] < 1.0);
    CHECK(rep.normalized->payment[1] > 1.0);
    const double gm1 = 4.0, gm2 = 3.0;
    const double expect_small =
        gm1 / gm2 * (1.0 - 1.0 / 9.0 * gm1 / gm2 * 299.0 / 99.4);
    CHECK(rep.normalized->payment[0] == Approx(expect_small).epsilon(1e-6));
  }

  SECTION("heterogeneous generators: certified interior point") {
    const auto s = heterogeneous({0.09, 0.095, 0.1, 0.105, 0.11}, {},
                                 {99.4, 199.6});
    const auto [out, trace] = solve_stackelberg_nash(s, config);
    REQUIRE(out.status == EquilibriumStatus::Unique);
    CHECK(trace.converged);
    for (int l = 0; l < 2; ++l) {
      const auto audit =
          audit::load_day_ahead_deviation(s, *out.allocation, l, 251, config);
      CHECK(audit.best_gain_rel < 1e-8);
    }
    for (int j = 0; j < 5; ++j) {
      const auto audit =
          audit::generator_real_time_deviation(s, *out.allocation, j, 251);
      CHECK(audit.best_gain_rel < 1e-8);
    }
  }

  SECTION("boundary load count reports numerical nonexistence") {
    const auto s = homogeneous(4, 2, 1.0, 0.0, 1.0);
    const auto [out, trace] = solve_stackelberg_nash(s, config);
    CHECK(out.status == EquilibriumStatus::NoEquilibrium);
    CHECK_FALSE(trace.converged);
  }

  SECTION("two generators reports the violated condition") {
    const auto s = homogeneous(2, 1, 1.0, 0.0, 1.0);
    const auto [out, trace] = solve_stackelberg_nash(s, config);
    CHECK(out.status == EquilibriumStatus::ConditionViolated);
  }

  SECTION("identical runs produce identical traces") {
    const auto s = heterogeneous({0.09, 0.1, 0.11, 0.1, 0.1}, {},
                                 {99.4, 199.6});
    const auto [out1, trace1] = solve_stackelberg_nash(s, config);
    const auto [out2, trace2] = solve_stackelberg_nash(s, config);
    REQUIRE(trace1.rows.size() == trace2.rows.size());
    for (size_t i = 0; i < trace1.rows.size(); ++i) {
      REQUIRE(trace1.rows[i].values.size() == trace2.rows[i].values.size());
      for (size_t k = 0; k < trace1.rows[i].values.size(); ++k)
        CHECK(trace1.rows[i].values[k] == trace2.rows[i].values[k]);
    }
  }
}

TEST_CASE("real-time MPM nonexistence probe") {
  SolverConfig config;

  SECTION("contraction ratio and collapse") {
    for (auto [G, L] : std::vector<std::pair<int, int>>{
             {4, 1}, {3, 1}, {5, 2}, {8, 4}, {12, 2}}) {
      const auto s = homogeneous(G, L, 0.1, 0.02, 299.0, Policy::RealTimeMpm,
                                 Behavior::PriceAnticipating);
      const auto trace = probe_rt_mpm_nonexistence(s, config);
      const double expect = (G - 2.0) / ((G - 1.0) * (L + 1.0));
      double prev_dd = 299.0;
      int rounds = 0;
      for (const auto& row : trace.rows) {
        if (row.phase != "load-response") continue;
        ++rounds;
        CHECK(row.metric == Approx(expect).margin(1e-12));
        double dd = 0.0;
        for (double v : row.values) dd += v;
        CHECK(dd < prev_dd);
        prev_dd = dd;
      }
      CHECK(rounds >= 2);
      CHECK(prev_dd < 1e-8 * 299.0);
      CHECK(trace.rule2_deviation);
      CHECK_FALSE(trace.converged);
    }
  }

  SECTION("one generator takes the dedicated branch") {
    const auto s = homogeneous(1, 1, 1.0, 0.0, 1.0, Policy::RealTimeMpm,
                               Behavior::PriceAnticipating);
    const auto trace = probe_rt_mpm_nonexistence(s, config);
    CHECK(trace.rule2_deviation);
    CHECK(trace.detail.find("one generator") != std::string::npos);
  }

  SECTION("two generators collapse immediately") {
    const auto s = homogeneous(2, 1, 1.0, 0.0, 1.0, Policy::RealTimeMpm,
                               Behavior::PriceAnticipating);
    const auto trace = probe_rt_mpm_nonexistence(s, config);
    REQUIRE(!trace.rows.empty());
    double dd = 0.0;
    for (const auto& row : trace.rows)
      if (row.phase == "load-response")
        for (double v : row.values) dd += v;
    CHECK(dd == 0.0);
  }

  SECTION("regime guard") {
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0, Policy::DayAheadMpm,
                               Behavior::PriceAnticipating);
    CHECK_THROWS_AS(probe_rt_mpm_nonexistence(s, config), regime_error);
  }
}

TEST_CASE("deviation audits ratify the closed forms") {
  SolverConfig config;

  SECTION("standard-market Nash point") {
    const auto s = homogeneous(4, 1, 1.0, 0.0, 1.0, Policy::Standard,
                               Behavior::PriceAnticipating);
    const auto out = nash_standard(s);
    const auto gen =
        audit::generator_real_time_deviation(s, *out.allocation, 0, 501);
    CHECK(gen.best_gain_rel < 1e-8);
    const auto load =
        audit::load_day_ahead_deviation(s, *out.allocation, 0, 501, config);
    CHECK(load.best_gain_rel < 1e-8);
  }

  SECTION("day-ahead MPM Nash point") {
    const auto s = homogeneous(5, 2, 0.5, 0.1, 10.0);
    const auto out = nash_da_mpm_symmetric(s);
    REQUIRE(out.status == EquilibriumStatus::Unique);
    for (int j = 0; j < 5; ++j) {
      const auto gen =
          audit::generator_real_time_deviation(s, *out.allocation, j, 501);
      CHECK(gen.best_gain_rel < 1e-8);
    }
    for (int l = 0; l < 2; ++l) {
      const auto load =
          audit::load_day_ahead_deviation(s, *out.allocation, l, 501, config);
      CHECK(load.best_gain_rel < 1e-8);
    }
  }
}
