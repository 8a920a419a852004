#include <catch2/catch_amalgamated.hpp>

#include "tsm/market.hpp"
#include "tsm/rng.hpp"

using namespace tsm;
using Catch::Approx;

namespace {

MarketScenario scenario(std::vector<double> c, std::vector<double> eps,
                        std::vector<double> loads,
                        Policy policy = Policy::Standard,
                        Behavior behavior = Behavior::PriceTaking) {
  std::vector<GeneratorParams> gens;
  for (size_t j = 0; j < c.size(); ++j)
    gens.push_back({c[j], eps.empty() ? 0.0 : eps[j]});
  std::vector<LoadParams> ls;
  for (double d : loads) ls.push_back({d});
  return MarketScenario(std::move(gens), std::move(ls), policy, behavior);
}

}  // namespace

TEST_CASE("scenario validation") {
  CHECK_THROWS_AS(scenario({}, {}, {1.0}), invalid_input);
  CHECK_THROWS_AS(scenario({1.0}, {0.0}, {}), invalid_input);
  CHECK_THROWS_AS(scenario({-1.0}, {0.0}, {1.0}), invalid_input);
  CHECK_THROWS_AS(scenario({0.0}, {0.0}, {1.0}), invalid_input);
  CHECK_THROWS_AS(scenario({1.0}, {-0.5}, {1.0}), invalid_input);
  CHECK_THROWS_AS(scenario({1.0}, {0.0}, {0.0}), invalid_input);

  const auto s = scenario({1.0, 2.0}, {0.5, 0.0}, {1.5, 0.5});
  CHECK(s.num_generators() == 2);
  CHECK(s.num_loads() == 2);
  CHECK(s.total_demand() == Approx(2.0));
  CHECK(s.sum_inverse_cost() == Approx(1.5));
  CHECK(s.sum_inverse_default() == Approx(1.0 / 1.5 + 0.5));
  CHECK_FALSE(s.homogeneous_cost());
  CHECK(scenario({2.0, 2.0}, {0.1, 0.1}, {1.0}).homogeneous());
}

TEST_CASE("clear_stage division and degenerate rules") {
  const double theta_plain[] = {1.0, 1.0};
  const auto r1 = clear_stage(theta_plain, 2.0);
  CHECK(r1.price == Approx(1.0));
  CHECK_FALSE(r1.even_split);

  const double theta_zero[] = {0.0, 0.0};
  const auto r2 = clear_stage(theta_zero, 0.0, 3.5);
  CHECK(r2.price == Approx(3.5));
  CHECK_FALSE(r2.even_split);

  const auto r3 = clear_stage(theta_zero, 4.0);
  CHECK(r3.price == 0.0);
  CHECK(r3.even_split);

  CHECK_THROWS_AS(clear_stage(theta_zero, 0.0), clearing_error);
  const double theta_bad[] = {std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(clear_stage(theta_bad, 1.0), invalid_input);
}

TEST_CASE("social planner closed form") {
  SECTION("symmetric") {
    const auto p = solve_social_planner(scenario({1.0, 1.0}, {}, {2.0}));
    CHECK(p.dispatch[0] == Approx(1.0));
    CHECK(p.dispatch[1] == Approx(1.0));
    CHECK(p.cost == Approx(1.0));
  }

  SECTION("two costs, verified by grid search") {
    const auto s = scenario({1.0, 2.0}, {}, {3.0});
    const auto p = solve_social_planner(s);
    CHECK(p.dispatch[0] == Approx(2.0));
    CHECK(p.dispatch[1] == Approx(1.0));
    CHECK(p.cost == Approx(3.0));

    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 3000; ++i) {
      const double g1 = 3.0 * i / 3000.0;
      const double split[] = {g1, 3.0 - g1};
      best = std::min(best, dispatch_cost(split, s));
    }
    CHECK(best >= p.cost - 1e-12);
    CHECK(best == Approx(p.cost).margin(1e-5));
  }

  SECTION("five equal generators split evenly") {
    const auto s = scenario(std::vector<double>(5, 0.1), {}, {99.4, 199.6});
    const auto p = solve_social_planner(s);
    for (double g : p.dispatch) CHECK(g == Approx(59.8));
  }

  SECTION("beats random feasible dispatches") {
    Rng rng(2024);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> c;
      for (int j = 0; j < 4; ++j) c.push_back(rng.uniform(0.05, 5.0));
      const auto s = scenario(c, {}, {rng.uniform(1.0, 50.0)});
      const auto p = solve_social_planner(s);
      const double d = s.total_demand();
      for (int t = 0; t < 1000; ++t) {
        std::vector<double> w;
        double sum = 0.0;
        for (int j = 0; j < 4; ++j) {
          w.push_back(rng.uniform(0.01, 1.0));
          sum += w.back();
        }
        for (double& x : w) x *= d / sum;
        CHECK(dispatch_cost(w, s) >= p.cost - 1e-9 * p.cost);
      }
    }
  }
}

TEST_CASE("settlement accounting") {
  SECTION("equal prices make the stage split irrelevant") {
    const auto s = scenario({1.0, 1.0}, {}, {2.0});
    StageAllocation a;
    a.lambda_d = 1.0;
    a.lambda_r = 1.0;
    a.g_d = {0.5, 0.5};
    a.g_r = {0.5, 0.5};
    a.d_d = {1.0};
    a.d_r = {1.0};
    const auto rep = settle(a, s);
    CHECK(rep.profit[0] == Approx(0.5));
    CHECK(rep.profit[1] == Approx(0.5));
    CHECK(rep.payment[0] == Approx(2.0));
    CHECK(rep.social_cost == Approx(1.0));
    CHECK(rep.aggregate_profit ==
          Approx(rep.aggregate_payment - rep.social_cost));

    // Same totals, different (balanced) split, same prices: identical
    // settlement.
    StageAllocation b = a;
    b.g_d = {0.2, 0.5};
    b.g_r = {0.8, 0.5};
    b.d_d = {0.7};
    b.d_r = {1.3};
    const auto rep2 = settle(b, s);
    CHECK(rep2.payment[0] == Approx(rep.payment[0]));
    CHECK(rep2.profit[0] == Approx(rep.profit[0]));
    CHECK(rep2.profit[1] == Approx(rep.profit[1]));
  }

  SECTION("imbalance raises") {
    const auto s = scenario({1.0}, {}, {1.0});
    StageAllocation a;
    a.lambda_d = 1.0;
    a.lambda_r = 1.0;
    a.g_d = {0.9};
    a.g_r = {0.0};
    a.d_d = {1.0};
    a.d_r = {0.0};
    CHECK_THROWS_AS(settle(a, s), allocation_error);
  }

  SECTION("revenue identity on random balanced allocations") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
      const int G = rng.uniform_int(1, 5);
      const int L = rng.uniform_int(1, 4);
      std::vector<double> c, loads;
      for (int j = 0; j < G; ++j) c.push_back(rng.uniform(0.1, 3.0));
      for (int l = 0; l < L; ++l) loads.push_back(rng.uniform(0.5, 10.0));
      const auto s = scenario(c, {}, loads);

      StageAllocation a;
      a.lambda_d = rng.uniform(0.1, 5.0);
      a.lambda_r = rng.uniform(0.1, 5.0);
      double dd = 0.0;
      for (int l = 0; l < L; ++l) {
        const double x = rng.uniform(-0.5, 1.5) * loads[l];
        a.d_d.push_back(x);
        a.d_r.push_back(loads[l] - x);
        dd += x;
      }
      const double d = s.total_demand();
      double gd_sum = 0.0;
      for (int j = 0; j < G; ++j) {
        const double share = (j == G - 1) ? dd - gd_sum : dd / G;
        a.g_d.push_back(share);
        gd_sum += share;
      }
      double gr_sum = 0.0;
      for (int j = 0; j < G; ++j) {
        const double share = (j == G - 1) ? (d - dd) - gr_sum : (d - dd) / G;
        a.g_r.push_back(share);
        gr_sum += share;
      }

      const auto rep_ = settle(a, s);
      double revenue = 0.0;
      for (int j = 0; j < G; ++j)
        revenue += a.lambda_d * a.g_d[j] + a.lambda_r * a.g_r[j];
      CHECK(rep_.aggregate_payment == Approx(revenue).epsilon(1e-9));
      CHECK(rep_.aggregate_profit ==
            Approx(rep_.aggregate_payment - rep_.social_cost).epsilon(1e-9));
    }
  }
}
