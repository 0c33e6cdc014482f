#include <catch2/catch_amalgamated.hpp>

#include "random_miqp.hpp"
#include "saev/solver.hpp"

using namespace saev;

TEST_CASE("bound tightening clips boxes and rounds integer domains") {
  ModelSpec m;
  int x = m.add_variable(0.0, 5.0);
  int y = m.add_variable(0.0, 5.0, true);
  m.add_row({{x, 2.0}, {y, 3.0}}, RowSense::le, 6.0);
  std::vector<double> lo{0.0, 0.0}, up{5.0, 5.0};
  REQUIRE(tighten_bounds(m, lo, up));
  REQUIRE(up[x] == Catch::Approx(3.0).margin(1e-8));
  REQUIRE(up[y] == Catch::Approx(2.0));

  // forcing row makes the domain empty
  m.add_row({{x, 1.0}}, RowSense::ge, 4.0);
  lo = {0.0, 0.0};
  up = {5.0, 5.0};
  REQUIRE_FALSE(tighten_bounds(m, lo, up));
}

TEST_CASE("branch and bound solves a knapsack") {
  // max 6a+5b+4c+3d st 4a+3b+2c+1.5d <= 7: optimum b,c,d with value 12
  ModelSpec m;
  const double v[] = {6, 5, 4, 3}, w[] = {4, 3, 2, 1.5};
  std::vector<std::pair<int, double>> cap;
  for (int i = 0; i < 4; ++i) {
    m.add_binary();
    m.add_linear_cost(i, -v[i]);
    cap.emplace_back(i, w[i]);
  }
  m.add_row(cap, RowSense::le, 7.0);
  Solution s = branch_and_bound(m);
  REQUIRE(s.status == SolveStatus::optimal);
  REQUIRE(s.objective == Catch::Approx(-12.0).margin(1e-7));
  REQUIRE(s.x[0] == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(s.x[1] == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(s.lower_bound >= -12.0 - 1e-6);
}

TEST_CASE("general integer variables branch correctly") {
  ModelSpec m;
  int x = m.add_variable(0.0, 5.0, true);
  m.add_linear_cost(x, -1.0);
  m.add_row({{x, 2.0}}, RowSense::le, 7.0);
  Solution s = branch_and_bound(m);
  REQUIRE(s.status == SolveStatus::optimal);
  REQUIRE(s.x[0] == Catch::Approx(3.0));
  REQUIRE(s.objective == Catch::Approx(-3.0).margin(1e-8));
}

TEST_CASE("integer quadratic rounds to the better lattice point") {
  ModelSpec m;
  int x = m.add_variable(0.0, 5.0, true);
  m.add_quadratic_cost(x, 1.0, 2.6);
  m.add_row({{x, 1.0}}, RowSense::le, 5.0);
  Solution s = branch_and_bound(m);
  REQUIRE(s.status == SolveStatus::optimal);
  REQUIRE(s.x[0] == Catch::Approx(3.0));
  REQUIRE(s.objective == Catch::Approx(0.16).margin(1e-7));
}

TEST_CASE("relaxation feasible but integer infeasible window") {
  ModelSpec m;
  m.add_binary();
  m.add_binary();
  m.add_row({{0, 1.0}, {1, 1.0}}, RowSense::ge, 1.3);
  m.add_row({{0, 1.0}, {1, 1.0}}, RowSense::le, 1.7);
  Solution bb = branch_and_bound(m);
  Solution en = enumerate_oracle(m);
  REQUIRE(bb.status == SolveStatus::infeasible);
  REQUIRE(en.status == SolveStatus::infeasible);
}

TEST_CASE("no integer variables reduces to the relaxation") {
  ModelSpec m;
  int x = m.add_variable(0.0, 4.0);
  m.add_linear_cost(x, -2.0);
  m.add_row({{x, 1.0}}, RowSense::le, 3.0);
  Solution bb = branch_and_bound(m);
  Solution rel = solve_relaxation(m);
  REQUIRE(bb.status == SolveStatus::optimal);
  REQUIRE(bb.objective == Catch::Approx(rel.objective).margin(1e-8));
  Solution en = enumerate_oracle(m);
  REQUIRE(en.objective == Catch::Approx(rel.objective).margin(1e-8));
}

TEST_CASE("warm start seeds the incumbent") {
  ModelSpec m;
  const double v[] = {6, 5, 4, 3}, w[] = {4, 3, 2, 1.5};
  std::vector<std::pair<int, double>> cap;
  for (int i = 0; i < 4; ++i) {
    m.add_binary();
    m.add_linear_cost(i, -v[i]);
    cap.emplace_back(i, w[i]);
  }
  m.add_row(cap, RowSense::le, 7.0);
  std::vector<double> warm{0.0, 1.0, 1.0, 1.0};
  SolveOptions opt;
  opt.warm_start = &warm;
  Solution s = branch_and_bound(m, opt);
  REQUIRE(s.status == SolveStatus::optimal);
  REQUIRE(s.objective == Catch::Approx(-12.0).margin(1e-7));
}

TEST_CASE("node limit reports a truncated search") {
  // knapsack whose relaxation root stays fractional after tightening
  ModelSpec m;
  const double v[] = {6, 5, 4, 3}, w[] = {4, 3, 2, 1.5};
  std::vector<std::pair<int, double>> cap;
  for (int i = 0; i < 4; ++i) {
    m.add_binary();
    m.add_linear_cost(i, -v[i]);
    cap.emplace_back(i, w[i]);
  }
  m.add_row(cap, RowSense::le, 7.0);
  SolveOptions opt;
  opt.node_limit = 1;
  Solution s = branch_and_bound(m, opt);
  REQUIRE(s.status == SolveStatus::iteration_limit);
  REQUIRE(s.nodes >= 1);
}

TEST_CASE("branch and bound matches enumeration on random instances") {
  SolveOptions opt;
  opt.relative_gap = 1e-9;
  int optimal = 0, infeasible = 0;
  for (unsigned seed = 1; seed <= 50; ++seed) {
    ModelSpec m = random_miqp(seed);
    Solution bb = branch_and_bound(m, opt);
    Solution en = enumerate_oracle(m, opt);
    INFO("seed " << seed);
    REQUIRE(bb.status == en.status);
    if (en.status == SolveStatus::optimal) {
      ++optimal;
      REQUIRE(bb.objective ==
              Catch::Approx(en.objective)
                  .margin(1e-6 * (1.0 + std::fabs(en.objective))));
      REQUIRE(m.max_violation(bb.x) < 1e-5);
    } else {
      ++infeasible;
    }
  }
  REQUIRE(optimal >= 25);
  REQUIRE(infeasible >= 1);
}
