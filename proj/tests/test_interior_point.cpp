#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "saev/interior_point.hpp"

using namespace saev;

namespace {

// Test-side LP oracle: enumerate candidate bases (all n-subsets of rows and
// bound facets), solve each square system exactly, keep the best feasible
// vertex.  Exact for bounded LPs up to floating tolerance.
struct VertexOracle {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
};

VertexOracle lp_vertex_oracle(const ModelSpec& m) {
  const int n = m.num_vars();
  struct Facet {
    std::vector<double> a;
    double b;
  };
  std::vector<Facet> facets;
  for (const auto& row : m.rows) {
    Facet f;
    f.a.assign(n, 0.0);
    for (auto [v, c] : row.terms) f.a[v] += c;
    f.b = row.rhs;
    facets.push_back(f);
  }
  for (int i = 0; i < n; ++i) {
    Facet f;
    f.a.assign(n, 0.0);
    f.a[i] = 1.0;
    f.b = m.vars[i].lower;
    facets.push_back(f);
    f.b = m.vars[i].upper;
    facets.push_back(f);
  }

  VertexOracle out;
  const int nf = static_cast<int>(facets.size());
  std::vector<int> idx(n);
  auto check_point = [&](const Eigen::VectorXd& x) {
    std::vector<double> xv(x.data(), x.data() + n);
    if (m.max_violation(xv) > 1e-7) return;
    out.feasible = true;
    out.objective = std::min(out.objective, m.objective_at(xv));
  };
  // iterate n-combinations of facets
  std::vector<int> comb(n);
  for (int i = 0; i < n; ++i) comb[i] = i;
  if (nf < n) return out;
  while (true) {
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b(n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) A(r, c) = facets[comb[r]].a[c];
      b(r) = facets[comb[r]].b;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) check_point(lu.solve(b));
    int k = n - 1;
    while (k >= 0 && comb[k] == nf - n + k) --k;
    if (k < 0) break;
    ++comb[k];
    for (int j = k + 1; j < n; ++j) comb[j] = comb[j - 1] + 1;
  }
  return out;
}

ModelSpec random_lp(std::mt19937& rng) {
  std::uniform_int_distribution<int> nvars(2, 5), nrows(1, 6), coef(-3, 3),
      sense(0, 2);
  std::uniform_real_distribution<double> rhs(-4.0, 6.0);
  ModelSpec m;
  const int n = nvars(rng);
  for (int i = 0; i < n; ++i) {
    double lo = std::uniform_real_distribution<double>(-5.0, 0.0)(rng);
    double hi = lo + std::uniform_real_distribution<double>(0.5, 8.0)(rng);
    m.add_variable(lo, hi);
    m.add_linear_cost(i, coef(rng));
  }
  const int mr = nrows(rng);
  for (int r = 0; r < mr; ++r) {
    std::vector<std::pair<int, double>> terms;
    for (int i = 0; i < n; ++i) {
      int c = coef(rng);
      if (c != 0) terms.emplace_back(i, static_cast<double>(c));
    }
    if (terms.empty()) terms.emplace_back(0, 1.0);
    RowSense s = sense(rng) == 0   ? RowSense::le
                 : sense(rng) == 1 ? RowSense::ge
                                   : RowSense::eq;
    m.add_row(std::move(terms), s, rhs(rng));
  }
  return m;
}

}  // namespace

TEST_CASE("relaxation solves a one variable lp") {
  ModelSpec m;
  int x = m.add_variable(0.0, 10.0);
  m.add_linear_cost(x, 1.0);
  m.add_row({{x, 1.0}}, RowSense::ge, 2.0);
  Solution s = solve_relaxation(m);
  REQUIRE(s.status == SolveStatus::optimal);
  REQUIRE(s.objective == Catch::Approx(2.0).margin(1e-7));
  REQUIRE(s.x[0] == Catch::Approx(2.0).margin(1e-7));
  REQUIRE(s.lower_bound <= s.objective + 1e-7);
  REQUIRE(s.lower_bound >= s.objective - 1e-5);
}

TEST_CASE("relaxation minimizes a bound constrained quadratic") {
  ModelSpec m;
  int x = m.add_variable(0.0, 2.0);
  m.add_quadratic_cost(x, 1.0, 3.0);
  // a row is present but slack so the iterative path runs
  m.add_row({{x, 1.0}}, RowSense::le, 5.0);
  Solution s = solve_relaxation(m);
  REQUIRE(s.status == SolveStatus::optimal);
  REQUIRE(s.x[0] == Catch::Approx(2.0).margin(1e-6));
  REQUIRE(s.objective == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("relaxation without rows uses the boxed closed form") {
  ModelSpec m;
  int x = m.add_variable(-1.0, 2.0);
  int y = m.add_variable(0.0, 5.0);
  m.add_linear_cost(x, -1.0);
  m.add_quadratic_cost(y, 2.0, 1.5);
  Solution s = solve_relaxation(m);
  REQUIRE(s.status == SolveStatus::optimal);
  REQUIRE(s.x[0] == Catch::Approx(2.0));
  REQUIRE(s.x[1] == Catch::Approx(1.5));
  REQUIRE(s.objective == Catch::Approx(-2.0));
}

TEST_CASE("conflicting rows are reported infeasible") {
  ModelSpec m;
  int x = m.add_variable(0.0, 10.0);
  m.add_row({{x, 1.0}}, RowSense::le, 3.0);
  m.add_row({{x, 1.0}}, RowSense::ge, 5.0);
  Solution s = solve_relaxation(m);
  REQUIRE(s.status == SolveStatus::infeasible);
}

TEST_CASE("equality coupled quadratic matches dual bisection oracle") {
  // min sum w_i (x_i - a_i)^2  s.t.  sum x_i = s, x in box
  std::mt19937 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 3);
    std::vector<double> w(n), a(n), lo(n), hi(n);
    ModelSpec m;
    std::vector<std::pair<int, double>> terms;
    double boxsum_lo = 0.0, boxsum_hi = 0.0;
    for (int i = 0; i < n; ++i) {
      w[i] = 0.5 + (rng() % 100) / 25.0;
      a[i] = -2.0 + (rng() % 100) / 12.5;
      lo[i] = -1.0 - (rng() % 100) / 50.0;
      hi[i] = lo[i] + 1.0 + (rng() % 100) / 25.0;
      m.add_variable(lo[i], hi[i]);
      m.add_quadratic_cost(i, w[i], a[i]);
      terms.emplace_back(i, 1.0);
      boxsum_lo += lo[i];
      boxsum_hi += hi[i];
    }
    const double s =
        boxsum_lo + (boxsum_hi - boxsum_lo) * ((rng() % 1000) / 1000.0);
    m.add_row(terms, RowSense::eq, s);

    // oracle: x_i(lambda) = clamp(a_i - lambda/(2 w_i)); bisect on sum
    auto sum_at = [&](double lam) {
      double t = 0.0;
      for (int i = 0; i < n; ++i)
        t += std::clamp(a[i] - lam / (2.0 * w[i]), lo[i], hi[i]);
      return t;
    };
    double llo = -1e5, lhi = 1e5;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (llo + lhi);
      (sum_at(mid) > s ? llo : lhi) = mid;
    }
    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
      double xi = std::clamp(a[i] - 0.5 * (llo + lhi) / (2.0 * w[i]), lo[i], hi[i]);
      obj += w[i] * (xi - a[i]) * (xi - a[i]);
    }

    Solution sol = solve_relaxation(m);
    INFO("trial " << trial);
    REQUIRE(sol.status == SolveStatus::optimal);
    REQUIRE(sol.objective == Catch::Approx(obj).margin(1e-6));
  }
}

TEST_CASE("random lps agree with the vertex enumeration oracle") {
  int feasible_seen = 0, infeasible_seen = 0;
  for (unsigned seed = 1; seed <= 100; ++seed) {
    std::mt19937 rng(seed);
    ModelSpec m = random_lp(rng);
    VertexOracle vo = lp_vertex_oracle(m);
    Solution s = solve_relaxation(m);
    INFO("seed " << seed);
    if (!vo.feasible) {
      ++infeasible_seen;
      REQUIRE(s.status == SolveStatus::infeasible);
      continue;
    }
    ++feasible_seen;
    REQUIRE(s.status != SolveStatus::infeasible);
    REQUIRE(s.objective ==
            Catch::Approx(vo.objective).margin(1e-6 * (1.0 + std::fabs(vo.objective))));
    REQUIRE(s.lower_bound <= vo.objective + 1e-6 * (1.0 + std::fabs(vo.objective)));
    REQUIRE(m.max_violation(s.x) < 1e-6);
  }
  REQUIRE(feasible_seen > 30);
  REQUIRE(infeasible_seen > 3);
}

TEST_CASE("bound overrides reuse one workspace") {
  ModelSpec m;
  int x = m.add_variable(0.0, 4.0);
  int y = m.add_variable(0.0, 4.0);
  m.add_linear_cost(x, -1.0);
  m.add_linear_cost(y, -2.0);
  m.add_row({{x, 1.0}, {y, 1.0}}, RowSense::le, 5.0);
  IpmWorkspace ws(m);
  SolveOptions opt;
  Solution s1 = ws.solve(opt);
  REQUIRE(s1.objective == Catch::Approx(-9.0).margin(1e-6));
  // fix y = 0 through bound overrides
  Solution s2 = ws.solve_with_bounds(opt, {0.0, 0.0}, {4.0, 0.0});
  REQUIRE(s2.objective == Catch::Approx(-4.0).margin(1e-6));
  REQUIRE(s2.x[1] == Catch::Approx(0.0).margin(1e-9));
  // and restore
  Solution s3 = ws.solve(opt);
  REQUIRE(s3.objective == Catch::Approx(-9.0).margin(1e-6));
}
