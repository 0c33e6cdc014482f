#include <catch2/catch_amalgamated.hpp>

#include "saev/model.hpp"

using namespace saev;

TEST_CASE("model builds variables rows and objective") {
  ModelSpec m;
  int a = m.add_variable(0.0, 4.0);
  int b = m.add_binary();
  m.add_linear_cost(a, 2.0);
  m.add_linear_cost(a, 1.0);  // accumulates
  m.add_quadratic_cost(b, 3.0, 0.5);
  m.objective_constant = 7.0;
  m.add_row({{a, 1.0}, {b, -2.0}}, RowSense::le, 1.5, "cap");

  REQUIRE(m.num_vars() == 2);
  REQUIRE(m.num_rows() == 1);
  REQUIRE(m.num_integer_vars() == 1);
  REQUIRE(m.linear[a] == Catch::Approx(3.0));

  std::vector<double> x{2.0, 1.0};
  // 7 + 3*2 + 3*(1-0.5)^2 = 13.75
  REQUIRE(m.objective_at(x) == Catch::Approx(13.75));
  // row: 2 - 2 = 0 <= 1.5 ok
  REQUIRE(m.max_violation(x) == Catch::Approx(0.0));

  x = {4.5, 0.4};
  // bound violation 0.5, integrality violation 0.4, row 4.5-0.8=3.7 > 1.5
  REQUIRE(m.max_violation(x) == Catch::Approx(2.2));
}

TEST_CASE("model rejects bad input") {
  ModelSpec m;
  REQUIRE_THROWS(m.add_variable(1.0, 0.0));
  int a = m.add_variable(0.0, 1.0);
  REQUIRE_THROWS(m.add_quadratic_cost(a, -1.0, 0.0));
  REQUIRE_THROWS(m.add_linear_cost(5, 1.0));
  REQUIRE_THROWS(m.add_row({{9, 1.0}}, RowSense::le, 0.0));
}

TEST_CASE("model dump parse round trip") {
  ModelSpec m;
  int a = m.add_variable(-1.5, 2.5);
  int b = m.add_binary();
  int c = m.add_variable(0.0, 10.0);
  m.add_linear_cost(a, 0.125);
  m.add_linear_cost(c, -3.0);
  m.add_quadratic_cost(c, 1.75, 4.0);
  m.objective_constant = -0.5;
  m.add_row({{a, 1.0}, {b, 2.0}}, RowSense::le, 3.0, "r0");
  m.add_row({{b, 1.0}, {c, -1.0}}, RowSense::ge, -2.0);
  m.add_row({{a, 1.0}, {c, 1.0}}, RowSense::eq, 0.25, "balance");

  ModelSpec p = ModelSpec::parse(m.dump());
  REQUIRE(p.num_vars() == 3);
  REQUIRE(p.num_rows() == 3);
  REQUIRE(p.vars[0].lower == m.vars[0].lower);
  REQUIRE(p.vars[1].integral);
  REQUIRE_FALSE(p.vars[2].integral);
  REQUIRE(p.linear[2] == m.linear[2]);
  REQUIRE(p.quad.size() == 1);
  REQUIRE(p.quad[0].center == 4.0);
  REQUIRE(p.rows[1].sense == RowSense::ge);
  REQUIRE(p.rows[2].name == "balance");
  REQUIRE(p.dump() == m.dump());

  std::vector<double> x{0.5, 1.0, -0.25};
  REQUIRE(p.objective_at(x) == Catch::Approx(m.objective_at(x)));
}
