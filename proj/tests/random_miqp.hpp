#pragma once

// Seeded random mixed-integer instances shared by the solver unit tests and
// the acceptance suite.  Sizes stay within the enumeration oracle contract.

#include <random>

#include "saev/model.hpp"

inline saev::ModelSpec random_miqp(unsigned seed) {
  using saev::ModelSpec;
  using saev::RowSense;
  std::mt19937 rng(seed);
  auto uniform = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  auto pick = [&](int a, int b) {
    return std::uniform_int_distribution<int>(a, b)(rng);
  };

  ModelSpec m;
  const int nbin = pick(2, 8);
  const int ncont = pick(0, 10);
  for (int i = 0; i < nbin; ++i) {
    m.add_binary();
    m.add_linear_cost(i, pick(-6, 6));
  }
  for (int i = 0; i < ncont; ++i) {
    const double lo = uniform(-3.0, 0.0);
    const int v = m.add_variable(lo, lo + uniform(0.5, 6.0));
    m.add_linear_cost(v, pick(-4, 4));
    if (pick(0, 2) == 0)
      m.add_quadratic_cost(v, uniform(0.2, 3.0), uniform(lo, lo + 3.0));
  }

  const int n = m.num_vars();
  const int nrows = pick(1, std::min(10, n));
  const bool force_conflict = pick(0, 11) == 0;
  for (int r = 0; r < nrows; ++r) {
    std::vector<std::pair<int, double>> terms;
    double mid = 0.0, span = 0.0;
    for (int i = 0; i < n; ++i) {
      const int c = pick(-3, 3);
      if (c == 0) continue;
      terms.emplace_back(i, static_cast<double>(c));
      const double a = c * m.vars[i].lower, b = c * m.vars[i].upper;
      mid += 0.5 * (a + b);
      span += 0.5 * std::fabs(b - a);
    }
    if (terms.empty()) terms.emplace_back(pick(0, n - 1), 1.0);
    const int s = pick(0, 5);
    const RowSense sense =
        s <= 2 ? RowSense::le : s <= 4 ? RowSense::ge : RowSense::eq;
    // keep most rows satisfiable so instances usually have an optimum
    double rhs = mid;
    switch (sense) {
      case RowSense::le: rhs = mid + uniform(-0.1, 0.9) * span; break;
      case RowSense::ge: rhs = mid - uniform(-0.1, 0.9) * span; break;
      case RowSense::eq: rhs = mid + uniform(-0.35, 0.35) * span; break;
    }
    m.add_row(std::move(terms), sense, rhs);
  }
  if (force_conflict) {
    // fractional window: feasible for the relaxation, empty over integers
    m.add_row({{0, 1.0}, {1, 1.0}}, RowSense::ge, 1.3);
    m.add_row({{0, 1.0}, {1, 1.0}}, RowSense::le, 1.7);
  }
  return m;
}
