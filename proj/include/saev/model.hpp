#pragma once

// Mixed-integer model container shared by the relaxation engine, the
// branch-and-bound driver and every emitter in the dispatch stack.
//
// Conventions:
//  - minimization
//  - every structural variable carries finite lower/upper bounds
//  - objective = constant + sum_i c_i x_i + sum_k w_k (x_{v_k} - a_k)^2,
//    w_k >= 0, so the continuous relaxation is convex

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace saev {

enum class RowSense : std::uint8_t { le, ge, eq };

inline char sense_char(RowSense s) {
  switch (s) {
    case RowSense::le: return 'L';
    case RowSense::ge: return 'G';
    default: return 'E';
  }
}

struct ModelSpec {
  struct Variable {
    double lower = 0.0;
    double upper = 0.0;
    bool integral = false;
  };

  struct Row {
    std::vector<std::pair<int, double>> terms;
    RowSense sense = RowSense::le;
    double rhs = 0.0;
    std::string name;
  };

  // w * (x_var - center)^2
  struct QuadTerm {
    int var = -1;
    double weight = 0.0;
    double center = 0.0;
  };

  std::vector<Variable> vars;
  std::vector<Row> rows;
  std::vector<double> linear;
  std::vector<QuadTerm> quad;
  double objective_constant = 0.0;

  int add_variable(double lower, double upper, bool integral = false) {
    if (!(lower <= upper))
      throw std::invalid_argument("add_variable: lower > upper");
    vars.push_back({lower, upper, integral});
    linear.push_back(0.0);
    return static_cast<int>(vars.size()) - 1;
  }

  int add_binary() { return add_variable(0.0, 1.0, true); }

  void add_row(std::vector<std::pair<int, double>> terms, RowSense sense,
               double rhs, std::string name = {}) {
    for (auto& [v, c] : terms) check_var(v);
    rows.push_back({std::move(terms), sense, rhs, std::move(name)});
  }

  void add_linear_cost(int var, double coef) {
    check_var(var);
    linear[var] += coef;
  }

  void add_quadratic_cost(int var, double weight, double center) {
    check_var(var);
    if (weight < 0.0)
      throw std::invalid_argument("add_quadratic_cost: negative weight");
    if (weight > 0.0) quad.push_back({var, weight, center});
  }

  void fix_variable(int var, double value) {
    check_var(var);
    vars[var].lower = value;
    vars[var].upper = value;
  }

  int num_vars() const { return static_cast<int>(vars.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  int num_integer_vars() const {
    int n = 0;
    for (const auto& v : vars) n += v.integral ? 1 : 0;
    return n;
  }

  double objective_at(const std::vector<double>& x) const {
    double obj = objective_constant;
    for (int i = 0; i < num_vars(); ++i) obj += linear[i] * x[i];
    for (const auto& q : quad) {
      const double d = x[q.var] - q.center;
      obj += q.weight * d * d;
    }
    return obj;
  }

  // Largest bound/row/integrality violation of a candidate point.
  double max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (double v : x)
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    for (int i = 0; i < num_vars(); ++i) {
      worst = std::max(worst, vars[i].lower - x[i]);
      worst = std::max(worst, x[i] - vars[i].upper);
      if (vars[i].integral)
        worst = std::max(worst, std::fabs(x[i] - std::round(x[i])));
    }
    for (const auto& r : rows) {
      double act = 0.0;
      for (const auto& [v, c] : r.terms) act += c * x[v];
      switch (r.sense) {
        case RowSense::le: worst = std::max(worst, act - r.rhs); break;
        case RowSense::ge: worst = std::max(worst, r.rhs - act); break;
        case RowSense::eq: worst = std::max(worst, std::fabs(act - r.rhs)); break;
      }
    }
    return worst;
  }

  void validate() const {
    for (const auto& v : vars) {
      if (!std::isfinite(v.lower) || !std::isfinite(v.upper))
        throw std::invalid_argument("model variable with non-finite bound");
      if (v.lower > v.upper)
        throw std::invalid_argument("model variable with empty domain");
    }
    for (const auto& q : quad)
      if (q.var < 0 || q.var >= num_vars() || q.weight < 0.0)
        throw std::invalid_argument("bad quadratic term");
  }

  // Plain-text serialization, one item per line.  Used by the CLI model
  // dump and the round-trip tests; format documented in docs/file_formats.md.
  std::string dump() const {
    std::ostringstream os;
    os.precision(17);
    os << "saev-model 1\n";
    os << "const " << objective_constant << "\n";
    for (int i = 0; i < num_vars(); ++i) {
      os << "var " << vars[i].lower << " " << vars[i].upper << " "
         << (vars[i].integral ? "I" : "C") << " " << linear[i] << "\n";
    }
    for (const auto& q : quad)
      os << "quad " << q.var << " " << q.weight << " " << q.center << "\n";
    for (const auto& r : rows) {
      os << "row " << sense_char(r.sense) << " " << r.rhs << " "
         << r.terms.size();
      for (const auto& [v, c] : r.terms) os << " " << v << ":" << c;
      if (!r.name.empty()) os << " # " << r.name;
      os << "\n";
    }
    return os.str();
  }

  static ModelSpec parse(const std::string& text) {
    ModelSpec m;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("saev-model", 0) != 0)
      throw std::invalid_argument("model parse: bad header");
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "const") {
        ls >> m.objective_constant;
      } else if (tag == "var") {
        double lo, hi, c;
        std::string kind;
        ls >> lo >> hi >> kind >> c;
        int id = m.add_variable(lo, hi, kind == "I");
        m.linear[id] = c;
      } else if (tag == "quad") {
        QuadTerm q;
        ls >> q.var >> q.weight >> q.center;
        m.quad.push_back(q);
      } else if (tag == "row") {
        char sc;
        double rhs;
        std::size_t nt;
        ls >> sc >> rhs >> nt;
        Row r;
        r.rhs = rhs;
        r.sense = sc == 'L' ? RowSense::le : sc == 'G' ? RowSense::ge : RowSense::eq;
        for (std::size_t k = 0; k < nt; ++k) {
          std::string item;
          ls >> item;
          auto colon = item.find(':');
          r.terms.emplace_back(std::stoi(item.substr(0, colon)),
                               std::stod(item.substr(colon + 1)));
        }
        std::string hash;
        if (ls >> hash && hash == "#") std::getline(ls >> std::ws, r.name);
        m.rows.push_back(std::move(r));
      } else {
        throw std::invalid_argument("model parse: unknown tag " + tag);
      }
    }
    return m;
  }

 private:
  void check_var(int v) const {
    if (v < 0 || v >= num_vars())
      throw std::out_of_range("variable id out of range");
  }
};

enum class SolveStatus : std::uint8_t {
  optimal,
  infeasible,
  iteration_limit,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    default: return "iteration_limit";
  }
}

struct Solution {
  SolveStatus status = SolveStatus::iteration_limit;
  std::vector<double> x;
  double objective = std::numeric_limits<double>::infinity();
  // Certified lower bound on the optimum (box-Lagrangian of the final duals).
  double lower_bound = -std::numeric_limits<double>::infinity();
  long nodes = 0;
  int iterations = 0;
  double wall_seconds = 0.0;
};

struct SolveOptions {
  double feasibility_tol = 1e-6;
  double integrality_tol = 1e-5;
  double relative_gap = 1e-4;
  long node_limit = 200000;
  double time_limit_seconds = 0.0;  // 0 = no limit
  int ipm_iteration_limit = 200;
  // Penalty per unit constraint violation in the elastic relaxation; any
  // point whose elastic residual exceeds feasibility_tol is infeasible.
  double elastic_penalty = 1e7;
  // Abandon a relaxation once its certified bound reaches this value; the
  // returned point is then only good for pruning.  Set per node by the tree
  // search, infinity disables the shortcut.
  double bound_cutoff = std::numeric_limits<double>::infinity();
  const std::vector<double>* warm_start = nullptr;
};

}  // namespace saev
