#pragma once

// Branch and bound on top of the interior-point relaxation engine, plus an
// exhaustive enumeration oracle for small integer sections.
//
// Search policy (deterministic by construction):
//  - branch on the most fractional integer variable, ties to the lowest id
//  - depth-first dive following the child nearest the relaxation value
//  - on dive termination resume from the open node with the best bound
//  - activity-based bound tightening at every node before solving

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <vector>

#include "saev/interior_point.hpp"
#include "saev/model.hpp"

namespace saev {

// One pass of activity-based bound propagation over the explicit rows.
// Returns false when some domain becomes empty.  Integer domains are
// rounded inward.  `passes` bounds the sweep count.
inline bool tighten_bounds(const ModelSpec& model, std::vector<double>& lo,
                           std::vector<double>& up, double int_tol = 1e-5,
                           int passes = 4) {
  const int n = model.num_vars();
  for (int i = 0; i < n; ++i) {
    if (model.vars[i].integral) {
      lo[i] = std::ceil(lo[i] - int_tol);
      up[i] = std::floor(up[i] + int_tol);
    }
    if (lo[i] > up[i] + 1e-9) return false;
  }
  for (int pass = 0; pass < passes; ++pass) {
    bool changed = false;
    for (const auto& row : model.rows) {
      for (int dir = 0; dir < 2; ++dir) {
        // dir 0 treats the row as <=, dir 1 as >= (negated <=)
        if (dir == 0 && row.sense == RowSense::ge) continue;
        if (dir == 1 && row.sense == RowSense::le) continue;
        const double sgn = dir == 0 ? 1.0 : -1.0;
        const double rhs = sgn * row.rhs;
        double minact = 0.0;
        bool overflow = false;
        for (const auto& [v, c0] : row.terms) {
          const double c = sgn * c0;
          minact += c > 0.0 ? c * lo[v] : c * up[v];
          if (!std::isfinite(minact)) overflow = true;
        }
        if (overflow) continue;
        if (minact > rhs + 1e-7 * (1.0 + std::fabs(rhs))) return false;
        for (const auto& [v, c0] : row.terms) {
          const double c = sgn * c0;
          if (c == 0.0) continue;
          const double rest = minact - (c > 0.0 ? c * lo[v] : c * up[v]);
          const double limit = (rhs - rest) / c;
          const double margin = 1e-9 * (1.0 + std::fabs(limit));
          if (c > 0.0) {
            double nu = limit + margin;
            if (model.vars[v].integral) nu = std::floor(nu + int_tol);
            if (nu < up[v] - 1e-12) {
              up[v] = std::max(nu, lo[v]);
              changed = true;
            }
          } else {
            double nl = limit - margin;
            if (model.vars[v].integral) nl = std::ceil(nl - int_tol);
            if (nl > lo[v] + 1e-12) {
              lo[v] = std::min(nl, up[v]);
              changed = true;
            }
          }
          if (lo[v] > up[v] + 1e-9) return false;
        }
      }
    }
    if (!changed) break;
  }
  return true;
}

namespace detail {

struct BnbNode {
  int parent = -1;
  int branch_var = -1;
  double branch_lo = 0.0;
  double branch_hi = 0.0;
  double bound = -std::numeric_limits<double>::infinity();
  bool down_child = false;
  double branch_dist = 0.0;  // fractional distance rounded away at creation
};

inline void reconstruct_bounds(const std::vector<BnbNode>& arena, int id,
                               const std::vector<double>& root_lo,
                               const std::vector<double>& root_up,
                               std::vector<double>& lo,
                               std::vector<double>& up) {
  lo = root_lo;
  up = root_up;
  static thread_local std::vector<int> chain;
  chain.clear();
  for (int cur = id; cur >= 0; cur = arena[cur].parent) chain.push_back(cur);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const BnbNode& nd = arena[*it];
    if (nd.branch_var >= 0) {
      lo[nd.branch_var] = std::max(lo[nd.branch_var], nd.branch_lo);
      up[nd.branch_var] = std::min(up[nd.branch_var], nd.branch_hi);
    }
  }
}

}  // namespace detail

class MiqpSolver {
 public:
  explicit MiqpSolver(const ModelSpec& model)
      : model_(&model), ws_(model) {
    for (int i = 0; i < model.num_vars(); ++i)
      if (model.vars[i].integral) int_vars_.push_back(i);
  }

  const ModelSpec& model() const { return *model_; }

  Solution solve_relaxation(const SolveOptions& opt) { return ws_.solve(opt); }

  Solution solve(const SolveOptions& opt) {
    using detail::BnbNode;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           t0)
          .count();
    };
    const double inf = std::numeric_limits<double>::infinity();
    const ModelSpec& mdl = *model_;
    const int n = mdl.num_vars();

    Solution best;
    best.status = SolveStatus::infeasible;
    best.objective = inf;
    bool have_incumbent = false;

    std::vector<double> root_lo(n), root_up(n);
    for (int i = 0; i < n; ++i) {
      root_lo[i] = mdl.vars[i].lower;
      root_up[i] = mdl.vars[i].upper;
    }
    if (!tighten_bounds(mdl, root_lo, root_up, opt.integrality_tol)) {
      best.status = have_incumbent ? SolveStatus::optimal : SolveStatus::infeasible;
      best.lower_bound = best.objective;
      return best;
    }

    std::vector<BnbNode> arena;
    arena.push_back({});  // root
    // open nodes ordered by (bound, id)
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
    int next_node = 0;
    long solves = 0;
    double global_lb = -inf;

    std::vector<double> lo(n), up(n);
    SolveOptions relax_opt = opt;

    auto prune_threshold = [&] {
      if (!have_incumbent) return inf;
      return best.objective -
             std::max(1e-9, opt.relative_gap * std::fabs(best.objective));
    };

    // pseudocosts: average bound gain per unit of rounded-away fraction,
    // per variable and direction; unseen variables fall back to the global
    // mean, and with no history at all the score reduces to most-fractional
    std::vector<double> pc_sum_dn(n, 0.0), pc_sum_up(n, 0.0);
    std::vector<int> pc_cnt_dn(n, 0), pc_cnt_up(n, 0);
    double pc_glob_dn = 0.0, pc_glob_up = 0.0;
    int pc_gcnt_dn = 0, pc_gcnt_up = 0;
    auto pc_avg = [&](bool down, int v) {
      if (down)
        return pc_cnt_dn[v] > 0 ? pc_sum_dn[v] / pc_cnt_dn[v]
               : pc_gcnt_dn > 0 ? pc_glob_dn / pc_gcnt_dn
                                : 1.0;
      return pc_cnt_up[v] > 0 ? pc_sum_up[v] / pc_cnt_up[v]
             : pc_gcnt_up > 0 ? pc_glob_up / pc_gcnt_up
                              : 1.0;
    };

    auto try_incumbent = [&](const std::vector<double>& relax_x) {
      // fix integers to their rounded values and resolve the continuous part
      std::vector<double> flo = lo, fup = up;
      for (int v : int_vars_) {
        const double r = std::round(relax_x[v]);
        flo[v] = fup[v] = r;
      }
      Solution comp = ws_.solve_with_bounds(relax_opt, flo, fup);
      ++solves;
      if (comp.status == SolveStatus::infeasible) return;
      for (int v : int_vars_) comp.x[v] = std::round(comp.x[v]);
      if (mdl.max_violation(comp.x) > 10 * opt.feasibility_tol) return;
      const double obj = mdl.objective_at(comp.x);
      if (!std::isfinite(obj)) return;
      if (!have_incumbent || obj < best.objective - 1e-12) {
        best.x = comp.x;
        best.objective = obj;
        have_incumbent = true;
      }
    };

    // fix-and-dive: repeatedly pin the most settled fractionals to their
    // rounding and re-solve, so an incumbent exists long before any branch
    // dive bottoms out; pins accumulate in a scratch box copy
    auto dive_heuristic = [&](const std::vector<double>& x0) {
      std::vector<double> hlo = lo, hup = up;
      std::vector<double> x = x0;
      SolveOptions ho = relax_opt;
      ho.bound_cutoff = inf;
      std::vector<std::pair<double, int>> frac;
      std::size_t cap = 48;
      int budget = 160;  // relaxation solves this dive may spend
      while (budget > 0) {
        frac.clear();
        for (int v : int_vars_) {
          if (hlo[v] == hup[v]) continue;
          const double f = x[v] - std::floor(x[v]);
          const double d = std::min(f, 1.0 - f);
          if (d > opt.integrality_tol) frac.push_back({d, v});
        }
        if (frac.empty()) {
          try_incumbent(x);
          return;
        }
        std::sort(frac.begin(), frac.end());
        const std::size_t batch = std::min(cap, frac.size());
        static thread_local std::vector<std::pair<int, std::pair<double, double>>>
            saved;
        saved.clear();
        for (std::size_t k = 0; k < batch; ++k) {
          const int v = frac[k].second;
          saved.push_back({v, {hlo[v], hup[v]}});
          const double r = std::round(x[v]);
          hlo[v] = hup[v] = std::clamp(r, hlo[v], hup[v]);
        }
        Solution s = ws_.solve_with_bounds(ho, hlo, hup);
        ++solves;
        --budget;
        if (s.status != SolveStatus::infeasible) {
          x = s.x;
          cap = 48;
          continue;
        }
        for (const auto& [v, b] : saved) {
          hlo[v] = b.first;
          hup[v] = b.second;
        }
        if (batch > 1) {
          // the batch mixed incompatible roundings; retry smaller
          cap = std::max<std::size_t>(1, batch / 4);
          continue;
        }
        // a single pin failed: the other side is forced
        const int v = frac[0].second;
        const double fl = std::floor(x[v]);
        const double alt = std::round(x[v]) == fl ? fl + 1.0 : fl;
        if (alt < hlo[v] - 0.5 || alt > hup[v] + 0.5) return;
        hlo[v] = hup[v] = alt;
        Solution s2 = ws_.solve_with_bounds(ho, hlo, hup);
        ++solves;
        --budget;
        if (s2.status == SolveStatus::infeasible) return;
        x = s2.x;
        cap = 48;
      }
    };

    // a warm start only needs credible integer entries: they are fixed and
    // the continuous part is re-solved, so stale flows or loads do not spoil
    // an otherwise reusable plan
    if (opt.warm_start && static_cast<int>(opt.warm_start->size()) == n) {
      lo = root_lo;
      up = root_up;
      try_incumbent(*opt.warm_start);
    }

    bool limit_hit = false;
    int dive = 0;  // node id to process next, -1 = take from queue

    while (true) {
      int id = -1;
      if (dive >= 0) {
        id = dive;
        dive = -1;
      } else {
        // drop nodes that can no longer improve
        while (!open.empty() && open.top().first >= prune_threshold())
          open.pop();
        if (open.empty()) break;
        id = open.top().second;
        open.pop();
      }

      if (solves >= opt.node_limit ||
          (opt.time_limit_seconds > 0.0 && elapsed() > opt.time_limit_seconds)) {
        limit_hit = true;
        break;
      }

      detail::reconstruct_bounds(arena, id, root_lo, root_up, lo, up);
      if (!tighten_bounds(mdl, lo, up, opt.integrality_tol, 2)) continue;

      // the root must run to completion for a usable global bound; deeper
      // nodes may abandon themselves against the incumbent
      relax_opt.bound_cutoff = id == 0 ? inf : prune_threshold();
      Solution rel = ws_.solve_with_bounds(relax_opt, lo, up);
      ++solves;
      const double node_bound = std::max(arena[id].bound, rel.lower_bound);
      if (id == 0) global_lb = node_bound;
      {
        const BnbNode& nd = arena[id];
        if (nd.branch_var >= 0 && nd.branch_dist > 1e-9 &&
            std::isfinite(node_bound) && std::isfinite(nd.bound)) {
          const double gain =
              std::max(0.0, node_bound - nd.bound) / nd.branch_dist;
          if (nd.down_child) {
            pc_sum_dn[nd.branch_var] += gain;
            ++pc_cnt_dn[nd.branch_var];
            pc_glob_dn += gain;
            ++pc_gcnt_dn;
          } else {
            pc_sum_up[nd.branch_var] += gain;
            ++pc_cnt_up[nd.branch_var];
            pc_glob_up += gain;
            ++pc_gcnt_up;
          }
        }
      }
      if (rel.status == SolveStatus::infeasible) continue;
      if (node_bound >= prune_threshold()) continue;

      int branch_var = -1;
      double best_score = -inf;
      int frac_count = 0;
      for (int v : int_vars_) {
        const double f = rel.x[v] - std::floor(rel.x[v]);
        if (f <= opt.integrality_tol || f >= 1.0 - opt.integrality_tol)
          continue;
        ++frac_count;
        const double score = std::max(f * pc_avg(true, v), 1e-12) *
                             std::max((1.0 - f) * pc_avg(false, v), 1e-12);
        if (score > best_score * (1.0 + 1e-12) + 1e-300) {
          best_score = score;
          branch_var = v;
        }
      }

      if (branch_var < 0) {
        try_incumbent(rel.x);
        continue;
      }

      // rounding probe: once a dive has collapsed most of the fractionality
      // the rounded completion often succeeds, which seeds pruning long
      // before any relaxation comes out integral on its own
      if (frac_count <= 48 && (solves & 3) == 0) try_incumbent(rel.x);

      // the fix-and-dive pass is pricier, so run it at the root and then
      // only while the tree has produced nothing to prune against
      if (id == 0 || (!have_incumbent && solves % 192 == 0))
        dive_heuristic(rel.x);

      const double v = rel.x[branch_var];
      const double fl = std::floor(v);
      const double frac = v - fl;
      BnbNode down{id,   branch_var, lo[branch_var], fl,
                   node_bound, true, frac};
      BnbNode upnd{id,         branch_var, fl + 1.0, up[branch_var],
                   node_bound, false,      1.0 - frac};
      const bool down_first = (v - fl) <= 0.5;
      arena.push_back(down_first ? down : upnd);
      const int first_id = static_cast<int>(arena.size()) - 1;
      arena.push_back(down_first ? upnd : down);
      const int second_id = static_cast<int>(arena.size()) - 1;
      open.emplace(node_bound, second_id);
      dive = first_id;
    }

    if (limit_hit) {
      best.status = SolveStatus::iteration_limit;
    } else if (have_incumbent) {
      best.status = SolveStatus::optimal;
      global_lb = best.objective;
    } else {
      best.status = SolveStatus::infeasible;
    }
    if (!open.empty()) global_lb = std::min(global_lb, open.top().first);
    best.lower_bound = std::min(global_lb, best.objective);
    best.nodes = solves;
    best.wall_seconds = elapsed();
    return best;
  }

 private:
  const ModelSpec* model_;
  IpmWorkspace ws_;
  std::vector<int> int_vars_;
};

inline Solution branch_and_bound(const ModelSpec& model,
                                 const SolveOptions& opt = {}) {
  MiqpSolver s(model);
  return s.solve(opt);
}

// Exhaustive enumeration of all integer assignments followed by a continuous
// completion solve for each.  Intended for models with at most ~20 integer
// variables; used as the ground-truth oracle in tests.
inline Solution enumerate_oracle(const ModelSpec& model,
                                 const SolveOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = model.num_vars();
  std::vector<int> ints;
  for (int i = 0; i < n; ++i)
    if (model.vars[i].integral) ints.push_back(i);
  if (ints.size() > 24)
    throw std::invalid_argument("enumerate_oracle: too many integer variables");

  IpmWorkspace ws(model);
  std::vector<double> lo(n), up(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = model.vars[i].lower;
    up[i] = model.vars[i].upper;
  }

  Solution best;
  best.status = SolveStatus::infeasible;
  best.objective = std::numeric_limits<double>::infinity();
  long solves = 0;

  // quick sound pruning: minimum activity must not exceed the row bound
  auto partial_feasible = [&](const std::vector<double>& l,
                              const std::vector<double>& u) {
    for (const auto& row : model.rows) {
      for (int dir = 0; dir < 2; ++dir) {
        if (dir == 0 && row.sense == RowSense::ge) continue;
        if (dir == 1 && row.sense == RowSense::le) continue;
        const double sgn = dir == 0 ? 1.0 : -1.0;
        double minact = 0.0;
        for (const auto& [v, c0] : row.terms) {
          const double c = sgn * c0;
          minact += c > 0.0 ? c * l[v] : c * u[v];
        }
        if (minact > sgn * row.rhs + 1e-7 * (1.0 + std::fabs(row.rhs)))
          return false;
      }
    }
    return true;
  };

  auto rec = [&](auto&& self, std::size_t k) -> void {
    if (!partial_feasible(lo, up)) return;
    if (k == ints.size()) {
      SolveOptions ro = opt;
      Solution s = ws.solve_with_bounds(ro, lo, up);
      ++solves;
      if (s.status == SolveStatus::infeasible) return;
      for (int v : ints) s.x[v] = std::round(s.x[v]);
      if (model.max_violation(s.x) > 10 * opt.feasibility_tol) return;
      const double obj = model.objective_at(s.x);
      if (obj < best.objective - 1e-12) {
        best.x = s.x;
        best.objective = obj;
        best.status = SolveStatus::optimal;
      }
      return;
    }
    const int v = ints[k];
    const double l0 = lo[v], u0 = up[v];
    for (double val = std::ceil(l0 - 1e-9); val <= u0 + 1e-9; val += 1.0) {
      lo[v] = up[v] = val;
      self(self, k + 1);
      lo[v] = l0;
      up[v] = u0;
    }
  };
  rec(rec, 0);

  best.nodes = solves;
  best.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return best;
}

}  // namespace saev
