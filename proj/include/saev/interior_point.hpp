#pragma once

// Convex relaxation engine: Mehrotra predictor-corrector interior point
// method for LPs and separable convex QPs in ModelSpec form.
//
// Every row is relaxed with elastic variables carrying a large linear
// penalty.  A model is reported infeasible when the optimal elastic
// residual exceeds the feasibility tolerance; this makes every node of a
// branch-and-bound tree solvable by the same code path and lets infeasible
// nodes prune themselves through their certified bounds.
//
// The normal-equation sparsity pattern is computed once per workspace and
// reused across solves with different variable bounds (fixed variables get
// a zero scaling weight instead of being removed), so branch-and-bound and
// ADMM loops pay the symbolic factorization only once.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include "saev/model.hpp"

namespace saev {

class IpmWorkspace {
 public:
  explicit IpmWorkspace(const ModelSpec& model) : model_(&model) {
    model.validate();
    build_canonical();
    build_normal_pattern();
  }

  const ModelSpec& model() const { return *model_; }

  Solution solve(const SolveOptions& opt) {
    return solve_with_bounds(opt, {}, {});
  }

  // lower/upper override the model bounds when non-empty (size num_vars).
  Solution solve_with_bounds(const SolveOptions& opt,
                             const std::vector<double>& lower,
                             const std::vector<double>& upper) {
    const auto t0 = std::chrono::steady_clock::now();
    Solution sol = run(opt, lower.empty() ? nullptr : lower.data(),
                       upper.empty() ? nullptr : upper.data());
    sol.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return sol;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  const ModelSpec* model_;
  int n_model_ = 0;   // model columns
  int n_total_ = 0;   // model + slack + elastic columns
  int m_ = 0;         // rows

  // canonical rows: ge rows are negated so every inequality reads <=
  std::vector<double> row_sign_;
  std::vector<bool> row_eq_;
  std::vector<int> slack_col_;           // -1 for eq rows
  std::vector<int> elastic_lo_col_;      // coefficient -1 (relaxes upward)
  std::vector<int> elastic_hi_col_;      // coefficient +1, eq rows only
  std::vector<double> qdiag_model_;      // 2 * sum of quadratic weights

  // full constraint matrix, column compressed
  std::vector<int> col_ptr_, col_row_;
  std::vector<double> col_val_;
  // model-column part, row compressed (for rhs shifts)
  std::vector<int> row_ptr_, row_col_;
  std::vector<double> row_val_;

  // refill plan for M = A diag(dinv) A^T, lower triangle
  struct PlanEntry {
    int offset;
    int acol;
    double prod;
  };
  std::vector<PlanEntry> plan_;
  std::vector<int> diag_offset_;
  Eigen::SparseMatrix<double> normal_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  bool analyzed_ = false;

  void build_canonical() {
    const ModelSpec& m = *model_;
    n_model_ = m.num_vars();
    m_ = m.num_rows();
    row_sign_.assign(m_, 1.0);
    row_eq_.assign(m_, false);
    slack_col_.assign(m_, -1);
    elastic_lo_col_.assign(m_, -1);
    elastic_hi_col_.assign(m_, -1);

    qdiag_model_.assign(n_model_, 0.0);
    for (const auto& q : m.quad) qdiag_model_[q.var] += 2.0 * q.weight;

    int next = n_model_;
    for (int r = 0; r < m_; ++r) {
      switch (m.rows[r].sense) {
        case RowSense::ge: row_sign_[r] = -1.0; break;
        case RowSense::eq: row_eq_[r] = true; break;
        default: break;
      }
      if (!row_eq_[r]) slack_col_[r] = next++;
      elastic_lo_col_[r] = next++;
      if (row_eq_[r]) elastic_hi_col_[r] = next++;
    }
    n_total_ = next;

    // coalesce duplicate variables within a row, drop zeros
    std::vector<std::map<int, double>> row_terms(m_);
    for (int r = 0; r < m_; ++r)
      for (const auto& [v, c] : m.rows[r].terms)
        if (c != 0.0) row_terms[r][v] += row_sign_[r] * c;

    row_ptr_.assign(m_ + 1, 0);
    for (int r = 0; r < m_; ++r)
      row_ptr_[r + 1] = row_ptr_[r] + static_cast<int>(row_terms[r].size());
    row_col_.resize(row_ptr_[m_]);
    row_val_.resize(row_ptr_[m_]);
    for (int r = 0; r < m_; ++r) {
      int k = row_ptr_[r];
      for (const auto& [v, c] : row_terms[r]) {
        row_col_[k] = v;
        row_val_[k] = c;
        ++k;
      }
    }

    // column compressed full matrix
    std::vector<int> count(n_total_, 0);
    for (int k = 0; k < row_ptr_[m_]; ++k) ++count[row_col_[k]];
    for (int r = 0; r < m_; ++r) {
      if (slack_col_[r] >= 0) ++count[slack_col_[r]];
      ++count[elastic_lo_col_[r]];
      if (elastic_hi_col_[r] >= 0) ++count[elastic_hi_col_[r]];
    }
    col_ptr_.assign(n_total_ + 1, 0);
    for (int j = 0; j < n_total_; ++j) col_ptr_[j + 1] = col_ptr_[j] + count[j];
    col_row_.resize(col_ptr_[n_total_]);
    col_val_.resize(col_ptr_[n_total_]);
    std::vector<int> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (int r = 0; r < m_; ++r) {
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const int j = row_col_[k];
        col_row_[fill[j]] = r;
        col_val_[fill[j]] = row_val_[k];
        ++fill[j];
      }
      auto put = [&](int j, double v) {
        col_row_[fill[j]] = r;
        col_val_[fill[j]] = v;
        ++fill[j];
      };
      if (slack_col_[r] >= 0) put(slack_col_[r], 1.0);
      put(elastic_lo_col_[r], -1.0);
      if (elastic_hi_col_[r] >= 0) put(elastic_hi_col_[r], 1.0);
    }
  }

  void build_normal_pattern() {
    if (m_ == 0) return;
    std::vector<Eigen::Triplet<double>> trips;
    for (int j = 0; j < n_total_; ++j)
      for (int a = col_ptr_[j]; a < col_ptr_[j + 1]; ++a)
        for (int b = col_ptr_[j]; b < col_ptr_[j + 1]; ++b)
          if (col_row_[a] >= col_row_[b])
            trips.emplace_back(col_row_[a], col_row_[b], 0.0);
    for (int r = 0; r < m_; ++r) trips.emplace_back(r, r, 0.0);
    normal_.resize(m_, m_);
    normal_.setFromTriplets(trips.begin(), trips.end());
    normal_.makeCompressed();

    auto offset_of = [&](int row, int col) {
      const int* inner = normal_.innerIndexPtr();
      const int* outer = normal_.outerIndexPtr();
      const int* lo = inner + outer[col];
      const int* hi = inner + outer[col + 1];
      const int* it = std::lower_bound(lo, hi, row);
      return static_cast<int>(it - inner);
    };
    for (int j = 0; j < n_total_; ++j)
      for (int a = col_ptr_[j]; a < col_ptr_[j + 1]; ++a)
        for (int b = col_ptr_[j]; b < col_ptr_[j + 1]; ++b)
          if (col_row_[a] >= col_row_[b])
            plan_.push_back({offset_of(col_row_[a], col_row_[b]), j,
                             col_val_[a] * col_val_[b]});
    diag_offset_.resize(m_);
    for (int r = 0; r < m_; ++r) diag_offset_[r] = offset_of(r, r);
    std::sort(plan_.begin(), plan_.end(),
              [](const PlanEntry& a, const PlanEntry& b) {
                return a.offset < b.offset;
              });
  }

  void refill_normal(const std::vector<double>& dinv, double delta) {
    double* val = normal_.valuePtr();
    std::fill(val, val + normal_.nonZeros(), 0.0);
    for (const auto& p : plan_) val[p.offset] += p.prod * dinv[p.acol];
    for (int r = 0; r < m_; ++r) val[diag_offset_[r]] += delta;
  }

  void mat_vec(const std::vector<double>& x, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (int j = 0; j < n_total_; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      for (int k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k)
        out[col_row_[k]] += col_val_[k] * xj;
    }
  }

  void mat_t_vec(const std::vector<double>& y, std::vector<double>& out) const {
    for (int j = 0; j < n_total_; ++j) {
      double s = 0.0;
      for (int k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k)
        s += col_val_[k] * y[col_row_[k]];
      out[j] = s;
    }
  }

  Solution run(const SolveOptions& opt, const double* lo_over,
               const double* up_over) {
    const ModelSpec& mdl = *model_;
    Solution sol;

    // shifted per-solve data
    std::vector<double> lo(n_model_), range(n_model_);
    for (int i = 0; i < n_model_; ++i) {
      const double l = lo_over ? lo_over[i] : mdl.vars[i].lower;
      const double u = up_over ? up_over[i] : mdl.vars[i].upper;
      if (u < l - 1e-9) {
        sol.status = SolveStatus::infeasible;
        sol.lower_bound = kInf;
        sol.objective = kInf;
        sol.x.assign(n_model_, l);
        return sol;
      }
      lo[i] = l;
      range[i] = std::max(0.0, u - l);
      if (!std::isfinite(range[i]))
        throw std::invalid_argument("interior point: unbounded variable");
    }

    double cshift = mdl.objective_constant;
    std::vector<double> chat(n_total_, 0.0);
    for (int i = 0; i < n_model_; ++i) {
      chat[i] = mdl.linear[i];
      cshift += mdl.linear[i] * lo[i];
    }
    for (const auto& q : mdl.quad) {
      const double d = lo[q.var] - q.center;
      chat[q.var] += 2.0 * q.weight * d;
      cshift += q.weight * d * d;
    }
    const double W = opt.elastic_penalty;
    for (int r = 0; r < m_; ++r) {
      chat[elastic_lo_col_[r]] = W;
      if (elastic_hi_col_[r] >= 0) chat[elastic_hi_col_[r]] = W;
    }

    std::vector<double> bhat(m_);
    for (int r = 0; r < m_; ++r) {
      double b = row_sign_[r] * mdl.rows[r].rhs;
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        b -= row_val_[k] * lo[row_col_[k]];
      bhat[r] = b;
    }

    std::vector<double> U(n_total_, kInf);
    for (int i = 0; i < n_model_; ++i) U[i] = range[i];
    std::vector<bool> fixed(n_total_, false);
    for (int i = 0; i < n_model_; ++i) fixed[i] = range[i] < 1e-11;

    if (m_ == 0) return solve_boxed(opt, lo, range, chat, cshift);

    // interior iterates
    std::vector<double> x(n_total_), z(n_total_, 1.0), w(n_total_, 0.0);
    std::vector<double> y(m_, 0.0);
    int n_active = 0, n_bounded = 0;
    for (int j = 0; j < n_total_; ++j) {
      if (fixed[j]) {
        x[j] = 0.0;
        z[j] = 0.0;
        continue;
      }
      ++n_active;
      // start dual slacks on the scale of the objective coefficient so the
      // elastic penalty does not blow up the first Newton direction
      z[j] = std::max(1.0, std::fabs(chat[j]));
      if (std::isfinite(U[j])) {
        x[j] = 0.5 * std::min(U[j], 2.0);
        w[j] = 1.0;
        ++n_bounded;
      } else {
        x[j] = 1.0;
      }
    }

    std::vector<double> dinv(n_total_), rp(m_), rd(n_total_), aty(n_total_);
    std::vector<double> g(n_total_), adg(m_), dx(n_total_), dz(n_total_),
        dw(n_total_), dxa(n_total_), dza(n_total_), dwa(n_total_);
    Eigen::VectorXd rhs(m_), dy(m_), dya(m_);

    double bnorm = 1.0;
    for (double v : bhat) bnorm = std::max(bnorm, std::fabs(v));

    double delta = 1e-10;
    const int max_iter = opt.ipm_iteration_limit;
    bool converged = false;
    int iter = 0;
    int stalls = 0;
    double last_rel_p = kInf, last_rel_d = kInf, last_rel_g = kInf;

    // best iterate by worst relative residual; late iterations can destroy an
    // already-good point once mu reaches machine precision, so any exit path
    // falls back to this snapshot
    std::vector<double> bx, by, bz, bw;
    double best_score = kInf;
    double best_rp = kInf, best_rd = kInf, best_rg = kInf;
    int no_gain = 0;

    auto barrier_count = [&] { return n_active + n_bounded; };

    for (iter = 0; iter < max_iter; ++iter) {
      mat_vec(x, rp);
      for (int r = 0; r < m_; ++r) rp[r] = bhat[r] - rp[r];
      mat_t_vec(y, aty);
      double mu = 0.0;
      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) {
          rd[j] = 0.0;
          continue;
        }
        const double qx = j < n_model_ ? qdiag_model_[j] * x[j] : 0.0;
        rd[j] = chat[j] + qx - aty[j] - z[j] +
                (std::isfinite(U[j]) ? w[j] : 0.0);
        mu += x[j] * z[j];
        if (std::isfinite(U[j])) mu += (U[j] - x[j]) * w[j];
      }
      mu /= std::max(1, barrier_count());

      double rel_p = 0.0, rel_d = 0.0;
      for (int r = 0; r < m_; ++r)
        rel_p = std::max(rel_p, std::fabs(rp[r]) / bnorm);
      for (int j = 0; j < n_total_; ++j)
        if (!fixed[j])
          rel_d = std::max(rel_d, std::fabs(rd[j]) / (1.0 + std::fabs(chat[j])));
      double pobj = cshift;
      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) continue;
        pobj += chat[j] * x[j];
        if (j < n_model_) pobj += 0.5 * qdiag_model_[j] * x[j] * x[j];
      }
      const double rel_g = mu / (1.0 + std::fabs(pobj));
      last_rel_p = rel_p;
      last_rel_d = rel_d;
      last_rel_g = rel_g;
#ifdef SAEV_IPM_TRACE
      std::fprintf(stderr,
                   "it %3d mu %.3e rp %.3e rd %.3e rg %.3e obj %.6e\n", iter,
                   mu, rel_p, rel_d, rel_g, pobj);
#endif
      const double score = std::max({rel_p, rel_d, rel_g});
      if (score <= best_score) {
        no_gain = score < 0.9 * best_score ? 0 : no_gain + 1;
        best_score = score;
        best_rp = rel_p;
        best_rd = rel_d;
        best_rg = rel_g;
        bx = x;
        by = y;
        bz = z;
        bw = w;
      } else {
        ++no_gain;
        // protect an essentially-converged point from numerical breakdown
        if (best_score < 1e-5 && score > 1e6 * std::max(best_score, 1e-12))
          break;
      }

      if (rel_p < 1e-9 && rel_d < 1e-9 && rel_g < 1e-10) {
        converged = true;
        break;
      }
      if (no_gain >= 10 && best_score < 1e-6) break;  // polishing stalled

      // a certified bound at the caller's cutoff makes this subproblem
      // useless; bail out before paying for another factorization
      if (std::isfinite(opt.bound_cutoff) && iter >= 1) {
        const double cb = certified_bound(lo, range, chat, cshift, bhat, y, W);
        if (cb >= opt.bound_cutoff) {
          sol.status = SolveStatus::iteration_limit;
          sol.objective = kInf;
          sol.lower_bound = cb;
          sol.iterations = iter;
          sol.x.assign(n_model_, 0.0);
          for (int i = 0; i < n_model_; ++i)
            sol.x[i] = fixed[i] ? lo[i]
                                : std::clamp(lo[i] + x[i], lo[i],
                                             lo[i] + range[i]);
          return sol;
        }
      }

      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) {
          dinv[j] = 0.0;
          continue;
        }
        double d = z[j] / std::max(x[j], 1e-300);
        if (std::isfinite(U[j]))
          d += w[j] / std::max(U[j] - x[j], 1e-300);
        if (j < n_model_) d += qdiag_model_[j];
        dinv[j] = 1.0 / d;
      }

      bool factored = false;
      for (int attempt = 0; attempt < 4 && !factored; ++attempt) {
        refill_normal(dinv, delta);
        if (!analyzed_) {
          ldlt_.analyzePattern(normal_);
          analyzed_ = true;
        }
        ldlt_.factorize(normal_);
        if (ldlt_.info() == Eigen::Success)
          factored = true;
        else
          delta *= 100.0;
      }
      if (!factored) {
#ifdef SAEV_IPM_TRACE
        std::fprintf(stderr, "it %3d factorization failed, delta %.3e\n", iter,
                     delta);
#endif
        break;
      }

      // affine predictor: complementarity targets -x.z and -s.w give
      // g_j = rd_j - z_j + w_j
      auto solve_step = [&](const std::vector<double>& gg,
                            std::vector<double>& ddx, Eigen::VectorXd& ddy) {
        std::vector<double> dg(n_total_);
        for (int j = 0; j < n_total_; ++j) dg[j] = dinv[j] * gg[j];
        mat_vec(dg, adg);
        for (int r = 0; r < m_; ++r) rhs[r] = rp[r] - adg[r];
        ddy = ldlt_.solve(rhs);
        std::vector<double> aty2(n_total_);
        std::vector<double> yv(ddy.data(), ddy.data() + m_);
        mat_t_vec(yv, aty2);
        for (int j = 0; j < n_total_; ++j)
          ddx[j] = dinv[j] * (aty2[j] + gg[j]);
      };

      for (int j = 0; j < n_total_; ++j)
        g[j] = fixed[j] ? 0.0
                        : -rd[j] - z[j] + (std::isfinite(U[j]) ? w[j] : 0.0);
      solve_step(g, dxa, dya);
      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) {
          dza[j] = dwa[j] = 0.0;
          continue;
        }
        dza[j] = (-x[j] * z[j] - z[j] * dxa[j]) / std::max(x[j], 1e-300);
        dwa[j] = std::isfinite(U[j])
                     ? (-(U[j] - x[j]) * w[j] + w[j] * dxa[j]) /
                           std::max(U[j] - x[j], 1e-300)
                     : 0.0;
      }

      auto max_primal_step = [&](const std::vector<double>& ddx) {
        double a = 1.0;
        for (int j = 0; j < n_total_; ++j) {
          if (fixed[j]) continue;
          if (ddx[j] < 0.0) a = std::min(a, -x[j] / ddx[j]);
          if (std::isfinite(U[j]) && ddx[j] > 0.0)
            a = std::min(a, (U[j] - x[j]) / ddx[j]);
        }
        return a;
      };
      auto max_dual_step = [&](const std::vector<double>& ddz,
                               const std::vector<double>& ddw) {
        double a = 1.0;
        for (int j = 0; j < n_total_; ++j) {
          if (fixed[j]) continue;
          if (ddz[j] < 0.0) a = std::min(a, -z[j] / ddz[j]);
          if (std::isfinite(U[j]) && ddw[j] < 0.0)
            a = std::min(a, -w[j] / ddw[j]);
        }
        return a;
      };

      const double apa = max_primal_step(dxa);
      const double ada = max_dual_step(dza, dwa);
      double mu_aff = 0.0;
      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) continue;
        const double xn = x[j] + apa * dxa[j];
        const double zn = z[j] + ada * dza[j];
        mu_aff += xn * zn;
        if (std::isfinite(U[j]))
          mu_aff += (U[j] - xn) * (w[j] + ada * dwa[j]);
      }
      mu_aff /= std::max(1, barrier_count());
      double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;
      sigma = std::clamp(sigma, 1e-10, 1.0);

      // drop the second order term when the affine direction is so large
      // that its products would dominate everything else
      double corr2 = 0.0;
      for (int j = 0; j < n_total_; ++j)
        if (!fixed[j])
          corr2 = std::max({corr2, std::fabs(dxa[j] * dza[j]),
                            std::fabs(dxa[j] * dwa[j])});
      const bool use_soc = corr2 <= 1e8 * std::max(mu, 1.0);

      // corrector
      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) {
          g[j] = 0.0;
          continue;
        }
        const double soc_z = use_soc ? dxa[j] * dza[j] : 0.0;
        const double rxz = sigma * mu - x[j] * z[j] - soc_z;
        g[j] = -rd[j] + rxz / std::max(x[j], 1e-300);
        if (std::isfinite(U[j])) {
          const double s = U[j] - x[j];
          const double soc_w = use_soc ? dxa[j] * dwa[j] : 0.0;
          const double rsw = sigma * mu - s * w[j] + soc_w;
          g[j] -= rsw / std::max(s, 1e-300);
        }
      }
      solve_step(g, dx, dy);
      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) {
          dz[j] = dw[j] = 0.0;
          continue;
        }
        const double soc_z = use_soc ? dxa[j] * dza[j] : 0.0;
        const double rxz = sigma * mu - x[j] * z[j] - soc_z;
        dz[j] = (rxz - z[j] * dx[j]) / std::max(x[j], 1e-300);
        if (std::isfinite(U[j])) {
          const double s = U[j] - x[j];
          const double soc_w = use_soc ? dxa[j] * dwa[j] : 0.0;
          const double rsw = sigma * mu - s * w[j] + soc_w;
          dw[j] = (rsw + w[j] * dx[j]) / std::max(s, 1e-300);
        } else {
          dw[j] = 0.0;
        }
      }

      const double eta = 0.9995;
      const double ap = std::min(1.0, eta * max_primal_step(dx));
      const double ad = std::min(1.0, eta * max_dual_step(dz, dw));
      for (int j = 0; j < n_total_; ++j) {
        if (fixed[j]) continue;
        x[j] += ap * dx[j];
        z[j] += ad * dz[j];
        if (std::isfinite(U[j])) {
          w[j] += ad * dw[j];
          x[j] = std::clamp(x[j], 1e-300, U[j] - 1e-300 * std::max(1.0, U[j]));
        }
        z[j] = std::max(z[j], 1e-300);
        if (std::isfinite(U[j])) w[j] = std::max(w[j], 1e-300);
      }
      for (int r = 0; r < m_; ++r) y[r] += ad * dy[r];
#ifdef SAEV_IPM_TRACE
      std::fprintf(stderr, "it %3d steps ap %.3e ad %.3e sigma %.3e\n", iter,
                   ap, ad, sigma);
      if (n_total_ <= 8) {
        for (int j = 0; j < n_total_; ++j)
          std::fprintf(stderr, "   j%d x %.3e dx %.3e z %.3e dz %.3e U %.3e\n",
                       j, x[j], dx[j], z[j], dz[j], U[j]);
        for (int r = 0; r < m_; ++r)
          std::fprintf(stderr, "   r%d y %.3e dy %.3e rp %.3e bhat %.3e\n", r,
                       y[r], dy[r], rp[r], bhat[r]);
      }
#endif
      if (ap < 1e-10 && ad < 1e-10) {
        if (++stalls >= 3) break;
      } else {
        stalls = 0;
      }
    }
    if (!bx.empty() &&
        best_score < std::max({last_rel_p, last_rel_d, last_rel_g})) {
      x = bx;
      y = by;
      z = bz;
      w = bw;
      last_rel_p = best_rp;
      last_rel_d = best_rd;
      last_rel_g = best_rg;
    }
    if (!converged && last_rel_p < 1e-7 && last_rel_d < 1e-7 &&
        last_rel_g < 1e-8)
      converged = true;

    sol.iterations = iter;
    sol.x.assign(n_model_, 0.0);
    bool finite_point = true;
    for (int i = 0; i < n_model_; ++i) {
      sol.x[i] = fixed[i] ? lo[i] : lo[i] + x[i];
      if (!std::isfinite(sol.x[i])) finite_point = false;
    }
    if (!finite_point) {
      // numerical breakdown: return the box midpoint so callers still get a
      // finite branching point, flagged as unconverged with a free bound
      for (int i = 0; i < n_model_; ++i)
        sol.x[i] = lo[i] + 0.5 * range[i];
      sol.status = SolveStatus::iteration_limit;
      sol.objective = kInf;
      sol.lower_bound = -kInf;
      return sol;
    }
    // snap to bounds to strip interior slack
    for (int i = 0; i < n_model_; ++i) {
      const double l = lo[i], u = lo[i] + range[i];
      if (sol.x[i] - l < 1e-9 * std::max(1.0, std::fabs(l))) sol.x[i] = l;
      if (u - sol.x[i] < 1e-9 * std::max(1.0, std::fabs(u))) sol.x[i] = u;
    }
    sol.objective = mdl.objective_at(sol.x);

    double elastic = 0.0;
    for (int r = 0; r < m_; ++r) {
      elastic = std::max(elastic, x[elastic_lo_col_[r]]);
      if (elastic_hi_col_[r] >= 0)
        elastic = std::max(elastic, x[elastic_hi_col_[r]]);
    }

    sol.lower_bound = certified_bound(lo, range, chat, cshift, bhat, y, W);

    if (elastic > opt.feasibility_tol) {
      sol.status = SolveStatus::infeasible;
      sol.objective = kInf;
    } else {
      sol.status = converged ? SolveStatus::optimal : SolveStatus::iteration_limit;
    }
    return sol;
  }

  // Lagrangian box bound: valid for any multipliers, clamped so slack and
  // elastic columns contribute nothing.
  double certified_bound(const std::vector<double>& lo,
                         const std::vector<double>& range,
                         const std::vector<double>& chat, double cshift,
                         const std::vector<double>& bhat,
                         const std::vector<double>& y, double W) const {
    std::vector<double> yc(m_);
    for (int r = 0; r < m_; ++r) {
      const double v = std::isfinite(y[r]) ? y[r] : 0.0;
      yc[r] = row_eq_[r] ? std::clamp(v, -W, W) : std::clamp(v, -W, 0.0);
    }
    double bound = cshift;
    for (int r = 0; r < m_; ++r) bound += bhat[r] * yc[r];
    std::vector<double> aty(n_total_);
    mat_t_vec(yc, aty);
    for (int i = 0; i < n_model_; ++i) {
      if (range[i] < 1e-11) continue;
      const double rc = chat[i] - aty[i];
      const double q = qdiag_model_[i];
      double t;
      if (q > 0.0)
        t = std::clamp(-rc / q, 0.0, range[i]);
      else
        t = rc >= 0.0 ? 0.0 : range[i];
      bound += rc * t + 0.5 * q * t * t;
    }
    return bound;
  }

  Solution solve_boxed(const SolveOptions&, const std::vector<double>& lo,
                       const std::vector<double>& range,
                       const std::vector<double>& chat, double cshift) {
    Solution sol;
    sol.status = SolveStatus::optimal;
    sol.x.assign(n_model_, 0.0);
    double obj = cshift;
    for (int i = 0; i < n_model_; ++i) {
      const double q = qdiag_model_[i];
      double t;
      if (q > 0.0)
        t = std::clamp(-chat[i] / q, 0.0, range[i]);
      else
        t = chat[i] >= 0.0 ? 0.0 : range[i];
      sol.x[i] = lo[i] + t;
      obj += chat[i] * t + 0.5 * q * t * t;
    }
    sol.objective = obj;
    sol.lower_bound = obj;
    sol.iterations = 0;
    return sol;
  }
};

inline Solution solve_relaxation(const ModelSpec& model,
                                 const SolveOptions& opt = {}) {
  IpmWorkspace ws(model);
  return ws.solve(opt);
}

}  // namespace saev
