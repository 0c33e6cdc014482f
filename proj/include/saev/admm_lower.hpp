#pragma once

// Sharing ADMM inside the dispatcher agent: every vehicle optimizes its own
// route/charge subproblem against a consensus snapshot while a coordinator
// reconciles the quantities the fleet competes over -- passenger pickups,
// plug slots and station power -- through closed-form or small exact
// projections and a single scaled dual vector.
//
// Conventions:
//  - the shared vector stacks pickups by demand pair, plug holds by charger
//    block (both directions) and converter setpoints, each over the horizon;
//    entries a vehicle cannot realize (pre-arrival slots, pruned pairs) stay
//    structurally zero
//  - fleet means are arithmetic over every vehicle, including ones that
//    never become controllable inside the horizon
//  - penalties decay along the horizon as rho / (tau + 1)^alpha so early
//    slots, the only ones ever executed, dominate the reconciliation

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "saev/central.hpp"
#include "saev/fleet.hpp"
#include "saev/model.hpp"
#include "saev/queueing.hpp"
#include "saev/rng.hpp"
#include "saev/scenario.hpp"
#include "saev/solver.hpp"

namespace saev {

// ---------------------------------------------------------------------------
// shared-variable index space

enum class SharedKind : std::uint8_t {
  pickup,
  plug_charge,
  plug_discharge,
  power_p,
  power_q,
};

// Flat layout of everything the vehicles must agree on, grouped by kind so
// per-type penalties apply to contiguous ranges.  Pair and charger ordinals
// follow DispatchVariables.
struct SharingLayout {
  int horizon = 0;
  int pairs = 0;
  int chargers = 0;

  int size() const { return horizon * (pairs + 4 * chargers); }

  int pickup(int pr, int t) const { return pr * horizon + t; }
  int plug_charge(int c, int t) const {
    return horizon * pairs + c * horizon + t;
  }
  int plug_discharge(int c, int t) const {
    return horizon * (pairs + chargers) + c * horizon + t;
  }
  int power_p(int c, int t) const {
    return horizon * (pairs + 2 * chargers) + c * horizon + t;
  }
  int power_q(int c, int t) const {
    return horizon * (pairs + 3 * chargers) + c * horizon + t;
  }

  SharedKind kind_of(int idx) const {
    const int block = idx / horizon;
    if (block < pairs) return SharedKind::pickup;
    const int cb = (block - pairs) / chargers;
    switch (cb) {
      case 0: return SharedKind::plug_charge;
      case 1: return SharedKind::plug_discharge;
      case 2: return SharedKind::power_p;
      default: return SharedKind::power_q;
    }
  }

  int slot_of(int idx) const { return idx % horizon; }

  bool is_binary(int idx) const {
    const SharedKind k = kind_of(idx);
    return k == SharedKind::pickup || k == SharedKind::plug_charge ||
           k == SharedKind::plug_discharge;
  }
};

// per-type ADMM penalties and their horizon decay
struct SharingPenalties {
  double pickup = 1.0;   // binary pickup agreement
  double plug = 1.0;     // both plug directions share one weight
  double power_p = 16.0; // MW^-2
  double power_q = 16.0; // MVAr^-2
  double alpha = 0.5;    // decay exponent along the horizon

  double decayed(double rho, int tau) const {
    return rho / std::pow(tau + 1.0, alpha);
  }

  double at(const SharingLayout& lay, int idx) const {
    const int tau = lay.slot_of(idx);
    switch (lay.kind_of(idx)) {
      case SharedKind::pickup: return decayed(pickup, tau);
      case SharedKind::plug_charge:
      case SharedKind::plug_discharge: return decayed(plug, tau);
      case SharedKind::power_p: return decayed(power_p, tau);
      default: return decayed(power_q, tau);
    }
  }
};

// Quadratic push from the upper consensus level on aggregate station power,
// one term per charger block and slot: g(x) = (weight/2)(x - center)^2
// + linear * x evaluated at the fleet aggregate x = |V| zbar.
struct PowerCoupling {
  double weight = 0.0;
  double center = 0.0;
  double linear = 0.0;
};

struct ConsensusCoupling {
  std::vector<std::vector<PowerCoupling>> p, q;  // [charger block][slot]

  bool empty() const { return p.empty() && q.empty(); }
};

// ---------------------------------------------------------------------------
// coordinator state

struct SharingState {
  SharingLayout layout;
  std::vector<std::vector<double>> z;  // [vehicle][shared index]
  std::vector<double> z_bar;
  std::vector<double> eta_bar;
  std::vector<double> u;               // one scaled dual for the whole fleet
  std::vector<double> u_prev, u_prev2; // cycling detector window
  std::vector<double> epsilon;         // per-vehicle proximal weight
  SharingPenalties rho;
  int k = 0;
  bool cycling = false;

  int fleet_size() const { return static_cast<int>(z.size()); }

  void recompute_mean() {
    const double inv = z.empty() ? 0.0 : 1.0 / static_cast<double>(z.size());
    z_bar.assign(layout.size(), 0.0);
    for (const auto& zv : z)
      for (int i = 0; i < layout.size(); ++i) z_bar[i] += inv * zv[i];
  }
};

// ---------------------------------------------------------------------------
// projections run by the coordinator

// Euclidean projection of one (charge, discharge) target pair onto
// {x >= 0, y >= 0, x + y <= cap}.  cap is the station plug count divided by
// the fleet size, so the constraint is the per-vehicle mean of the shared
// plug capacity.
inline std::pair<double, double> project_station_capacity(double target_ch,
                                                          double target_dch,
                                                          double cap) {
  double x = std::max(0.0, target_ch);
  double y = std::max(0.0, target_dch);
  if (x + y <= cap) return {x, y};
  // project onto the line x + y = cap, then fold negative coordinates onto
  // the axes; one fold always suffices in two dimensions
  const double shift = (x + y - cap) / 2.0;
  x -= shift;
  y -= shift;
  if (x < 0.0) {
    x = 0.0;
    y = std::min(std::max(0.0, target_dch), cap);
  } else if (y < 0.0) {
    y = 0.0;
    x = std::min(std::max(0.0, target_ch), cap);
  }
  return {x, y};
}

// Minimizer of g(fleet * eta) + (fleet * rho / 2)(eta - b)^2 over eta for one
// station power element, with b = zbar + u and g the upper-level quadratic.
// Stationarity gives eta = (weight * center - linear + rho * b) /
// (weight * fleet + rho); with no g the update collapses to eta = b.
inline double update_eta_power(double b, const PowerCoupling& g, double rho,
                               int fleet) {
  const double denom = g.weight * fleet + rho;
  if (denom <= 0.0) return b;
  return (g.weight * g.center - g.linear + rho * b) / denom;
}

namespace detail {

// Projection of b onto {x : G x <= h} for a handful of rows: primal active
// set with the identity Hessian, exact up to the small dense solves.  The
// iterate always satisfies the working set as equalities, so a row dependent
// on the working set never blocks and the KKT system stays full rank.
inline std::vector<double> project_polyhedron(const std::vector<double>& b,
                                              const Eigen::MatrixXd& G,
                                              const Eigen::VectorXd& h) {
  const int n = static_cast<int>(b.size());
  const int m = static_cast<int>(G.rows());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd target(n);
  for (int i = 0; i < n; ++i) target[i] = b[i];

  // x = 0 must be feasible for every caller (all our bounds are >= 0)
  for (int r = 0; r < m; ++r)
    if (h[r] < -1e-12)
      throw std::logic_error("project_polyhedron: infeasible origin");

  std::vector<int> active;
  auto solve_working = [&](Eigen::VectorXd& cand, Eigen::VectorXd& lam) {
    const int na = static_cast<int>(active.size());
    if (na == 0) {
      cand = target;
      lam.resize(0);
      return;
    }
    Eigen::MatrixXd A(na, n);
    Eigen::VectorXd rhs(na);
    for (int r = 0; r < na; ++r) {
      A.row(r) = G.row(active[r]);
      rhs[r] = G.row(active[r]).dot(target) - h[active[r]];
    }
    // cand = target - A^T lam with A A^T lam = A target - h
    lam = (A * A.transpose()).ldlt().solve(rhs);
    cand = target - A.transpose() * lam;
  };

  for (int guard = 0; guard < 6 * (n + m) + 16; ++guard) {
    Eigen::VectorXd cand, lam;
    solve_working(cand, lam);
    const Eigen::VectorXd step = cand - x;
    if (step.norm() <= 1e-12 * (1.0 + x.norm())) {
      // at the working-set minimizer: optimal once multipliers are clean
      int worst = -1;
      double most_negative = -1e-12;
      for (int r = 0; r < lam.size(); ++r)
        if (lam[r] < most_negative) {
          most_negative = lam[r];
          worst = r;
        }
      if (worst < 0) {
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) out[i] = x[i];
        return out;
      }
      active.erase(active.begin() + worst);
      continue;
    }
    // longest feasible move toward the working-set minimizer
    double alpha = 1.0;
    int block = -1;
    for (int r = 0; r < m; ++r) {
      if (std::find(active.begin(), active.end(), r) != active.end()) continue;
      const double dir = G.row(r).dot(step);
      if (dir <= 1e-14 * G.row(r).norm()) continue;
      const double room = h[r] - G.row(r).dot(x);
      const double a = room / dir;
      if (a < alpha - 1e-14) {
        alpha = a;
        block = r;
      }
    }
    x += std::max(0.0, alpha) * step;
    if (block >= 0) active.push_back(block);
  }
  throw std::logic_error("project_polyhedron: active set failed to settle");
}

}  // namespace detail

// Euclidean projection of one pair's horizon vector b = zbar + u onto
// {eta >= 0 : fleet * sum_{tau <= t} eta(tau) <= omega(t) for all t}.
inline std::vector<double> project_pickups(const std::vector<double>& b,
                                           const std::vector<double>& omega,
                                           int fleet) {
  const int t_len = static_cast<int>(b.size());
  if (static_cast<int>(omega.size()) != t_len)
    throw std::invalid_argument("project_pickups: omega size mismatch");
  bool inside = true;
  double run = 0.0;
  for (int t = 0; t < t_len && inside; ++t) {
    inside = b[t] >= 0.0;
    run += fleet * std::max(0.0, b[t]);
    inside = inside && run <= omega[t] + 1e-15;
  }
  if (inside) return b;

  Eigen::MatrixXd G(2 * t_len, t_len);
  Eigen::VectorXd h(2 * t_len);
  G.setZero();
  for (int t = 0; t < t_len; ++t) {
    G(t, t) = -1.0;  // eta >= 0
    h[t] = 0.0;
    for (int tau = 0; tau <= t; ++tau) G(t_len + t, tau) = fleet;
    h[t_len + t] = omega[t];
  }
  return detail::project_polyhedron(b, G, h);
}

// u <- u + zbar - etabar with the two-lag cycling probe: the dual revisiting
// its value from two iterations ago while still moving flags an oscillation
// the proximal terms should be damping.
inline void dual_update(SharingState& st, double tol = 1e-3) {
  const int n = st.layout.size();
  std::vector<double> next(n);
  for (int i = 0; i < n; ++i)
    next[i] = st.u[i] + st.z_bar[i] - st.eta_bar[i];
  if (!st.u_prev.empty()) {
    double lag2 = 0.0, lag1 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d2 = next[i] - st.u_prev[i];
      const double d1 = next[i] - st.u[i];
      lag2 += d2 * d2;
      lag1 += d1 * d1;
    }
    if (std::sqrt(lag2) < 1e-9 && std::sqrt(lag1) > tol) st.cycling = true;
  }
  st.u_prev2 = std::move(st.u_prev);
  st.u_prev = st.u;
  st.u = std::move(next);
}

// ---------------------------------------------------------------------------
// per-vehicle subproblem

// One vehicle's route/charge model: the same action, location, serve, plug,
// converter, energy and floor rows the centralized program emits for that
// vehicle, with only its own welfare terms in the objective.  Shared rows
// (queue evolution, plug capacity, the grid) are the coordinator's business.
struct VehicleModel {
  int vehicle = -1;
  ModelSpec base;
  std::vector<std::vector<int>> move, pickup;          // [slot][ordinal]
  std::vector<std::vector<int>> plug_charge, plug_discharge;
  std::vector<std::vector<int>> charge_frac, discharge_frac;
  std::vector<std::vector<int>> conv_p, conv_q;
  std::vector<std::vector<int>> presence;              // [state][zone]
  std::vector<int> stored;                             // [state]
  std::vector<int> shared_col;                         // layout index -> column
};

inline VehicleModel assemble_vehicle_subproblem(const DispatchProblem& p,
                                                int v) {
  if (!p.scenario) throw std::invalid_argument("vehicle model: no scenario");
  const Scenario& sc = p.sc();
  const int T = p.horizon;
  const int Q = sc.road.num_nodes();
  const int P = static_cast<int>(sc.demand.size());
  if (v < 0 || v >= static_cast<int>(p.fleet.size()))
    throw std::invalid_argument("vehicle model: vehicle index");

  const double dth = sc.dt_hours();
  const double cr = sc.fleet.charge_rate_mw;
  const double dr = sc.fleet.discharge_rate_mw;
  const double floor_lb = sc.fleet.soc_floor_mwh;
  const auto cuts =
      build_polygon_cuts(sc.fleet.polygon_cuts, sc.fleet.converter_limit_mva);
  const double conv_q_max =
      sc.fleet.converter_limit_mva / std::cos(M_PI / sc.fleet.polygon_cuts);

  std::vector<std::pair<int, int>> moves;
  std::vector<std::vector<int>> move_id(Q, std::vector<int>(Q, -1));
  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < Q; ++r)
      if (q != r) {
        move_id[q][r] = static_cast<int>(moves.size());
        moves.emplace_back(q, r);
      }
  const int M = static_cast<int>(moves.size());

  std::vector<int> charger_zone, plug_block(Q, -1);
  for (int q = 0; q < Q; ++q)
    if (sc.road.chargers[q] > 0) {
      plug_block[q] = static_cast<int>(charger_zone.size());
      charger_zone.push_back(q);
    }
  const int C = static_cast<int>(charger_zone.size());

  std::vector<char> pair_active(P, 0);
  for (int pr = 0; pr < P; ++pr) {
    bool active = p.queue.waiting[pr] > 0.0;
    for (double d : p.forecast.mean[pr]) active = active || d > 0.0;
    pair_active[pr] = active ? 1 : 0;
  }

  VehicleModel out;
  out.vehicle = v;
  ModelSpec& model = out.base;
  auto slot_block = [&](std::vector<std::vector<int>>& a, int inner) {
    a.assign(T, std::vector<int>(inner, -1));
  };
  slot_block(out.move, M);
  slot_block(out.pickup, P);
  slot_block(out.plug_charge, C);
  slot_block(out.plug_discharge, C);
  slot_block(out.charge_frac, C);
  slot_block(out.discharge_frac, C);
  slot_block(out.conv_p, C);
  slot_block(out.conv_q, C);
  out.presence.assign(T + 1, std::vector<int>(Q, -1));
  out.stored.assign(T + 1, -1);

  const int first = p.first_parked_slot(v);
  const bool serve_ok = p.caps[v].may_serve;
  const bool dch_ok = p.caps[v].may_discharge;
  for (int t = first; t < T; ++t) {
    for (int m = 0; m < M; ++m) out.move[t][m] = model.add_binary();
    for (int pr = 0; pr < P; ++pr)
      if (pair_active[pr])
        out.pickup[t][pr] = serve_ok ? model.add_binary()
                                     : model.add_variable(0.0, 0.0, true);
    for (int c = 0; c < C; ++c) {
      out.plug_charge[t][c] = model.add_binary();
      out.plug_discharge[t][c] =
          dch_ok ? model.add_binary() : model.add_variable(0.0, 0.0, true);
      out.charge_frac[t][c] = model.add_variable(0.0, 1.0);
      out.discharge_frac[t][c] = model.add_variable(0.0, dch_ok ? 1.0 : 0.0);
      out.conv_p[t][c] = model.add_variable(dch_ok ? -dr : 0.0, cr);
      out.conv_q[t][c] = model.add_variable(-conv_q_max, conv_q_max);
    }
  }
  for (int t = first + 1; t <= T; ++t) {
    for (int q = 0; q < Q; ++q)
      out.presence[t][q] = model.add_variable(0.0, 1.0);
    out.stored[t] = model.add_variable(floor_lb, sc.fleet.battery_mwh);
  }

  using Terms = std::vector<std::pair<int, double>>;
  auto add = [&](Terms terms, RowSense sense, double rhs, std::string name) {
    if (!terms.empty()) model.add_row(std::move(terms), sense, rhs, name);
  };

  for (int t = first; t < T; ++t) {
    const std::string tag = detail::vt(v, t);
    for (int q = 0; q < Q; ++q) {
      Terms terms;
      for (int r = 0; r < Q; ++r)
        if (r != q) terms.emplace_back(out.move[t][move_id[q][r]], 1.0);
      if (plug_block[q] >= 0) {
        terms.emplace_back(out.plug_charge[t][plug_block[q]], 1.0);
        terms.emplace_back(out.plug_discharge[t][plug_block[q]], 1.0);
      }
      double rhs = 0.0;
      if (t == first)
        rhs = detail::const_presence(p, v, t, q);
      else
        terms.emplace_back(out.presence[t][q], -1.0);
      add(std::move(terms), RowSense::le, rhs,
          "act" + tag + ",q" + std::to_string(q) + "]");
    }
    for (int q = 0; q < Q; ++q) {
      Terms terms{{out.presence[t + 1][q], 1.0}};
      double rhs = 0.0;
      for (int r = 0; r < Q; ++r)
        if (r != q) terms.emplace_back(out.move[t][move_id[q][r]], 1.0);
      for (int s = 0; s < Q; ++s) {
        if (s == q) continue;
        const int dep = t + 1 - sc.road.travel_steps[s][q];
        if (dep >= first && dep <= t)
          terms.emplace_back(out.move[dep][move_id[s][q]], -1.0);
      }
      if (t == first)
        rhs += detail::const_presence(p, v, t, q);
      else
        terms.emplace_back(out.presence[t][q], -1.0);
      add(std::move(terms), RowSense::eq, rhs,
          "loc" + tag + ",q" + std::to_string(q) + "]");
    }
    for (int pr = 0; pr < P; ++pr)
      if (out.pickup[t][pr] >= 0)
        add({{out.pickup[t][pr], 1.0},
             {out.move[t][move_id[sc.demand[pr].from][sc.demand[pr].to]],
              -1.0}},
            RowSense::le, 0.0, "serve" + tag + ",p" + std::to_string(pr) + "]");
    for (int c = 0; c < C; ++c) {
      const std::string ctag = tag + ",c" + std::to_string(c) + "]";
      add({{out.charge_frac[t][c], 1.0}, {out.plug_charge[t][c], -1.0}},
          RowSense::le, 0.0, "chfrac" + ctag);
      add({{out.discharge_frac[t][c], 1.0}, {out.plug_discharge[t][c], -1.0}},
          RowSense::le, 0.0, "dchfrac" + ctag);
      add({{out.conv_p[t][c], 1.0},
           {out.charge_frac[t][c], -cr},
           {out.discharge_frac[t][c], dr}},
          RowSense::eq, 0.0, "conv" + ctag);
      for (size_t j = 0; j < cuts.size(); ++j)
        add({{out.conv_p[t][c], cuts[j].ep_coef},
             {out.conv_q[t][c], cuts[j].eq_coef},
             {out.plug_charge[t][c], -cuts[j].rhs},
             {out.plug_discharge[t][c], -cuts[j].rhs}},
            RowSense::le, 0.0, "poly" + std::to_string(j) + ctag);
    }
    {
      Terms terms{{out.stored[t + 1], 1.0}};
      double rhs = 0.0;
      if (t == first)
        rhs += p.fleet[v].soc_mwh;
      else
        terms.emplace_back(out.stored[t], -1.0);
      for (int m = 0; m < M; ++m)
        terms.emplace_back(out.move[t][m],
                           sc.road.travel_energy[moves[m].first]
                                                [moves[m].second]);
      for (int c = 0; c < C; ++c) {
        terms.emplace_back(out.charge_frac[t][c],
                           -cr * sc.fleet.charge_efficiency * dth);
        terms.emplace_back(out.discharge_frac[t][c],
                           dr / sc.fleet.discharge_efficiency * dth);
      }
      add(std::move(terms), RowSense::eq, rhs, "soc" + tag + "]");
    }
  }
  bool zoned = false;
  for (int q = 0; q < Q; ++q)
    zoned = zoned || sc.fleet.zone_soc_floor_mwh[q] > floor_lb + 1e-12;
  if (zoned)
    for (int t = first + 1; t <= T; ++t) {
      Terms terms{{out.stored[t], 1.0}};
      for (int q = 0; q < Q; ++q) {
        const double extra = sc.fleet.zone_soc_floor_mwh[q] - floor_lb;
        if (extra > 1e-12) terms.emplace_back(out.presence[t][q], -extra);
      }
      add(std::move(terms), RowSense::ge, floor_lb,
          "floor" + detail::vt(v, t) + "]");
    }

  // vehicle-side welfare: pickups earn the queue-weighted fare, plug
  // throughput pays wear; grid revenue and generation stay with the grid agent
  const double inv_t = 1.0 / T;
  const Pricing& mu = sc.pricing;
  for (int pr = 0; pr < P; ++pr) {
    if (!pair_active[pr]) continue;
    const double trip_value =
        mu.unserved_passenger * p.queue.waiting[pr] +
        mu.trip_revenue_per_hour *
            sc.road.travel_steps[sc.demand[pr].from][sc.demand[pr].to] * dth;
    for (int t = first; t < T; ++t)
      if (out.pickup[t][pr] >= 0)
        model.add_linear_cost(out.pickup[t][pr], -inv_t * trip_value);
  }
  for (int t = first; t < T; ++t)
    for (int c = 0; c < C; ++c) {
      model.add_linear_cost(out.charge_frac[t][c],
                            inv_t * mu.throughput_per_mwh * dth * cr);
      model.add_linear_cost(out.discharge_frac[t][c],
                            inv_t * mu.throughput_per_mwh * dth * dr);
    }

  // shared-column map
  out.shared_col.assign(
      SharingLayout{T, P, C}.size(), -1);
  const SharingLayout lay{T, P, C};
  for (int t = first; t < T; ++t) {
    for (int pr = 0; pr < P; ++pr)
      if (out.pickup[t][pr] >= 0)
        out.shared_col[lay.pickup(pr, t)] = out.pickup[t][pr];
    for (int c = 0; c < C; ++c) {
      out.shared_col[lay.plug_charge(c, t)] = out.plug_charge[t][c];
      out.shared_col[lay.plug_discharge(c, t)] = out.plug_discharge[t][c];
      out.shared_col[lay.power_p(c, t)] = out.conv_p[t][c];
      out.shared_col[lay.power_q(c, t)] = out.conv_q[t][c];
    }
  }
  return out;
}

// pin every integer action of one vehicle to a reference plan; used for the
// convex (binaries fixed fleet-wide) regime
inline void pin_vehicle_plan(const DispatchProblem& p, VehicleModel& vm,
                             const std::vector<VehicleAction>& plan) {
  const Scenario& sc = p.sc();
  const int Q = sc.road.num_nodes();
  std::vector<std::vector<int>> move_id(Q, std::vector<int>(Q, -1));
  int next = 0;
  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < Q; ++r)
      if (q != r) move_id[q][r] = next++;
  const int first = p.first_parked_slot(vm.vehicle);
  for (int t = first; t < p.horizon; ++t) {
    const VehicleAction& a =
        t < static_cast<int>(plan.size()) ? plan[t] : VehicleAction{};
    for (size_t m = 0; m < vm.move[t].size(); ++m)
      if (vm.move[t][m] >= 0) vm.base.fix_variable(vm.move[t][m], 0.0);
    if (a.at_zone >= 0 && a.move_to >= 0)
      vm.base.fix_variable(vm.move[t][move_id[a.at_zone][a.move_to]], 1.0);
    for (size_t pr = 0; pr < vm.pickup[t].size(); ++pr)
      if (vm.pickup[t][pr] >= 0)
        vm.base.fix_variable(
            vm.pickup[t][pr],
            a.serving && a.serve_pair == static_cast<int>(pr) ? 1.0 : 0.0);
    int here_block = -1;
    if (a.at_zone >= 0 && sc.road.chargers[a.at_zone] > 0) {
      int seen = 0;
      for (int q = 0; q <= a.at_zone; ++q)
        if (sc.road.chargers[q] > 0) here_block = seen++;
    }
    for (size_t c = 0; c < vm.plug_charge[t].size(); ++c) {
      const bool here = here_block == static_cast<int>(c);
      vm.base.fix_variable(vm.plug_charge[t][c],
                           here && a.plug_charge ? 1.0 : 0.0);
      if (vm.plug_discharge[t][c] >= 0)
        vm.base.fix_variable(vm.plug_discharge[t][c],
                             here && a.plug_discharge ? 1.0 : 0.0);
    }
  }
}

// decode one vehicle's solver point into its action plan
inline std::vector<VehicleAction> decode_vehicle_plan(
    const DispatchProblem& p, const VehicleModel& vm,
    const std::vector<double>& x) {
  const Scenario& sc = p.sc();
  const int T = p.horizon;
  const int Q = sc.road.num_nodes();
  const double cr = sc.fleet.charge_rate_mw;
  const double dr = sc.fleet.discharge_rate_mw;
  std::vector<std::pair<int, int>> moves;
  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < Q; ++r)
      if (q != r) moves.emplace_back(q, r);
  std::vector<int> plug_block(Q, -1);
  int next = 0;
  for (int q = 0; q < Q; ++q)
    if (sc.road.chargers[q] > 0) plug_block[q] = next++;

  std::vector<VehicleAction> plan(T);
  const int first = p.first_parked_slot(vm.vehicle);
  for (int t = first; t < T; ++t) {
    VehicleAction& a = plan[t];
    if (t == first) {
      a.at_zone = p.fleet[vm.vehicle].location;
    } else {
      for (int q = 0; q < Q; ++q)
        if (x.at(vm.presence[t][q]) > 0.5) a.at_zone = q;
    }
    for (size_t m = 0; m < moves.size(); ++m)
      if (x.at(vm.move[t][m]) > 0.5) a.move_to = moves[m].second;
    for (size_t pr = 0; pr < vm.pickup[t].size(); ++pr)
      if (vm.pickup[t][pr] >= 0 && x.at(vm.pickup[t][pr]) > 0.5) {
        a.serving = true;
        a.serve_pair = static_cast<int>(pr);
      }
    const int c = a.at_zone >= 0 ? plug_block[a.at_zone] : -1;
    if (c >= 0) {
      a.plug_charge = x.at(vm.plug_charge[t][c]) > 0.5;
      a.plug_discharge = x.at(vm.plug_discharge[t][c]) > 0.5;
      if (a.plug_charge) a.charge_mw = x.at(vm.charge_frac[t][c]) * cr;
      if (a.plug_discharge)
        a.discharge_mw = x.at(vm.discharge_frac[t][c]) * dr;
      if (a.plugged()) a.reactive_mvar = x.at(vm.conv_q[t][c]);
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// vehicle step

struct VehicleStepResult {
  std::vector<double> z;           // new shared vector
  std::vector<double> x;           // full solver point, next warm start
  std::vector<VehicleAction> plan;
  SolveStatus status = SolveStatus::infeasible;
};

// One sharing iterate for vehicle v: its own welfare plus the decayed
// quadratic pull toward the consensus target z^v_k - zbar_k + etabar_k - u_k
// and the proximal tie to its previous plan.
inline VehicleStepResult vehicle_step(const VehicleModel& vm,
                                      const SharingState& st,
                                      const DispatchProblem& p,
                                      const SolveOptions& solve,
                                      const std::vector<double>* warm) {
  const int v = vm.vehicle;
  ModelSpec model = vm.base;
  const int n_shared = st.layout.size();
  for (int i = 0; i < n_shared; ++i) {
    const int col = vm.shared_col[i];
    if (col < 0) continue;
    const double rho = st.rho.at(st.layout, i);
    const double center =
        st.z[v][i] - st.z_bar[i] + st.eta_bar[i] - st.u[i];
    model.add_quadratic_cost(col, rho / 2.0, center);
    if (st.epsilon[v] > 0.0)
      model.add_quadratic_cost(col, st.epsilon[v] / 2.0, st.z[v][i]);
  }

  SolveOptions opt = solve;
  opt.warm_start = warm && !warm->empty() ? warm : nullptr;
  MiqpSolver solver(model);
  Solution s = solver.solve(opt);
  VehicleStepResult out;
  out.status = s.status;
  if (s.x.empty()) {
    if (s.status == SolveStatus::infeasible)
      throw std::runtime_error("vehicle_step: vehicle " + std::to_string(v) +
                               " subproblem infeasible");
    return out;
  }
  out.z.assign(n_shared, 0.0);
  for (int i = 0; i < n_shared; ++i)
    if (vm.shared_col[i] >= 0) out.z[i] = s.x[vm.shared_col[i]];
  out.plan = decode_vehicle_plan(p, vm, s.x);
  out.x = std::move(s.x);
  return out;
}

// ---------------------------------------------------------------------------
// run loop

struct SharingTraceRow {
  int iter = 0;
  double residual = 0.0;
  int binaries_changed = 0;
  double wall_seconds = 0.0;
};

struct SharingOptions {
  SharingPenalties rho;
  double eps_bar = 0.1;    // proximal weights drawn from U(0, eps_bar)
  double tol = 1e-3;       // on ||zbar - etabar||_2
  int max_iters = 30;
  std::uint64_t seed = 0;
  // vehicle steps are heuristic inner iterations: a good dive incumbent
  // beats a certified optimum that takes a hundred times longer
  SolveOptions solve = [] {
    SolveOptions o;
    o.relative_gap = 0.03;
    o.node_limit = 100;
    return o;
  }();
  // binaries pinned fleet-wide (convex regime) when set
  const std::vector<std::vector<VehicleAction>>* pin_plans = nullptr;
  // initial iterate and warm start, e.g. the previous MPC step's plans
  const std::vector<std::vector<VehicleAction>>* init_plans = nullptr;
};

struct SharingResult {
  std::vector<std::vector<VehicleAction>> plans;  // slot 0 legalized
  std::vector<StationPower> station;              // per slot, from the plans
  double objective = 0.0;                         // fleet-side welfare
  bool converged = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  SharingState state;
  std::vector<SharingTraceRow> trace;
};

// fleet-side welfare of a plan set: queue-weighted fares plus occupied-time
// revenue minus plug wear, averaged per slot like the assembled objective
inline double fleet_plan_value(const DispatchProblem& p,
                               const std::vector<std::vector<VehicleAction>>&
                                   plans) {
  const Scenario& sc = p.sc();
  const double dth = sc.dt_hours();
  const double inv_t = 1.0 / p.horizon;
  const Pricing& mu = sc.pricing;
  double val = 0.0;
  for (const auto& plan : plans)
    for (const auto& a : plan) {
      if (a.serving) {
        const auto& d = sc.demand[a.serve_pair];
        val += inv_t * (mu.unserved_passenger * p.queue.waiting[a.serve_pair] +
                        mu.trip_revenue_per_hour *
                            sc.road.travel_steps[d.from][d.to] * dth);
      }
      val -= inv_t * mu.throughput_per_mwh * dth * (a.charge_mw + a.discharge_mw);
    }
  return val;
}

namespace detail {

// Welfare surrogate used to rank legalized snapshots while the duals swing:
// fares credited only while cumulative pickups stay under the expected queue
// supply, minus plug wear, minus the upper level's quadratic pull evaluated
// at the aggregate station powers the snapshot would produce.
inline double snapshot_score(const DispatchProblem& p,
                             const ConsensusCoupling* coupling,
                             const std::vector<std::vector<VehicleAction>>&
                                 plans) {
  const Scenario& sc = p.sc();
  const double dth = sc.dt_hours();
  const double inv_t = 1.0 / p.horizon;
  const Pricing& mu = sc.pricing;
  const int P = static_cast<int>(sc.demand.size());
  double val = 0.0;

  for (int pr = 0; pr < P; ++pr) {
    const auto omega =
        cumulative_pickup_bound(p.queue.waiting[pr], p.forecast.mean[pr]);
    const auto& d = sc.demand[pr];
    const double fare =
        mu.unserved_passenger * p.queue.waiting[pr] +
        mu.trip_revenue_per_hour * sc.road.travel_steps[d.from][d.to] * dth;
    double credited = 0.0;
    for (int t = 0; t < p.horizon; ++t) {
      int takers = 0;
      for (const auto& plan : plans)
        if (t < static_cast<int>(plan.size()) && plan[t].serving &&
            plan[t].serve_pair == pr)
          ++takers;
      const double room = std::max(0.0, omega[t] - credited);
      const double credit = std::min<double>(takers, room);
      // only the first slot ever executes; later slots are intent that the
      // next planning step rewrites, so they count at a discount
      val += inv_t * fare * credit * (t == 0 ? 1.0 : 0.4);
      credited += credit;
    }
  }
  for (const auto& plan : plans)
    for (const auto& a : plan)
      val -= inv_t * mu.throughput_per_mwh * dth *
             (a.charge_mw + a.discharge_mw);

  if (coupling && !coupling->empty()) {
    const std::vector<int> charger_zone = sc.charger_zones();
    for (int t = 0; t < p.horizon; ++t) {
      const StationPower agg =
          station_power_from_actions(sc, slot_actions(plans, t));
      for (size_t c = 0; c < charger_zone.size(); ++c) {
        const int node = sc.grid_node_of_zone(charger_zone[c]);
        if (node < 0) continue;
        const PowerCoupling& gp = coupling->p[c][t];
        const PowerCoupling& gq = coupling->q[c][t];
        const double sp = agg.p_mw[node];
        const double sq = agg.q_mvar[node];
        val -= 0.5 * gp.weight * (sp - gp.center) * (sp - gp.center) +
               gp.linear * sp;
        val -= 0.5 * gq.weight * (sq - gq.center) * (sq - gq.center) +
               gq.linear * sq;
      }
    }
  }
  return val;
}

// greedy slot-0 repair: drop pickups beyond the live queue and unplug past
// station capacity, lowest marginal value first, until the executed slice is
// legal on every shared constraint
inline void legalize_slot0(const DispatchProblem& p,
                           const ConsensusCoupling* coupling,
                           std::vector<std::vector<VehicleAction>>& plans) {
  const Scenario& sc = p.sc();
  const int V = static_cast<int>(plans.size());
  const int P = static_cast<int>(sc.demand.size());
  const double dth = sc.dt_hours();
  const double inv_t = 1.0 / p.horizon;

  // pickups against the current queue
  for (int pr = 0; pr < P; ++pr) {
    std::vector<int> takers;
    for (int v = 0; v < V; ++v)
      if (!plans[v].empty() && plans[v][0].serving &&
          plans[v][0].serve_pair == pr)
        takers.push_back(v);
    int cap = static_cast<int>(std::floor(p.queue.waiting[pr] + 1e-9));
    // same fare for everyone on the pair: later vehicles yield first
    while (static_cast<int>(takers.size()) > cap) {
      const int v = takers.back();
      takers.pop_back();
      plans[v][0].serving = false;
      plans[v][0].serve_pair = -1;
    }
  }

  // plugs against station capacity
  for (int q = 0; q < sc.road.num_nodes(); ++q) {
    const int cap = sc.road.chargers[q];
    if (cap <= 0) continue;
    std::vector<int> plugged;
    for (int v = 0; v < V; ++v)
      if (!plans[v].empty() && plans[v][0].at_zone == q &&
          plans[v][0].plugged())
        plugged.push_back(v);
    if (static_cast<int>(plugged.size()) <= cap) continue;

    int block = -1, seen = 0;
    for (int z = 0; z <= q; ++z)
      if (sc.road.chargers[z] > 0) block = seen++;
    const PowerCoupling gp = coupling && !coupling->empty()
                                 ? coupling->p[block][0]
                                 : PowerCoupling{};
    const PowerCoupling gq = coupling && !coupling->empty()
                                 ? coupling->q[block][0]
                                 : PowerCoupling{};
    auto penalty = [&](double sp, double sq) {
      double c = 0.0;
      if (gp.weight > 0.0)
        c += 0.5 * gp.weight * (sp - gp.center) * (sp - gp.center) +
             gp.linear * sp;
      if (gq.weight > 0.0)
        c += 0.5 * gq.weight * (sq - gq.center) * (sq - gq.center) +
             gq.linear * sq;
      return c;
    };
    double sp = 0.0, sq = 0.0;
    for (int v : plugged) {
      sp += grid_active_power(plans[v][0].charge_mw, plans[v][0].discharge_mw);
      sq += plans[v][0].reactive_mvar;
    }
    while (static_cast<int>(plugged.size()) > cap) {
      int drop = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int v : plugged) {
        const VehicleAction& a = plans[v][0];
        const double cp = grid_active_power(a.charge_mw, a.discharge_mw);
        const double wear =
            inv_t * sc.pricing.throughput_per_mwh * dth *
            (a.charge_mw + a.discharge_mw);
        // cost of the station after v lets go, minus the wear it stops paying
        const double score = penalty(sp - cp, sq - a.reactive_mvar) - wear;
        // keep a vehicle whose unplugging strands it under its zone floor
        const bool guarded =
            p.fleet[v].soc_mwh <
            sc.fleet.zone_soc_floor_mwh[q] - 1e-9;
        const double eff = guarded ? score + 1e9 : score;
        if (eff < best || (eff == best && v > drop)) {
          best = eff;
          drop = v;
        }
      }
      VehicleAction& a = plans[drop][0];
      sp -= grid_active_power(a.charge_mw, a.discharge_mw);
      sq -= a.reactive_mvar;
      a.plug_charge = a.plug_discharge = false;
      a.charge_mw = a.discharge_mw = a.reactive_mvar = 0.0;
      plugged.erase(std::find(plugged.begin(), plugged.end(), drop));
    }
  }
}

}  // namespace detail

inline SharingResult run_sharing(const DispatchProblem& p,
                                 const SharingOptions& opts,
                                 const ConsensusCoupling* coupling = nullptr) {
  const Scenario& sc = p.sc();
  const int T = p.horizon;
  const int V = static_cast<int>(p.fleet.size());
  const int P = static_cast<int>(sc.demand.size());
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  std::vector<VehicleModel> vms;
  vms.reserve(V);
  for (int v = 0; v < V; ++v) {
    vms.push_back(assemble_vehicle_subproblem(p, v));
    if (opts.pin_plans) pin_vehicle_plan(p, vms.back(), (*opts.pin_plans)[v]);
  }
  const SharingLayout lay{T, P, static_cast<int>(sc.charger_zones().size())};

  SharingResult res;
  SharingState& st = res.state;
  st.layout = lay;
  st.rho = opts.rho;
  st.z.assign(V, std::vector<double>(lay.size(), 0.0));
  st.u.assign(lay.size(), 0.0);
  st.epsilon.assign(V, 0.0);
  Rng rng(opts.seed);
  for (int v = 0; v < V; ++v) st.epsilon[v] = rng.uniform(0.0, opts.eps_bar);

  std::vector<std::vector<double>> warm(V);
  res.plans.assign(V, std::vector<VehicleAction>(T));
  const auto* seed_plans = opts.pin_plans ? opts.pin_plans : opts.init_plans;
  if (seed_plans) {
    for (int v = 0; v < V && v < static_cast<int>(seed_plans->size()); ++v) {
      const auto& plan = (*seed_plans)[v];
      for (int t = p.first_parked_slot(v);
           t < T && t < static_cast<int>(plan.size()); ++t) {
        const VehicleAction& a = plan[t];
        if (a.serving && a.serve_pair >= 0 &&
            vms[v].shared_col[lay.pickup(a.serve_pair, t)] >= 0)
          st.z[v][lay.pickup(a.serve_pair, t)] = 1.0;
        if (a.at_zone >= 0 && sc.road.chargers[a.at_zone] > 0) {
          int block = -1, seen = 0;
          for (int z = 0; z <= a.at_zone; ++z)
            if (sc.road.chargers[z] > 0) block = seen++;
          if (a.plug_charge) st.z[v][lay.plug_charge(block, t)] = 1.0;
          if (a.plug_discharge) st.z[v][lay.plug_discharge(block, t)] = 1.0;
          st.z[v][lay.power_p(block, t)] =
              grid_active_power(a.charge_mw, a.discharge_mw);
          st.z[v][lay.power_q(block, t)] = a.reactive_mvar;
        }
      }
    }
  }
  st.recompute_mean();

  const std::vector<int> charger_zone = sc.charger_zones();
  const int C = static_cast<int>(charger_zone.size());
  std::vector<std::vector<double>> omega(P);
  for (int pr = 0; pr < P; ++pr)
    omega[pr] = cumulative_pickup_bound(p.queue.waiting[pr],
                                        p.forecast.mean[pr]);

  auto project_means = [&] {
    st.eta_bar.assign(lay.size(), 0.0);
    for (int c = 0; c < C; ++c) {
      const double cap =
          static_cast<double>(sc.road.chargers[charger_zone[c]]) / V;
      for (int t = 0; t < T; ++t) {
        const auto [ech, edch] = project_station_capacity(
            st.z_bar[lay.plug_charge(c, t)] + st.u[lay.plug_charge(c, t)],
            st.z_bar[lay.plug_discharge(c, t)] +
                st.u[lay.plug_discharge(c, t)],
            cap);
        st.eta_bar[lay.plug_charge(c, t)] = ech;
        st.eta_bar[lay.plug_discharge(c, t)] = edch;
        const PowerCoupling gp =
            coupling && !coupling->empty() ? coupling->p[c][t]
                                           : PowerCoupling{};
        const PowerCoupling gq =
            coupling && !coupling->empty() ? coupling->q[c][t]
                                           : PowerCoupling{};
        st.eta_bar[lay.power_p(c, t)] = update_eta_power(
            st.z_bar[lay.power_p(c, t)] + st.u[lay.power_p(c, t)], gp,
            st.rho.decayed(st.rho.power_p, t), V);
        st.eta_bar[lay.power_q(c, t)] = update_eta_power(
            st.z_bar[lay.power_q(c, t)] + st.u[lay.power_q(c, t)], gq,
            st.rho.decayed(st.rho.power_q, t), V);
      }
    }
    for (int pr = 0; pr < P; ++pr) {
      std::vector<double> b(T);
      for (int t = 0; t < T; ++t)
        b[t] = st.z_bar[lay.pickup(pr, t)] + st.u[lay.pickup(pr, t)];
      const auto eta = project_pickups(b, omega[pr], V);
      for (int t = 0; t < T; ++t) st.eta_bar[lay.pickup(pr, t)] = eta[t];
    }
  };
  project_means();

  // the duals keep swinging while binaries oscillate, so the answer is the
  // best legalized snapshot seen anywhere along the run, not the last iterate
  std::vector<std::vector<VehicleAction>> best_plans;
  double best_score = -std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<std::vector<VehicleAction>>& plans) {
    auto legal = plans;
    detail::legalize_slot0(p, coupling, legal);
    const double score = detail::snapshot_score(p, coupling, legal);
    if (score > best_score) {
      best_score = score;
      best_plans = std::move(legal);
    }
  };
  if (seed_plans && static_cast<int>(seed_plans->size()) == V)
    consider(*seed_plans);

  int stable_iters = 0;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    int binaries_changed = 0;
    std::vector<std::vector<double>> z_next(V);
    for (int v = 0; v < V; ++v) {
      VehicleStepResult step =
          vehicle_step(vms[v], st, p, opts.solve, &warm[v]);
      if (step.z.empty())
        throw std::runtime_error("run_sharing: vehicle step returned nothing");
      for (int i = 0; i < lay.size(); ++i)
        if (lay.is_binary(i) &&
            std::round(step.z[i]) != std::round(st.z[v][i]))
          ++binaries_changed;
      z_next[v] = std::move(step.z);
      warm[v] = std::move(step.x);
      res.plans[v] = std::move(step.plan);
    }
    st.z = std::move(z_next);
    st.recompute_mean();
    project_means();
    dual_update(st, opts.tol);
    st.k = iter + 1;

    double r2 = 0.0;
    for (int i = 0; i < lay.size(); ++i) {
      const double d = st.z_bar[i] - st.eta_bar[i];
      r2 += d * d;
    }
    res.residual = std::sqrt(r2);
    res.iterations = iter + 1;
    res.trace.push_back({iter + 1, res.residual, binaries_changed, elapsed()});
    consider(res.plans);

    // a zero-flip iteration means the integer plan survived one full round:
    // identical across two consecutive iterates
    stable_iters = binaries_changed == 0 ? stable_iters + 1 : 0;
    if (res.residual < opts.tol && stable_iters >= 1) {
      res.converged = true;
      break;
    }
  }

  if (!best_plans.empty()) res.plans = std::move(best_plans);
  detail::legalize_slot0(p, coupling, res.plans);
  res.station.clear();
  for (int t = 0; t < T; ++t)
    res.station.push_back(
        station_power_from_actions(sc, slot_actions(res.plans, t)));
  res.objective = fleet_plan_value(p, res.plans);
  return res;
}

}  // namespace saev
