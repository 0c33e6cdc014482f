#pragma once

// Centralized model-predictive dispatch: vehicle routing, passenger pickup,
// plug scheduling and the reconfigurable feeder joined in one mixed-integer
// program, solved by branch and bound and decoded back to per-vehicle plans.
//
// Conventions:
//  - decision slots 0..T-1 act on states 0..T; slot-0 locations, stored
//    energy and queue lengths are constants of the instance, not variables
//  - a trip departing at slot tau pays its energy on departure and parks the
//    vehicle C steps later; trips may finish beyond the horizon
//  - arrivals of the current step are already merged into the queue, so
//    forecasts carry zero in slot 0
//  - presence, stored energy and queue lengths stay continuous; integrality
//    follows from the binary movement and plug decisions

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "saev/fleet.hpp"
#include "saev/grid.hpp"
#include "saev/model.hpp"
#include "saev/queueing.hpp"
#include "saev/scenario.hpp"
#include "saev/solver.hpp"

namespace saev {

struct DispatchProblem {
  const Scenario* scenario = nullptr;
  int start_step = 0;  // absolute step of slot 0; line outages are absolute
  int horizon = 1;
  std::vector<VehicleState> fleet;
  std::vector<VehicleCaps> caps;
  QueueState queue;
  DemandForecast forecast;                   // [pair][slot]
  std::vector<std::vector<double>> loads_p;  // [slot][grid node] MW
  std::vector<std::vector<double>> loads_q;  // [slot][grid node] MVAr

  const Scenario& sc() const { return *scenario; }

  // first slot at which vehicle v is parked and controllable, capped at the
  // horizon for vehicles still driving when it ends
  int first_parked_slot(int v) const {
    return std::clamp(fleet[v].arrive_at - start_step, 0, horizon);
  }
};

inline DispatchProblem make_dispatch_problem(const Scenario& sc,
                                             FleetMode mode = FleetMode::saev,
                                             int start_step = 0) {
  DispatchProblem p;
  p.scenario = &sc;
  p.start_step = start_step;
  p.horizon = sc.horizon_steps;
  p.fleet = initial_fleet(sc);
  p.caps = apply_fleet_mode(mode, sc.fleet.count);
  p.queue = QueueState::empty(sc);
  p.forecast = DemandForecast::constant_rates(sc, p.horizon);
  p.loads_p.assign(p.horizon, sc.grid.load_p_mw);
  p.loads_q.assign(p.horizon, sc.grid.load_q_mvar);
  return p;
}

// Column maps of one assembled program; -1 marks entries that are instance
// constants (pre-arrival slots, slot 0) or pruned (idle demand pairs).
struct DispatchVariables {
  int horizon = 0;
  std::vector<std::pair<int, int>> moves;  // ordered zone pairs, from != to
  std::vector<std::vector<int>> move_id;   // [from][to], -1 on the diagonal
  std::vector<int> charger_zone;           // plug block ordinal -> zone
  std::vector<int> plug_block;             // zone -> ordinal, -1 w/o chargers
  std::vector<char> pair_active;           // demand pairs kept after pruning

  // [vehicle][slot][move or pair or plug ordinal]
  std::vector<std::vector<std::vector<int>>> move, pickup;
  std::vector<std::vector<std::vector<int>>> plug_charge, plug_discharge;
  std::vector<std::vector<std::vector<int>>> charge_frac, discharge_frac;
  std::vector<std::vector<std::vector<int>>> conv_p, conv_q;
  std::vector<std::vector<std::vector<int>>> presence;  // [vehicle][state][zone]
  std::vector<std::vector<int>> stored;                 // [vehicle][state]
  std::vector<std::vector<int>> waiting;                // [pair][state]
  GridVariables grid;
};

struct AssembledDispatch {
  ModelSpec model;
  DispatchVariables vars;
};

namespace detail {

inline double const_presence(const DispatchProblem& p, int v, int t, int q) {
  const VehicleState& s = p.fleet[v];
  return (s.arrive_at - p.start_step <= t && s.location == q) ? 1.0 : 0.0;
}

inline std::string vt(int v, int t) {
  return "[v" + std::to_string(v) + ",t" + std::to_string(t);
}

}  // namespace detail

inline AssembledDispatch assemble_milp(const DispatchProblem& p) {
  if (!p.scenario) throw std::invalid_argument("dispatch: missing scenario");
  const Scenario& sc = p.sc();
  const int T = p.horizon;
  const int V = static_cast<int>(p.fleet.size());
  const int Q = sc.road.num_nodes();
  const int P = static_cast<int>(sc.demand.size());
  if (T < 1) throw std::invalid_argument("dispatch: horizon must be >= 1");
  if (V != sc.fleet.count || static_cast<int>(p.caps.size()) != V)
    throw std::invalid_argument("dispatch: fleet state/caps size mismatch");
  if (static_cast<int>(p.queue.waiting.size()) != P ||
      static_cast<int>(p.forecast.mean.size()) != P)
    throw std::invalid_argument("dispatch: queue/forecast size mismatch");
  for (const auto& row : p.forecast.mean)
    if (static_cast<int>(row.size()) != T)
      throw std::invalid_argument("dispatch: forecast horizon mismatch");
  if (static_cast<int>(p.loads_p.size()) != T ||
      static_cast<int>(p.loads_q.size()) != T)
    throw std::invalid_argument("dispatch: load trajectory size mismatch");
  for (int q = 0; q < Q; ++q)
    if (sc.road.chargers[q] > 0 && sc.coupling[q] < 0)
      throw std::invalid_argument("dispatch: charging station " +
                                  sc.road.node_names[q] +
                                  " is not coupled to a grid node");

  const double dth = sc.dt_hours();
  const double cr = sc.fleet.charge_rate_mw;
  const double dr = sc.fleet.discharge_rate_mw;
  const double floor_lb = sc.fleet.soc_floor_mwh;
  const auto cuts =
      build_polygon_cuts(sc.fleet.polygon_cuts, sc.fleet.converter_limit_mva);
  const double conv_q_max =
      sc.fleet.converter_limit_mva / std::cos(M_PI / sc.fleet.polygon_cuts);

  AssembledDispatch out;
  ModelSpec& model = out.model;
  DispatchVariables& dv = out.vars;
  dv.horizon = T;

  dv.move_id.assign(Q, std::vector<int>(Q, -1));
  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < Q; ++r)
      if (q != r) {
        dv.move_id[q][r] = static_cast<int>(dv.moves.size());
        dv.moves.emplace_back(q, r);
      }
  const int M = static_cast<int>(dv.moves.size());

  dv.plug_block.assign(Q, -1);
  for (int q = 0; q < Q; ++q)
    if (sc.road.chargers[q] > 0) {
      dv.plug_block[q] = static_cast<int>(dv.charger_zone.size());
      dv.charger_zone.push_back(q);
    }
  const int C = static_cast<int>(dv.charger_zone.size());

  dv.pair_active.assign(P, 0);
  for (int pr = 0; pr < P; ++pr) {
    bool active = p.queue.waiting[pr] > 0.0;
    for (double d : p.forecast.mean[pr]) active = active || d > 0.0;
    dv.pair_active[pr] = active ? 1 : 0;
  }

  auto block3 = [&](std::vector<std::vector<std::vector<int>>>& a, int inner) {
    a.assign(V, std::vector<std::vector<int>>(T, std::vector<int>(inner, -1)));
  };
  block3(dv.move, M);
  block3(dv.pickup, P);
  block3(dv.plug_charge, C);
  block3(dv.plug_discharge, C);
  block3(dv.charge_frac, C);
  block3(dv.discharge_frac, C);
  block3(dv.conv_p, C);
  block3(dv.conv_q, C);
  dv.presence.assign(
      V, std::vector<std::vector<int>>(T + 1, std::vector<int>(Q, -1)));
  dv.stored.assign(V, std::vector<int>(T + 1, -1));
  dv.waiting.assign(P, std::vector<int>(T + 1, -1));

  // ---- columns ----
  for (int v = 0; v < V; ++v) {
    const int first = p.first_parked_slot(v);
    const bool serve_ok = p.caps[v].may_serve;
    const bool dch_ok = p.caps[v].may_discharge;
    for (int t = first; t < T; ++t) {
      for (int m = 0; m < M; ++m) dv.move[v][t][m] = model.add_binary();
      for (int pr = 0; pr < P; ++pr)
        if (dv.pair_active[pr])
          dv.pickup[v][t][pr] = serve_ok ? model.add_binary()
                                         : model.add_variable(0.0, 0.0, true);
      for (int c = 0; c < C; ++c) {
        dv.plug_charge[v][t][c] = model.add_binary();
        dv.plug_discharge[v][t][c] =
            dch_ok ? model.add_binary() : model.add_variable(0.0, 0.0, true);
        dv.charge_frac[v][t][c] = model.add_variable(0.0, 1.0);
        dv.discharge_frac[v][t][c] = model.add_variable(0.0, dch_ok ? 1.0 : 0.0);
        dv.conv_p[v][t][c] = model.add_variable(dch_ok ? -dr : 0.0, cr);
        dv.conv_q[v][t][c] = model.add_variable(-conv_q_max, conv_q_max);
      }
    }
    for (int t = first + 1; t <= T; ++t) {
      for (int q = 0; q < Q; ++q)
        dv.presence[v][t][q] = model.add_variable(0.0, 1.0);
      dv.stored[v][t] = model.add_variable(floor_lb, sc.fleet.battery_mwh);
    }
  }
  for (int pr = 0; pr < P; ++pr) {
    if (!dv.pair_active[pr]) continue;
    const auto cap =
        cumulative_pickup_bound(p.queue.waiting[pr], p.forecast.mean[pr]);
    for (int t = 1; t <= T; ++t)
      dv.waiting[pr][t] = model.add_variable(0.0, cap[t - 1]);
  }

  // ---- vehicle rows ----
  using Terms = std::vector<std::pair<int, double>>;
  auto add = [&](Terms terms, RowSense sense, double rhs, std::string name) {
    if (!terms.empty()) model.add_row(std::move(terms), sense, rhs, name);
  };

  for (int v = 0; v < V; ++v) {
    const int first = p.first_parked_slot(v);
    for (int t = first; t < T; ++t) {
      const std::string tag = detail::vt(v, t);
      // one action at a time, gated by being parked there
      for (int q = 0; q < Q; ++q) {
        Terms terms;
        for (int r = 0; r < Q; ++r)
          if (r != q) terms.emplace_back(dv.move[v][t][dv.move_id[q][r]], 1.0);
        if (dv.plug_block[q] >= 0) {
          terms.emplace_back(dv.plug_charge[v][t][dv.plug_block[q]], 1.0);
          terms.emplace_back(dv.plug_discharge[v][t][dv.plug_block[q]], 1.0);
        }
        double rhs = 0.0;
        if (t == first)
          rhs = detail::const_presence(p, v, t, q);
        else
          terms.emplace_back(dv.presence[v][t][q], -1.0);
        add(std::move(terms), RowSense::le, rhs,
            "act" + tag + ",q" + std::to_string(q) + "]");
      }
      // location balance: next presence = current - departures + arrivals
      for (int q = 0; q < Q; ++q) {
        Terms terms{{dv.presence[v][t + 1][q], 1.0}};
        double rhs = 0.0;
        for (int r = 0; r < Q; ++r)
          if (r != q) terms.emplace_back(dv.move[v][t][dv.move_id[q][r]], 1.0);
        for (int s = 0; s < Q; ++s) {
          if (s == q) continue;
          const int dep = t + 1 - sc.road.travel_steps[s][q];
          if (dep >= first && dep <= t)
            terms.emplace_back(dv.move[v][dep][dv.move_id[s][q]], -1.0);
        }
        if (t == first)
          rhs += detail::const_presence(p, v, t, q);
        else
          terms.emplace_back(dv.presence[v][t][q], -1.0);
        add(std::move(terms), RowSense::eq, rhs,
            "loc" + tag + ",q" + std::to_string(q) + "]");
      }
      // a pickup rides its movement decision
      for (int pr = 0; pr < P; ++pr)
        if (dv.pickup[v][t][pr] >= 0)
          add({{dv.pickup[v][t][pr], 1.0},
               {dv.move[v][t]
                       [dv.move_id[sc.demand[pr].from][sc.demand[pr].to]],
                -1.0}},
              RowSense::le, 0.0, "serve" + tag + ",p" + std::to_string(pr) + "]");
      // plug gating, converter power and its capability polygon
      for (int c = 0; c < C; ++c) {
        const std::string ctag = tag + ",c" + std::to_string(c) + "]";
        add({{dv.charge_frac[v][t][c], 1.0}, {dv.plug_charge[v][t][c], -1.0}},
            RowSense::le, 0.0, "chfrac" + ctag);
        add({{dv.discharge_frac[v][t][c], 1.0},
             {dv.plug_discharge[v][t][c], -1.0}},
            RowSense::le, 0.0, "dchfrac" + ctag);
        add({{dv.conv_p[v][t][c], 1.0},
             {dv.charge_frac[v][t][c], -cr},
             {dv.discharge_frac[v][t][c], dr}},
            RowSense::eq, 0.0, "conv" + ctag);
        for (size_t j = 0; j < cuts.size(); ++j)
          add({{dv.conv_p[v][t][c], cuts[j].ep_coef},
               {dv.conv_q[v][t][c], cuts[j].eq_coef},
               {dv.plug_charge[v][t][c], -cuts[j].rhs},
               {dv.plug_discharge[v][t][c], -cuts[j].rhs}},
              RowSense::le, 0.0, "poly" + std::to_string(j) + ctag);
      }
      // stored energy: trips pay on departure, plugs settle over the slot
      {
        Terms terms{{dv.stored[v][t + 1], 1.0}};
        double rhs = 0.0;
        if (t == first)
          rhs += p.fleet[v].soc_mwh;
        else
          terms.emplace_back(dv.stored[v][t], -1.0);
        for (int m = 0; m < M; ++m)
          terms.emplace_back(
              dv.move[v][t][m],
              sc.road.travel_energy[dv.moves[m].first][dv.moves[m].second]);
        for (int c = 0; c < C; ++c) {
          terms.emplace_back(dv.charge_frac[v][t][c],
                             -cr * sc.fleet.charge_efficiency * dth);
          terms.emplace_back(dv.discharge_frac[v][t][c],
                             dr / sc.fleet.discharge_efficiency * dth);
        }
        add(std::move(terms), RowSense::eq, rhs, "soc" + tag + "]");
      }
    }
    // zone floors above the global one bind wherever the vehicle parks
    bool zoned = false;
    for (int q = 0; q < Q; ++q)
      zoned = zoned || sc.fleet.zone_soc_floor_mwh[q] > floor_lb + 1e-12;
    if (zoned)
      for (int t = first + 1; t <= T; ++t) {
        Terms terms{{dv.stored[v][t], 1.0}};
        for (int q = 0; q < Q; ++q) {
          const double extra = sc.fleet.zone_soc_floor_mwh[q] - floor_lb;
          if (extra > 1e-12)
            terms.emplace_back(dv.presence[v][t][q], -extra);
        }
        add(std::move(terms), RowSense::ge, floor_lb,
            "floor" + detail::vt(v, t) + "]");
      }
  }

  // ---- queue rows ----
  for (int pr = 0; pr < P; ++pr) {
    if (!dv.pair_active[pr]) continue;
    for (int t = 0; t < T; ++t) {
      const std::string tag = "[p" + std::to_string(pr) + ",t" +
                              std::to_string(t) + "]";
      Terms evo{{dv.waiting[pr][t + 1], 1.0}};
      double rhs = p.forecast.mean[pr][t];
      if (t == 0)
        rhs += p.queue.waiting[pr];
      else
        evo.emplace_back(dv.waiting[pr][t], -1.0);
      Terms cap;
      double cap_rhs = 0.0;
      if (t == 0)
        cap_rhs = p.queue.waiting[pr];
      else
        cap.emplace_back(dv.waiting[pr][t], -1.0);
      for (int v = 0; v < V; ++v)
        if (dv.pickup[v][t][pr] >= 0) {
          evo.emplace_back(dv.pickup[v][t][pr], 1.0);
          cap.emplace_back(dv.pickup[v][t][pr], 1.0);
        }
      add(std::move(evo), RowSense::eq, rhs, "queue" + tag);
      add(std::move(cap), RowSense::le, cap_rhs, "pickcap" + tag);
    }
  }

  // ---- shared plug capacity ----
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < T; ++t) {
      Terms terms;
      for (int v = 0; v < V; ++v)
        if (dv.plug_charge[v][t][c] >= 0) {
          terms.emplace_back(dv.plug_charge[v][t][c], 1.0);
          terms.emplace_back(dv.plug_discharge[v][t][c], 1.0);
        }
      add(std::move(terms), RowSense::le,
          static_cast<double>(sc.road.chargers[dv.charger_zone[c]]),
          "plugcap[c" + std::to_string(c) + ",t" + std::to_string(t) + "]");
    }

  // ---- grid blocks ----
  emit_topology_constraints(model, sc, p.start_step, T, dv.grid);
  emit_lindistflow_constraints(model, sc, T, p.loads_p, p.loads_q, dv.grid);

  // ---- station aggregation and island-source gates ----
  for (int c = 0; c < C; ++c) {
    const int node = sc.coupling[dv.charger_zone[c]];
    for (int t = 0; t < T; ++t) {
      Terms pterm{{dv.grid.station_p[t][node], 1.0}};
      Terms qterm{{dv.grid.station_q[t][node], 1.0}};
      for (int v = 0; v < V; ++v)
        if (dv.conv_p[v][t][c] >= 0) {
          pterm.emplace_back(dv.conv_p[v][t][c], -1.0);
          qterm.emplace_back(dv.conv_q[v][t][c], -1.0);
        }
      const std::string tag =
          "[n" + std::to_string(node) + ",t" + std::to_string(t) + "]";
      add(std::move(pterm), RowSense::eq, 0.0, "stnp" + tag);
      add(std::move(qterm), RowSense::eq, 0.0, "stnq" + tag);
      // a station may feed an island only while some vehicle is set to inject
      if (!sc.grid.is_source(node) && sc.grid.is_couplable(node)) {
        Terms gate{{dv.grid.feed[t][node], 1.0}};
        for (int v = 0; v < V; ++v)
          if (dv.plug_discharge[v][t][c] >= 0)
            gate.emplace_back(dv.plug_discharge[v][t][c], -1.0);
        model.add_row(std::move(gate), RowSense::le, 0.0, "feedveh" + tag);
      }
    }
  }

  // ---- objective: minimize negative average welfare per slot ----
  const double inv_t = 1.0 / T;
  const Pricing& mu = sc.pricing;
  for (int pr = 0; pr < P; ++pr) {
    if (!dv.pair_active[pr]) continue;
    const double trip_value =
        mu.unserved_passenger * p.queue.waiting[pr] +
        mu.trip_revenue_per_hour *
            sc.road.travel_steps[sc.demand[pr].from][sc.demand[pr].to] * dth;
    for (int v = 0; v < V; ++v)
      for (int t = 0; t < T; ++t)
        if (dv.pickup[v][t][pr] >= 0)
          model.add_linear_cost(dv.pickup[v][t][pr], -inv_t * trip_value);
  }
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < sc.grid.num_nodes(); ++i) {
      if (dv.grid.node_load[t][i] >= 0 && p.loads_p[t][i] > 0.0)
        model.add_linear_cost(
            dv.grid.node_load[t][i],
            -inv_t * mu.unserved_energy_per_mwh * dth * p.loads_p[t][i]);
      if (dv.grid.gen_p[t][i] >= 0)
        model.add_linear_cost(dv.grid.gen_p[t][i],
                              inv_t * mu.generation_per_mwh * dth);
    }
    for (int v = 0; v < V; ++v)
      for (int c = 0; c < C; ++c)
        if (dv.charge_frac[v][t][c] >= 0) {
          model.add_linear_cost(dv.charge_frac[v][t][c],
                                inv_t * mu.throughput_per_mwh * dth * cr);
          model.add_linear_cost(dv.discharge_frac[v][t][c],
                                inv_t * mu.throughput_per_mwh * dth * dr);
        }
  }
  return out;
}

struct DispatchSolution {
  SolveStatus status = SolveStatus::iteration_limit;
  double objective = 0.0;        // average welfare per slot, higher is better
  double objective_bound = 0.0;  // certified upper bound on the welfare
  std::vector<std::vector<VehicleAction>> plans;  // [vehicle][slot]
  std::vector<std::vector<double>> stored;        // [vehicle][state]
  std::vector<std::vector<double>> waiting;       // [pair][state]
  std::vector<TopologyState> topology;            // [slot]
  std::vector<PowerFlowState> power;              // [slot]
  Solution raw;
  DispatchVariables vars;
};

inline std::vector<VehicleAction> slot_actions(
    const std::vector<std::vector<VehicleAction>>& plans, int t) {
  std::vector<VehicleAction> out;
  out.reserve(plans.size());
  for (const auto& plan : plans) out.push_back(plan.at(t));
  return out;
}

// read one solver point back into plans and trajectories
inline DispatchSolution decode_dispatch(const DispatchProblem& p,
                                        const DispatchVariables& dv,
                                        const std::vector<double>& x) {
  const Scenario& sc = p.sc();
  const int T = dv.horizon;
  const int V = static_cast<int>(p.fleet.size());
  const int Q = sc.road.num_nodes();
  const int P = static_cast<int>(sc.demand.size());
  const double cr = sc.fleet.charge_rate_mw;
  const double dr = sc.fleet.discharge_rate_mw;

  DispatchSolution out;
  out.vars = dv;
  out.plans.assign(V, std::vector<VehicleAction>(T));
  out.stored.assign(V, std::vector<double>(T + 1, 0.0));
  out.waiting.assign(P, std::vector<double>(T + 1, 0.0));

  for (int v = 0; v < V; ++v) {
    const int first = p.first_parked_slot(v);
    for (int t = 0; t <= T; ++t)
      out.stored[v][t] = t <= first ? p.fleet[v].soc_mwh
                                    : x.at(dv.stored[v][t]);
    for (int t = first; t < T; ++t) {
      VehicleAction& a = out.plans[v][t];
      if (t == first) {
        a.at_zone = p.fleet[v].location;
      } else {
        for (int q = 0; q < Q; ++q)
          if (x.at(dv.presence[v][t][q]) > 0.5) a.at_zone = q;
      }
      for (size_t m = 0; m < dv.moves.size(); ++m)
        if (x.at(dv.move[v][t][m]) > 0.5) a.move_to = dv.moves[m].second;
      for (int pr = 0; pr < P; ++pr)
        if (dv.pickup[v][t][pr] >= 0 && x.at(dv.pickup[v][t][pr]) > 0.5) {
          a.serving = true;
          a.serve_pair = pr;
        }
      const int c = a.at_zone >= 0 ? dv.plug_block[a.at_zone] : -1;
      if (c >= 0) {
        a.plug_charge = x.at(dv.plug_charge[v][t][c]) > 0.5;
        a.plug_discharge = x.at(dv.plug_discharge[v][t][c]) > 0.5;
        if (a.plug_charge) a.charge_mw = x.at(dv.charge_frac[v][t][c]) * cr;
        if (a.plug_discharge)
          a.discharge_mw = x.at(dv.discharge_frac[v][t][c]) * dr;
        if (a.plugged()) a.reactive_mvar = x.at(dv.conv_q[v][t][c]);
      }
    }
  }
  for (int pr = 0; pr < P; ++pr)
    for (int t = 0; t <= T; ++t)
      out.waiting[pr][t] = (t == 0 || !dv.pair_active[pr])
                               ? p.queue.waiting[pr]
                               : x.at(dv.waiting[pr][t]);
  for (int t = 0; t < T; ++t) {
    out.topology.push_back(
        extract_topology(sc.grid, dv.grid, x, t, p.start_step));
    out.power.push_back(extract_power(sc.grid, dv.grid, x, t));
  }
  return out;
}

// Turn a plan proposal (already aligned to this problem's slots) into a warm
// start vector.  Only integer entries matter: the solver fixes them and
// re-solves the continuous part, so power levels and flows are left at zero.
inline std::vector<double> encode_warm_start(
    const DispatchProblem& p, const ModelSpec& model,
    const DispatchVariables& dv,
    const std::vector<std::vector<VehicleAction>>& plans,
    const std::vector<TopologyState>& topo) {
  std::vector<double> x(model.num_vars(), 0.0);
  for (int i = 0; i < model.num_vars(); ++i) x[i] = model.vars[i].lower;
  const int T = dv.horizon;
  for (int v = 0; v < static_cast<int>(plans.size()); ++v)
    for (int t = 0; t < T && t < static_cast<int>(plans[v].size()); ++t) {
      const VehicleAction& a = plans[v][t];
      if (a.at_zone < 0) continue;
      if (a.move_to >= 0 && dv.move[v][t][dv.move_id[a.at_zone][a.move_to]] >= 0)
        x[dv.move[v][t][dv.move_id[a.at_zone][a.move_to]]] = 1.0;
      if (a.serving && a.serve_pair >= 0 && dv.pickup[v][t][a.serve_pair] >= 0)
        x[dv.pickup[v][t][a.serve_pair]] = 1.0;
      const int c = dv.plug_block[a.at_zone];
      if (c >= 0 && dv.plug_charge[v][t][c] >= 0) {
        if (a.plug_charge) x[dv.plug_charge[v][t][c]] = 1.0;
        if (a.plug_discharge && dv.plug_discharge[v][t][c] >= 0)
          x[dv.plug_discharge[v][t][c]] = 1.0;
      }
    }
  for (int t = 0; !topo.empty() && t < T; ++t) {
    const TopologyState& ts = topo[std::min<size_t>(t, topo.size() - 1)];
    for (size_t l = 0; l < ts.lines.size(); ++l) {
      x[dv.grid.line_s[t][l]] = ts.lines[l].s;
      x[dv.grid.line_sd[t][l]] = ts.lines[l].sd;
      x[dv.grid.line_sr[t][l]] = ts.lines[l].sr;
    }
    for (size_t i = 0; i < ts.powered.size(); ++i) {
      x[dv.grid.node_z[t][i]] = ts.powered[i];
      if (dv.grid.feed[t][i] >= 0) x[dv.grid.feed[t][i]] = ts.feed[i];
    }
  }
  return x;
}

inline DispatchSolution solve_centralized(const DispatchProblem& p,
                                          const SolveOptions& opts = {}) {
  auto built = assemble_milp(p);
  MiqpSolver solver(built.model);
  Solution s = solver.solve(opts);
  if (s.x.empty()) {
    DispatchSolution out;
    out.status = s.status;
    out.raw = std::move(s);
    out.vars = std::move(built.vars);
    return out;
  }
  DispatchSolution out = decode_dispatch(p, built.vars, s.x);
  out.status = s.status;
  out.objective = -s.objective;
  out.objective_bound = -s.lower_bound;
  out.raw = std::move(s);
  return out;
}

// the five welfare terms recomputed from decoded plans and flows, all scaled
// by 1/T like the solver objective
struct ObjectiveBreakdown {
  double queue_relief = 0.0;     // current-queue weight times pickups
  double trip_revenue = 0.0;     // occupied time at the hourly fare
  double energy_served = 0.0;    // delivered electric load
  double generation_cost = 0.0;  // substation energy
  double battery_wear = 0.0;     // plug throughput

  double total() const {
    return queue_relief + trip_revenue + energy_served - generation_cost -
           battery_wear;
  }
};

inline ObjectiveBreakdown objective_value(const DispatchProblem& p,
                                          const DispatchSolution& sol) {
  const Scenario& sc = p.sc();
  const double dth = sc.dt_hours();
  const double inv_t = 1.0 / p.horizon;
  const Pricing& mu = sc.pricing;
  ObjectiveBreakdown b;
  for (const auto& plan : sol.plans)
    for (const auto& a : plan) {
      if (a.serving) {
        const auto& d = sc.demand[a.serve_pair];
        b.queue_relief +=
            inv_t * mu.unserved_passenger * p.queue.waiting[a.serve_pair];
        b.trip_revenue += inv_t * mu.trip_revenue_per_hour *
                          sc.road.travel_steps[d.from][d.to] * dth;
      }
      b.battery_wear += inv_t * mu.throughput_per_mwh * dth *
                        (a.charge_mw + a.discharge_mw);
    }
  for (int t = 0; t < p.horizon; ++t) {
    b.energy_served += inv_t * mu.unserved_energy_per_mwh * dth *
                       served_load(sol.power[t], p.loads_p[t]).served_mw;
    for (double g : sol.power[t].gen_p)
      b.generation_cost += inv_t * mu.generation_per_mwh * dth * g;
  }
  return b;
}

// Standalone feasibility audit of a decoded solution against the scenario
// data only: plan legality, location/energy/queue recursions, charger
// capacity, station aggregation, switch structure and power flow.
inline std::vector<std::string> check_dispatch_solution(
    const DispatchProblem& p, const DispatchSolution& sol, double tol = 1e-6) {
  const Scenario& sc = p.sc();
  const int T = p.horizon;
  const int V = static_cast<int>(p.fleet.size());
  const int P = static_cast<int>(sc.demand.size());
  std::vector<std::string> bad;
  auto flag = [&](const std::string& m) { bad.push_back(m); };
  const auto cuts =
      build_polygon_cuts(sc.fleet.polygon_cuts, sc.fleet.converter_limit_mva);

  // vehicle timelines: location, arrivals and stored energy in lockstep
  for (int v = 0; v < V; ++v) {
    const std::string who = "vehicle " + std::to_string(v);
    int loc = p.fleet[v].location;
    int arrive = p.fleet[v].arrive_at - p.start_step;
    double energy = p.fleet[v].soc_mwh;
    for (int t = 0; t < T; ++t) {
      const VehicleAction& a = sol.plans[v][t];
      const std::string at = who + " slot " + std::to_string(t);
      const bool parked = t >= arrive;
      if (parked && a.at_zone != loc)
        flag(at + ": reports zone " + std::to_string(a.at_zone) +
             " but is at " + std::to_string(loc));
      if (!parked && (a.at_zone >= 0 || a.move_to >= 0 || a.plugged() ||
                      a.serving || a.charge_mw > tol || a.discharge_mw > tol))
        flag(at + ": acts while driving");
      if (a.move_to >= 0 && a.plugged()) flag(at + ": moves while plugged");
      if (parked && a.move_to >= 0) {
        if (a.move_to == loc) flag(at + ": moves to its own zone");
        if (a.serving) {
          if (a.serve_pair < 0 || a.serve_pair >= P) {
            flag(at + ": bad demand pair");
          } else {
            const auto& d = sc.demand[a.serve_pair];
            if (d.from != loc || d.to != a.move_to)
              flag(at + ": pickup does not match its trip");
            if (!p.caps[v].may_serve) flag(at + ": serves without capability");
          }
        }
        energy -= sc.road.travel_energy[loc][a.move_to];
        arrive = t + sc.road.travel_steps[loc][a.move_to];
        loc = a.move_to;
      } else if (a.serving) {
        flag(at + ": pickup without departure");
      }
      if (a.plugged()) {
        if (!parked) {
          flag(at + ": plugged while driving");
        } else if (sc.road.chargers[loc] == 0) {
          flag(at + ": plugged at a zone without chargers");
        }
        if (a.plug_discharge && !p.caps[v].may_discharge)
          flag(at + ": discharges without capability");
        if (a.charge_mw > (a.plug_charge ? sc.fleet.charge_rate_mw : 0.0) + tol ||
            a.charge_mw < -tol)
          flag(at + ": charge power outside its rating");
        if (a.discharge_mw >
                (a.plug_discharge ? sc.fleet.discharge_rate_mw : 0.0) + tol ||
            a.discharge_mw < -tol)
          flag(at + ": discharge power outside its rating");
        if (!respects_polygon(cuts,
                              grid_active_power(a.charge_mw, a.discharge_mw),
                              a.reactive_mvar, tol))
          flag(at + ": converter output outside its capability polygon");
        energy =
            step_soc(sc.fleet, energy, a.charge_mw, a.discharge_mw, sc.dt_hours());
      } else if (a.charge_mw > tol || a.discharge_mw > tol ||
                 std::fabs(a.reactive_mvar) > tol) {
        flag(at + ": plug power without a plug");
      }
      if (std::fabs(energy - sol.stored[v][t + 1]) > tol)
        flag(at + ": stored energy mismatch, expected " +
             std::to_string(energy) + " got " +
             std::to_string(sol.stored[v][t + 1]));
      if (energy < sc.fleet.soc_floor_mwh - tol)
        flag(at + ": stored energy under the global floor");
      if (energy > sc.fleet.battery_mwh + tol)
        flag(at + ": stored energy over the battery size");
      if (t + 1 >= arrive && energy < sc.fleet.zone_soc_floor_mwh[loc] - tol)
        flag(at + ": stored energy under the floor of zone " +
             std::to_string(loc));
    }
  }

  // queue recursion against forecast and executed pickups
  for (int pr = 0; pr < P; ++pr) {
    double w = p.queue.waiting[pr];
    for (int t = 0; t < T; ++t) {
      double picked = 0.0;
      for (int v = 0; v < V; ++v)
        if (sol.plans[v][t].serving && sol.plans[v][t].serve_pair == pr)
          picked += 1.0;
      const std::string at =
          "pair " + std::to_string(pr) + " slot " + std::to_string(t);
      if (picked > w + tol) flag(at + ": pickups exceed the queue");
      w = w + p.forecast.mean[pr][t] - picked;
      if (w < -tol) flag(at + ": negative queue");
      if (std::fabs(w - sol.waiting[pr][t + 1]) > tol)
        flag(at + ": queue mismatch, expected " + std::to_string(w) + " got " +
             std::to_string(sol.waiting[pr][t + 1]));
    }
  }

  // shared charger and station-level aggregation per slot
  for (int t = 0; t < T; ++t) {
    const auto acts = slot_actions(sol.plans, t);
    for (const auto& msg : station_capacity_check(sc, acts))
      flag("slot " + std::to_string(t) + ": " + msg);
    const StationPower sp = station_power_from_actions(sc, acts);
    for (int i = 0; i < sc.grid.num_nodes(); ++i) {
      if (sc.zone_of_grid_node(i) < 0) continue;
      if (std::fabs(sp.p_mw[i] - sol.power[t].station_p[i]) > tol ||
          std::fabs(sp.q_mvar[i] - sol.power[t].station_q[i]) > tol)
        flag("slot " + std::to_string(t) + ": station power at node " +
             sc.grid.node_names[i] + " disagrees with vehicle plans");
      // an island feed needs a vehicle committed to inject
      if (!sc.grid.is_source(i) && sc.grid.is_couplable(i) &&
          sol.topology[t].feed[i] == 1) {
        bool injector = false;
        for (const auto& a : acts)
          injector = injector || (a.at_zone == sc.zone_of_grid_node(i) &&
                                  a.plug_discharge);
        if (!injector)
          flag("slot " + std::to_string(t) + ": node " + sc.grid.node_names[i] +
               " feeds an island with no vehicle injecting");
      }
    }
  }

  // grid structure and flows
  for (int t = 0; t < T; ++t) {
    for (const auto& msg : check_radiality(sc.grid, sol.topology[t]))
      flag("slot " + std::to_string(t) + ": " + msg);
    for (const auto& msg : evaluate_power_feasibility(
             sc.grid, sol.topology[t], sol.power[t], p.loads_p[t],
             p.loads_q[t], sc.fleet.polygon_cuts, sc.voltage_relaxation_m(),
             tol))
      flag("slot " + std::to_string(t) + ": " + msg);
  }
  return bad;
}

}  // namespace saev
