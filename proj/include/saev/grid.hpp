#pragma once

// Radial reconfiguration and linearized branch power flow.
//
// The distribution network is modeled per decision slot as a switched forest
// hanging off a synthetic feed node: grid sources are always fed, coupled
// charging stations may opt in as island sources. Connectivity of powered
// nodes is enforced with a single-commodity virtual flow. Power flow uses the
// LinDistFlow approximation: lossless nodal balances, apparent-power polygon
// cuts per line, and switch-gated voltage drop rows.
//
// Units: line impedances are per-unit on a 1 MVA base so MW/MVAr flows are
// used as per-unit quantities directly; voltages in per-unit.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "saev/fleet.hpp"
#include "saev/model.hpp"
#include "saev/scenario.hpp"

namespace saev {

// switch state of one line at one slot; flow is the virtual commodity,
// positive from->to
struct LineTopology {
  int usable = 1;
  int s = 0;
  int sd = 0;  // energized from->to
  int sr = 0;  // energized to->from
  double flow = 0.0;
};

struct TopologyState {
  std::vector<LineTopology> lines;
  std::vector<int> powered;        // z per node
  std::vector<int> feed;           // per node, 1 if fed by the synthetic source
  std::vector<double> feed_flow;   // virtual flow on the feed arc
};

struct PowerFlowState {
  std::vector<double> line_p;      // MW, positive from->to
  std::vector<double> line_q;      // MVAr
  std::vector<double> gen_p;       // per node, 0 where no generator
  std::vector<double> gen_q;
  std::vector<double> served;      // l per node
  std::vector<double> voltage;     // per unit
  std::vector<double> station_p;   // EV station draw per node, + = charging
  std::vector<double> station_q;
};

struct LoadService {
  double served_mw = 0.0;
  double unserved_mw = 0.0;
};

// column indices into a ModelSpec, [slot][line] or [slot][node]; -1 = absent
struct GridVariables {
  int horizon = 0;
  std::vector<std::vector<int>> line_s, line_sd, line_sr, line_flow;
  std::vector<std::vector<int>> node_z, feed, feed_flow;
  std::vector<std::vector<int>> line_p, line_q;
  std::vector<std::vector<int>> node_load, node_v, gen_p, gen_q;
  std::vector<std::vector<int>> station_p, station_q;
};

inline std::vector<int> grid_feed_nodes(const ElectricNetwork& net) {
  std::vector<int> nodes(net.sources.begin(), net.sources.end());
  nodes.insert(nodes.end(), net.couplable.begin(), net.couplable.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

// most vehicles a station can plug simultaneously times converter ratings
inline double station_charge_bound(const Scenario& sc, int zone) {
  return sc.road.chargers[zone] * sc.fleet.charge_rate_mw;
}

inline double station_discharge_bound(const Scenario& sc, int zone) {
  return sc.road.chargers[zone] * sc.fleet.discharge_rate_mw;
}

inline double station_reactive_bound(const Scenario& sc, int zone) {
  // polygon vertices stick out past the converter rating by 1/cos(pi/k)
  return sc.road.chargers[zone] * sc.fleet.converter_limit_mva /
         std::cos(M_PI / sc.fleet.polygon_cuts);
}

// Switch, direction, node-power and virtual-flow rows for slots
// start_step..start_step+horizon-1. Per slot and line: direction split,
// node/line consistency both ways, an energized-implies-powered guard, and
// the two virtual-flow gates; per node: in-degree cap, parent requirement,
// flow conservation. Damaged lines are handled through variable bounds.
inline void emit_topology_constraints(ModelSpec& model, const Scenario& sc,
                                      int start_step, int horizon,
                                      GridVariables& gv) {
  const ElectricNetwork& net = sc.grid;
  const int nl = static_cast<int>(net.lines.size());
  const int nn = static_cast<int>(net.node_names.size());
  const double big_n = static_cast<double>(nn);
  const auto feed_nodes = grid_feed_nodes(net);

  gv.horizon = horizon;
  auto grid_vec = [&](std::vector<std::vector<int>>& v, int per) {
    v.assign(horizon, std::vector<int>(per, -1));
  };
  grid_vec(gv.line_s, nl);
  grid_vec(gv.line_sd, nl);
  grid_vec(gv.line_sr, nl);
  grid_vec(gv.line_flow, nl);
  grid_vec(gv.node_z, nn);
  grid_vec(gv.feed, nn);
  grid_vec(gv.feed_flow, nn);

  for (int t = 0; t < horizon; ++t) {
    const std::string st = ",t" + std::to_string(t) + "]";
    for (int l = 0; l < nl; ++l) {
      const double u = net.line_usable(l, start_step + t) ? 1.0 : 0.0;
      gv.line_s[t][l] = model.add_variable(0.0, u, true);
      gv.line_sd[t][l] = model.add_variable(0.0, u, true);
      gv.line_sr[t][l] = model.add_variable(0.0, u, true);
      gv.line_flow[t][l] = model.add_variable(-big_n * u, big_n * u);
    }
    for (int i = 0; i < nn; ++i) gv.node_z[t][i] = model.add_binary();
    for (int j : feed_nodes) {
      if (net.is_source(j)) {
        gv.feed[t][j] = model.add_variable(1.0, 1.0, true);
      } else {
        gv.feed[t][j] = model.add_binary();
      }
      gv.feed_flow[t][j] = model.add_variable(0.0, big_n);
    }

    for (int l = 0; l < nl; ++l) {
      const auto& ln = net.lines[l];
      const std::string lt = "[l" + std::to_string(l) + st;
      model.add_row({{gv.line_sd[t][l], 1.0}, {gv.line_sr[t][l], 1.0},
                     {gv.line_s[t][l], -1.0}},
                    RowSense::eq, 0.0, "dir" + lt);
      model.add_row({{gv.node_z[t][ln.from], 1.0}, {gv.node_z[t][ln.to], -1.0},
                     {gv.line_s[t][l], 1.0}},
                    RowSense::le, 1.0, "zcons+" + lt);
      model.add_row({{gv.node_z[t][ln.to], 1.0}, {gv.node_z[t][ln.from], -1.0},
                     {gv.line_s[t][l], 1.0}},
                    RowSense::le, 1.0, "zcons-" + lt);
      model.add_row({{gv.line_s[t][l], 1.0}, {gv.node_z[t][ln.from], -1.0}},
                    RowSense::le, 0.0, "live" + lt);
      model.add_row({{gv.line_flow[t][l], 1.0}, {gv.line_s[t][l], -big_n}},
                    RowSense::le, 0.0, "fcap+" + lt);
      model.add_row({{gv.line_flow[t][l], -1.0}, {gv.line_s[t][l], -big_n}},
                    RowSense::le, 0.0, "fcap-" + lt);
    }
    for (int j : feed_nodes) {
      const std::string jt = "[n" + std::to_string(j) + st;
      model.add_row({{gv.feed[t][j], 1.0}, {gv.node_z[t][j], -1.0}},
                    RowSense::le, 0.0, "feedz" + jt);
      model.add_row({{gv.feed_flow[t][j], 1.0}, {gv.feed[t][j], -big_n}},
                    RowSense::le, 0.0, "feedcap" + jt);
    }
    for (int i = 0; i < nn; ++i) {
      std::vector<std::pair<int, double>> indeg;
      std::vector<std::pair<int, double>> flow;
      for (int l = 0; l < nl; ++l) {
        const auto& ln = net.lines[l];
        if (ln.to == i) {
          indeg.push_back({gv.line_sd[t][l], 1.0});
          flow.push_back({gv.line_flow[t][l], 1.0});
        }
        if (ln.from == i) {
          indeg.push_back({gv.line_sr[t][l], 1.0});
          flow.push_back({gv.line_flow[t][l], -1.0});
        }
      }
      if (gv.feed[t][i] >= 0) {
        indeg.push_back({gv.feed[t][i], 1.0});
        flow.push_back({gv.feed_flow[t][i], 1.0});
      }
      const std::string it = "[n" + std::to_string(i) + st;
      model.add_row(indeg, RowSense::le, 1.0, "indeg" + it);
      auto parent = indeg;
      parent.push_back({gv.node_z[t][i], -1.0});
      model.add_row(std::move(parent), RowSense::ge, 0.0, "parent" + it);
      flow.push_back({gv.node_z[t][i], -1.0});
      model.add_row(std::move(flow), RowSense::eq, 0.0, "fbal" + it);
    }
  }
}

// Load service, nodal balances, line apparent-power cuts and voltage rows.
// Requires emit_topology_constraints to have filled gv first. loads_p/q are
// [slot][node] MW / MVAr trajectories.
inline void emit_lindistflow_constraints(
    ModelSpec& model, const Scenario& sc, int horizon,
    const std::vector<std::vector<double>>& loads_p,
    const std::vector<std::vector<double>>& loads_q, GridVariables& gv) {
  const ElectricNetwork& net = sc.grid;
  const int nl = static_cast<int>(net.lines.size());
  const int nn = static_cast<int>(net.node_names.size());
  if (gv.horizon != horizon || gv.line_s.empty())
    throw std::logic_error("lindistflow: topology variables missing");
  if (static_cast<int>(loads_p.size()) != horizon ||
      static_cast<int>(loads_q.size()) != horizon)
    throw std::invalid_argument("lindistflow: load trajectory size");

  auto cuts = build_polygon_cuts(sc.fleet.polygon_cuts, 1.0);
  const double big_m = sc.voltage_relaxation_m();

  auto grid_vec = [&](std::vector<std::vector<int>>& v, int per) {
    v.assign(horizon, std::vector<int>(per, -1));
  };
  grid_vec(gv.line_p, nl);
  grid_vec(gv.line_q, nl);
  grid_vec(gv.node_load, nn);
  grid_vec(gv.node_v, nn);
  grid_vec(gv.gen_p, nn);
  grid_vec(gv.gen_q, nn);
  grid_vec(gv.station_p, nn);
  grid_vec(gv.station_q, nn);

  for (int t = 0; t < horizon; ++t) {
    const std::string st = ",t" + std::to_string(t) + "]";
    for (int l = 0; l < nl; ++l) {
      const double cap = net.lines[l].smax_mva;
      gv.line_p[t][l] = model.add_variable(-cap, cap);
      gv.line_q[t][l] = model.add_variable(-cap, cap);
    }
    for (int i = 0; i < nn; ++i) {
      const bool has_load =
          loads_p[t][i] != 0.0 || loads_q[t][i] != 0.0;
      gv.node_load[t][i] = model.add_variable(0.0, has_load ? 1.0 : 0.0);
      if (net.is_source(i)) {
        gv.node_v[t][i] = model.add_variable(net.v0_pu, net.v0_pu);
      } else {
        gv.node_v[t][i] = model.add_variable(0.0, net.vmax_pu);
      }
    }
    for (const auto& g : net.gens) {
      gv.gen_p[t][g.node] = model.add_variable(g.pmin_mw, g.pmax_mw);
      gv.gen_q[t][g.node] = model.add_variable(g.qmin_mvar, g.qmax_mvar);
    }
    for (int zone = 0; zone < static_cast<int>(sc.coupling.size()); ++zone) {
      const int node = sc.coupling[zone];
      if (node < 0) continue;
      gv.station_p[t][node] = model.add_variable(
          -station_discharge_bound(sc, zone), station_charge_bound(sc, zone));
      const double qb = station_reactive_bound(sc, zone);
      gv.station_q[t][node] = model.add_variable(-qb, qb);
    }

    for (int i = 0; i < nn; ++i) {
      const std::string it = "[n" + std::to_string(i) + st;
      model.add_row({{gv.node_load[t][i], 1.0}, {gv.node_z[t][i], -1.0}},
                    RowSense::le, 0.0, "lz" + it);

      std::vector<std::pair<int, double>> pbal, qbal;
      for (int l = 0; l < nl; ++l) {
        const auto& ln = net.lines[l];
        if (ln.from == i) {
          pbal.push_back({gv.line_p[t][l], 1.0});
          qbal.push_back({gv.line_q[t][l], 1.0});
        }
        if (ln.to == i) {
          pbal.push_back({gv.line_p[t][l], -1.0});
          qbal.push_back({gv.line_q[t][l], -1.0});
        }
      }
      if (gv.gen_p[t][i] >= 0) {
        pbal.push_back({gv.gen_p[t][i], -1.0});
        qbal.push_back({gv.gen_q[t][i], -1.0});
      }
      pbal.push_back({gv.node_load[t][i], loads_p[t][i]});
      qbal.push_back({gv.node_load[t][i], loads_q[t][i]});
      if (gv.station_p[t][i] >= 0) {
        pbal.push_back({gv.station_p[t][i], 1.0});
        qbal.push_back({gv.station_q[t][i], 1.0});
      }
      model.add_row(std::move(pbal), RowSense::eq, 0.0, "pbal" + it);
      model.add_row(std::move(qbal), RowSense::eq, 0.0, "qbal" + it);

      if (!net.is_source(i)) {
        model.add_row({{gv.node_v[t][i], 1.0}, {gv.node_z[t][i], -net.vmax_pu}},
                      RowSense::le, 0.0, "vz+" + it);
        model.add_row({{gv.node_v[t][i], 1.0}, {gv.node_z[t][i], -net.vmin_pu}},
                      RowSense::ge, 0.0, "vz-" + it);
      }
    }

    for (int l = 0; l < nl; ++l) {
      const auto& ln = net.lines[l];
      const std::string lt = "[l" + std::to_string(l) + st;
      for (size_t c = 0; c < cuts.size(); ++c) {
        model.add_row({{gv.line_p[t][l], cuts[c].ep_coef},
                       {gv.line_q[t][l], cuts[c].eq_coef},
                       {gv.line_s[t][l], -ln.smax_mva}},
                      RowSense::le, 0.0,
                      "scut" + std::to_string(c) + lt);
      }
      const double rp = ln.r_pu / net.v0_pu;
      const double xq = ln.x_pu / net.v0_pu;
      model.add_row({{gv.node_v[t][ln.from], 1.0}, {gv.node_v[t][ln.to], -1.0},
                     {gv.line_p[t][l], -rp}, {gv.line_q[t][l], -xq},
                     {gv.line_s[t][l], big_m}},
                    RowSense::le, big_m, "vdrop+" + lt);
      model.add_row({{gv.node_v[t][ln.from], 1.0}, {gv.node_v[t][ln.to], -1.0},
                     {gv.line_p[t][l], -rp}, {gv.line_q[t][l], -xq},
                     {gv.line_s[t][l], -big_m}},
                    RowSense::ge, -big_m, "vdrop-" + lt);
    }
  }
}

// island-source opt-in for the grid-side subproblem: a station may only act
// as a feed point while it is a net injector
inline void emit_island_source_gates(ModelSpec& model, const Scenario& sc,
                                     GridVariables& gv) {
  for (int t = 0; t < gv.horizon; ++t) {
    for (int zone = 0; zone < static_cast<int>(sc.coupling.size()); ++zone) {
      const int node = sc.coupling[zone];
      if (node < 0 || sc.grid.is_source(node)) continue;
      if (gv.feed[t][node] < 0 || gv.station_p[t][node] < 0) continue;
      model.add_row({{gv.station_p[t][node], 1.0},
                     {gv.feed[t][node], station_charge_bound(sc, zone)}},
                    RowSense::le, station_charge_bound(sc, zone),
                    "islandgate[n" + std::to_string(node) + ",t" +
                        std::to_string(t) + "]");
    }
  }
}

inline TopologyState extract_topology(const ElectricNetwork& net,
                                      const GridVariables& gv,
                                      const std::vector<double>& x, int t,
                                      int start_step) {
  const int nl = static_cast<int>(net.lines.size());
  const int nn = static_cast<int>(net.node_names.size());
  TopologyState ts;
  ts.lines.resize(nl);
  ts.powered.assign(nn, 0);
  ts.feed.assign(nn, 0);
  ts.feed_flow.assign(nn, 0.0);
  auto bit = [&](int col) {
    return static_cast<int>(std::lround(x.at(col)));
  };
  for (int l = 0; l < nl; ++l) {
    ts.lines[l].usable = net.line_usable(l, start_step + t) ? 1 : 0;
    ts.lines[l].s = bit(gv.line_s[t][l]);
    ts.lines[l].sd = bit(gv.line_sd[t][l]);
    ts.lines[l].sr = bit(gv.line_sr[t][l]);
    ts.lines[l].flow = x.at(gv.line_flow[t][l]);
  }
  for (int i = 0; i < nn; ++i) {
    ts.powered[i] = bit(gv.node_z[t][i]);
    if (gv.feed[t][i] >= 0) {
      ts.feed[i] = bit(gv.feed[t][i]);
      ts.feed_flow[i] = x.at(gv.feed_flow[t][i]);
    }
  }
  return ts;
}

inline PowerFlowState extract_power(const ElectricNetwork& net,
                                    const GridVariables& gv,
                                    const std::vector<double>& x, int t) {
  const int nl = static_cast<int>(net.lines.size());
  const int nn = static_cast<int>(net.node_names.size());
  PowerFlowState pf;
  pf.line_p.assign(nl, 0.0);
  pf.line_q.assign(nl, 0.0);
  pf.gen_p.assign(nn, 0.0);
  pf.gen_q.assign(nn, 0.0);
  pf.served.assign(nn, 0.0);
  pf.voltage.assign(nn, 0.0);
  pf.station_p.assign(nn, 0.0);
  pf.station_q.assign(nn, 0.0);
  for (int l = 0; l < nl; ++l) {
    pf.line_p[l] = x.at(gv.line_p[t][l]);
    pf.line_q[l] = x.at(gv.line_q[t][l]);
  }
  for (int i = 0; i < nn; ++i) {
    pf.served[i] = x.at(gv.node_load[t][i]);
    pf.voltage[i] = x.at(gv.node_v[t][i]);
    if (gv.gen_p[t][i] >= 0) {
      pf.gen_p[i] = x.at(gv.gen_p[t][i]);
      pf.gen_q[i] = x.at(gv.gen_q[t][i]);
    }
    if (gv.station_p[t][i] >= 0) {
      pf.station_p[i] = x.at(gv.station_p[t][i]);
      pf.station_q[i] = x.at(gv.station_q[t][i]);
    }
  }
  return pf;
}

// standalone switch-state audit: direction splits, degree caps, consistency,
// and source-rooted-forest structure via graph search (no solver involvement)
inline std::vector<std::string> check_radiality(const ElectricNetwork& net,
                                                const TopologyState& ts) {
  std::vector<std::string> bad;
  const int nl = static_cast<int>(net.lines.size());
  const int nn = static_cast<int>(net.node_names.size());
  if (static_cast<int>(ts.lines.size()) != nl ||
      static_cast<int>(ts.powered.size()) != nn ||
      static_cast<int>(ts.feed.size()) != nn) {
    bad.push_back("topology state dimensions do not match the network");
    return bad;
  }
  auto node = [&](int i) { return net.node_names[i]; };
  auto line = [&](int l) {
    return net.node_names[net.lines[l].from] + "-" +
           net.node_names[net.lines[l].to];
  };

  std::vector<int> indeg(nn, 0);
  for (int l = 0; l < nl; ++l) {
    const auto& st = ts.lines[l];
    for (int v : {st.s, st.sd, st.sr})
      if (v != 0 && v != 1)
        bad.push_back("line " + line(l) + ": switch state not binary");
    if (st.s > st.usable)
      bad.push_back("line " + line(l) + ": energized while unusable");
    if (st.sd + st.sr != st.s)
      bad.push_back("line " + line(l) + ": direction split mismatch");
    if (st.s == 1 &&
        ts.powered[net.lines[l].from] != ts.powered[net.lines[l].to])
      bad.push_back("line " + line(l) + ": endpoints disagree on power state");
    if (st.s == 1 && ts.powered[net.lines[l].from] == 0)
      bad.push_back("line " + line(l) + ": energized between dead nodes");
    if (st.s == 0 && std::abs(st.flow) > 1e-6)
      bad.push_back("line " + line(l) + ": virtual flow on open line");
    indeg[net.lines[l].to] += st.sd;
    indeg[net.lines[l].from] += st.sr;
  }
  const auto feed_nodes = grid_feed_nodes(net);
  for (int i = 0; i < nn; ++i) {
    const bool feedable =
        std::find(feed_nodes.begin(), feed_nodes.end(), i) != feed_nodes.end();
    if (ts.feed[i] && !feedable)
      bad.push_back("node " + node(i) + ": fed but not a source or station");
    if (net.is_source(i) && !ts.feed[i])
      bad.push_back("node " + node(i) + ": grid source not fed");
    if (ts.feed[i] && !ts.powered[i])
      bad.push_back("node " + node(i) + ": fed but unpowered");
    indeg[i] += ts.feed[i] ? 1 : 0;
    if (indeg[i] > 1)
      bad.push_back("node " + node(i) + ": more than one parent");
    if (indeg[i] < ts.powered[i])
      bad.push_back("node " + node(i) + ": powered without a parent");
  }

  // directed reachability from fed nodes along energized lines
  std::vector<int> seen(nn, 0);
  std::vector<int> stack;
  for (int i = 0; i < nn; ++i)
    if (ts.feed[i]) {
      seen[i] = 1;
      stack.push_back(i);
    }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int l = 0; l < nl; ++l) {
      const auto& ln = net.lines[l];
      int next = -1;
      if (ts.lines[l].sd == 1 && ln.from == i) next = ln.to;
      if (ts.lines[l].sr == 1 && ln.to == i) next = ln.from;
      if (next >= 0 && !seen[next]) {
        seen[next] = 1;
        stack.push_back(next);
      }
    }
  }
  for (int i = 0; i < nn; ++i)
    if (ts.powered[i] && !seen[i])
      bad.push_back("node " + node(i) + ": powered but not reachable from a source");
  for (int l = 0; l < nl; ++l)
    if (ts.lines[l].s == 1 &&
        (!seen[net.lines[l].from] || !seen[net.lines[l].to]))
      bad.push_back("line " + line(l) + ": energized outside the fed forest");
  return bad;
}

// direct re-evaluation of the power flow constraint set; independent of the
// row emitters so solver output can be audited
inline std::vector<std::string> evaluate_power_feasibility(
    const ElectricNetwork& net, const TopologyState& ts,
    const PowerFlowState& pf, const std::vector<double>& load_p,
    const std::vector<double>& load_q, int polygon_cut_count,
    double voltage_m, double tol) {
  std::vector<std::string> bad;
  const int nl = static_cast<int>(net.lines.size());
  const int nn = static_cast<int>(net.node_names.size());
  auto node = [&](int i) { return net.node_names[i]; };
  auto line = [&](int l) {
    return net.node_names[net.lines[l].from] + "-" +
           net.node_names[net.lines[l].to];
  };

  std::vector<double> gen_pmin(nn, 0.0), gen_pmax(nn, 0.0);
  std::vector<double> gen_qmin(nn, 0.0), gen_qmax(nn, 0.0);
  for (const auto& g : net.gens) {
    gen_pmin[g.node] = g.pmin_mw;
    gen_pmax[g.node] = g.pmax_mw;
    gen_qmin[g.node] = g.qmin_mvar;
    gen_qmax[g.node] = g.qmax_mvar;
  }

  for (int i = 0; i < nn; ++i) {
    if (pf.served[i] < -tol || pf.served[i] > 1.0 + tol)
      bad.push_back("node " + node(i) + ": served fraction outside [0,1]");
    if (pf.served[i] > ts.powered[i] + tol)
      bad.push_back("node " + node(i) + ": load served while unpowered");
    if (pf.gen_p[i] < gen_pmin[i] - tol || pf.gen_p[i] > gen_pmax[i] + tol)
      bad.push_back("node " + node(i) + ": active generation out of range");
    if (pf.gen_q[i] < gen_qmin[i] - tol || pf.gen_q[i] > gen_qmax[i] + tol)
      bad.push_back("node " + node(i) + ": reactive generation out of range");

    double p = pf.gen_p[i] - pf.served[i] * load_p[i] - pf.station_p[i];
    double q = pf.gen_q[i] - pf.served[i] * load_q[i] - pf.station_q[i];
    for (int l = 0; l < nl; ++l) {
      if (net.lines[l].from == i) {
        p -= pf.line_p[l];
        q -= pf.line_q[l];
      }
      if (net.lines[l].to == i) {
        p += pf.line_p[l];
        q += pf.line_q[l];
      }
    }
    if (std::abs(p) > tol)
      bad.push_back("node " + node(i) + ": active power balance open by " +
                    std::to_string(p));
    if (std::abs(q) > tol)
      bad.push_back("node " + node(i) + ": reactive power balance open by " +
                    std::to_string(q));

    if (net.is_source(i)) {
      if (std::abs(pf.voltage[i] - net.v0_pu) > tol)
        bad.push_back("node " + node(i) + ": source voltage off reference");
    } else {
      if (pf.voltage[i] > ts.powered[i] * net.vmax_pu + tol ||
          pf.voltage[i] < ts.powered[i] * net.vmin_pu - tol)
        bad.push_back("node " + node(i) + ": voltage outside gated bounds");
    }
  }

  auto cuts = build_polygon_cuts(polygon_cut_count, 1.0);
  for (int l = 0; l < nl; ++l) {
    const auto& ln = net.lines[l];
    const int s = ts.lines[l].s;
    for (const auto& c : cuts) {
      if (c.ep_coef * pf.line_p[l] + c.eq_coef * pf.line_q[l] >
          s * ln.smax_mva + tol) {
        bad.push_back("line " + line(l) + ": apparent power cut violated");
        break;
      }
    }
    if (s == 0 &&
        (std::abs(pf.line_p[l]) > tol || std::abs(pf.line_q[l]) > tol))
      bad.push_back("line " + line(l) + ": flow on open line");
    const double drop = (ln.r_pu * pf.line_p[l] + ln.x_pu * pf.line_q[l]) /
                        net.v0_pu;
    const double dv = pf.voltage[ln.from] - pf.voltage[ln.to];
    if (dv > voltage_m * (1 - s) + drop + tol ||
        dv < -voltage_m * (1 - s) + drop - tol)
      bad.push_back("line " + line(l) + ": voltage drop inconsistent");
  }
  return bad;
}

inline LoadService served_load(const PowerFlowState& pf,
                               const std::vector<double>& load_p) {
  LoadService out;
  for (size_t i = 0; i < load_p.size(); ++i) {
    out.served_mw += pf.served[i] * load_p[i];
    out.unserved_mw += (1.0 - pf.served[i]) * load_p[i];
  }
  return out;
}

}  // namespace saev
