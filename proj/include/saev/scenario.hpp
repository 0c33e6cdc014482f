#pragma once

// Scenario data: road network with charging stations, radial electric
// network, station coupling, fleet parameters, passenger demand rates and
// pricing.  Loaded from JSON; the format is described in
// docs/scenario_format.md.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace saev {

using json = nlohmann::json;

struct RoadNetwork {
  std::vector<std::string> node_names;
  std::vector<std::vector<int>> travel_steps;      // whole timesteps, 0 on diagonal
  std::vector<std::vector<double>> travel_energy;  // MWh consumed per trip
  std::vector<int> chargers;                       // plug count per zone

  int num_nodes() const { return static_cast<int>(node_names.size()); }
};

struct GridLine {
  int from = -1, to = -1;
  double r_pu = 0.0, x_pu = 0.0;
  double smax_mva = 0.0;
};

struct LineOutage {
  int line = -1;
  int from_step = 0;
  int to_step = std::numeric_limits<int>::max();
};

struct GenLimits {
  int node = -1;
  double pmin_mw = 0.0, pmax_mw = 0.0;
  double qmin_mvar = 0.0, qmax_mvar = 0.0;
};

struct ElectricNetwork {
  std::vector<std::string> node_names;
  std::vector<GridLine> lines;
  std::vector<int> sources;    // substation nodes held at the reference voltage
  std::vector<int> couplable;  // nodes that may be re-energized by stations
  double v0_pu = 1.0, vmin_pu = 0.95, vmax_pu = 1.05;
  std::vector<double> load_p_mw, load_q_mvar;
  std::vector<GenLimits> gens;
  std::vector<LineOutage> outages;

  int num_nodes() const { return static_cast<int>(node_names.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }

  bool line_usable(int line, int step) const {
    for (const auto& o : outages)
      if (o.line == line && step >= o.from_step && step < o.to_step)
        return false;
    return true;
  }

  bool is_source(int node) const {
    return std::find(sources.begin(), sources.end(), node) != sources.end();
  }
  bool is_couplable(int node) const {
    return std::find(couplable.begin(), couplable.end(), node) !=
           couplable.end();
  }
};

struct FleetParams {
  int count = 0;
  double battery_mwh = 0.0;
  double charge_rate_mw = 0.0;
  double discharge_rate_mw = 0.0;
  double charge_efficiency = 1.0;
  double discharge_efficiency = 1.0;
  double converter_limit_mva = 0.0;
  int polygon_cuts = 8;
  double soc_floor_mwh = 0.0;
  // per-zone minimum stored energy while located there; sized to the road
  // network with soc_floor_mwh as default
  std::vector<double> zone_soc_floor_mwh;
};

struct VehicleStart {
  int node = -1;
  double soc_mwh = 0.0;
};

struct DemandPair {
  int from = -1, to = -1;
  double rate_per_step = 0.0;  // mean passenger arrivals per timestep
};

struct Pricing {
  double unserved_passenger = 1.0;      // $ per waiting passenger per step
  double trip_revenue_per_hour = 20.0;  // $ per occupied vehicle hour
  double unserved_energy_per_mwh = 500.0;
  double generation_per_mwh = 100.0;
  double throughput_per_mwh = 50.0;  // battery wear on charge/discharge
};

struct Scenario {
  std::string name;
  double timestep_minutes = 5.0;
  int horizon_steps = 4;
  RoadNetwork road;
  ElectricNetwork grid;
  std::vector<int> coupling;  // zone -> grid node, -1 when not coupled
  FleetParams fleet;
  std::vector<VehicleStart> initial;
  std::vector<DemandPair> demand;
  Pricing pricing;
  double voltage_big_m = 0.0;  // <= 0 selects the automatic value

  double dt_hours() const { return timestep_minutes / 60.0; }

  int grid_node_of_zone(int zone) const {
    return zone >= 0 && zone < static_cast<int>(coupling.size())
               ? coupling[zone]
               : -1;
  }

  int zone_of_grid_node(int node) const {
    for (int q = 0; q < static_cast<int>(coupling.size()); ++q)
      if (coupling[q] == node) return q;
    return -1;
  }

  std::vector<int> charger_zones() const {
    std::vector<int> out;
    for (int q = 0; q < road.num_nodes(); ++q)
      if (road.chargers[q] > 0) out.push_back(q);
    return out;
  }

  double total_demand_rate() const {
    double r = 0.0;
    for (const auto& d : demand) r += d.rate_per_step;
    return r;
  }

  // big-M for the voltage drop relaxation: across an open line one endpoint
  // can sit at vmax while the other is unpowered at 0, plus the largest
  // single-line drop term
  double voltage_relaxation_m() const {
    if (voltage_big_m > 0.0) return voltage_big_m;
    double max_drop = 0.0;
    for (const auto& l : grid.lines) {
      const double drop =
          (l.r_pu + l.x_pu) * l.smax_mva / std::max(grid.v0_pu, 1e-6);
      max_drop = std::max(max_drop, drop);
    }
    return grid.vmax_pu + max_drop;
  }

  std::vector<std::string> validate() const;
};

// ---------------------------------------------------------------------------
// JSON serialization

namespace detail {

inline int name_index(const std::vector<std::string>& names,
                      const std::string& s, const char* what) {
  auto it = std::find(names.begin(), names.end(), s);
  if (it == names.end())
    throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
  return static_cast<int>(it - names.begin());
}

}  // namespace detail

inline Scenario scenario_from_json(const json& j) {
  Scenario sc;
  if (j.value("schema", "") != "saev-scenario v1")
    throw std::invalid_argument("scenario: missing or unsupported schema tag");
  sc.name = j.value("name", "unnamed");
  sc.timestep_minutes = j.at("timestep_minutes").get<double>();
  sc.horizon_steps = j.at("horizon_steps").get<int>();

  const json& jr = j.at("road");
  sc.road.node_names = jr.at("nodes").get<std::vector<std::string>>();
  const int nq = sc.road.num_nodes();
  sc.road.travel_steps = jr.at("travel_time_steps").get<std::vector<std::vector<int>>>();
  sc.road.travel_energy =
      jr.at("travel_energy_mwh").get<std::vector<std::vector<double>>>();
  sc.road.chargers.assign(nq, 0);
  if (jr.contains("chargers"))
    for (auto& [k, v] : jr.at("chargers").items())
      sc.road.chargers[detail::name_index(sc.road.node_names, k, "road node")] =
          v.get<int>();

  const json& jg = j.at("grid");
  sc.grid.node_names = jg.at("nodes").get<std::vector<std::string>>();
  const int ni = sc.grid.num_nodes();
  for (const json& jl : jg.at("lines")) {
    GridLine l;
    l.from = detail::name_index(sc.grid.node_names,
                                jl.at("from").get<std::string>(), "grid node");
    l.to = detail::name_index(sc.grid.node_names, jl.at("to").get<std::string>(),
                              "grid node");
    l.r_pu = jl.at("r_pu").get<double>();
    l.x_pu = jl.at("x_pu").get<double>();
    l.smax_mva = jl.at("smax_mva").get<double>();
    sc.grid.lines.push_back(l);
  }
  for (const auto& s : jg.at("sources").get<std::vector<std::string>>())
    sc.grid.sources.push_back(
        detail::name_index(sc.grid.node_names, s, "grid node"));
  if (jg.contains("couplable"))
    for (const auto& s : jg.at("couplable").get<std::vector<std::string>>())
      sc.grid.couplable.push_back(
          detail::name_index(sc.grid.node_names, s, "grid node"));
  sc.grid.v0_pu = jg.value("v0_pu", 1.0);
  sc.grid.vmin_pu = jg.value("vmin_pu", 0.95);
  sc.grid.vmax_pu = jg.value("vmax_pu", 1.05);
  sc.grid.load_p_mw.assign(ni, 0.0);
  sc.grid.load_q_mvar.assign(ni, 0.0);
  if (jg.contains("loads_mw"))
    for (auto& [k, v] : jg.at("loads_mw").items())
      sc.grid.load_p_mw[detail::name_index(sc.grid.node_names, k, "grid node")] =
          v.get<double>();
  if (jg.contains("loads_mvar"))
    for (auto& [k, v] : jg.at("loads_mvar").items())
      sc.grid
          .load_q_mvar[detail::name_index(sc.grid.node_names, k, "grid node")] =
          v.get<double>();
  if (jg.contains("gens"))
    for (const json& jgen : jg.at("gens")) {
      GenLimits g;
      g.node = detail::name_index(sc.grid.node_names,
                                  jgen.at("node").get<std::string>(), "grid node");
      g.pmin_mw = jgen.value("pmin_mw", 0.0);
      g.pmax_mw = jgen.at("pmax_mw").get<double>();
      g.qmin_mvar = jgen.value("qmin_mvar", 0.0);
      g.qmax_mvar = jgen.value("qmax_mvar", 0.0);
      sc.grid.gens.push_back(g);
    }
  if (jg.contains("line_outages"))
    for (const json& jo : jg.at("line_outages")) {
      LineOutage o;
      const auto ends = jo.at("line").get<std::vector<std::string>>();
      const int a = detail::name_index(sc.grid.node_names, ends.at(0), "grid node");
      const int b = detail::name_index(sc.grid.node_names, ends.at(1), "grid node");
      o.line = -1;
      for (int l = 0; l < sc.grid.num_lines(); ++l) {
        const auto& gl = sc.grid.lines[l];
        if ((gl.from == a && gl.to == b) || (gl.from == b && gl.to == a))
          o.line = l;
      }
      if (o.line < 0)
        throw std::invalid_argument("line_outages: no such line " + ends.at(0) +
                                    "-" + ends.at(1));
      o.from_step = jo.value("from_step", 0);
      if (jo.contains("to_step")) o.to_step = jo.at("to_step").get<int>();
      sc.grid.outages.push_back(o);
    }

  sc.coupling.assign(nq, -1);
  if (j.contains("coupling"))
    for (auto& [k, v] : j.at("coupling").items())
      sc.coupling[detail::name_index(sc.road.node_names, k, "road node")] =
          detail::name_index(sc.grid.node_names, v.get<std::string>(),
                             "grid node");

  const json& jf = j.at("fleet");
  sc.fleet.count = jf.at("count").get<int>();
  sc.fleet.battery_mwh = jf.at("battery_mwh").get<double>();
  sc.fleet.charge_rate_mw = jf.at("charge_rate_mw").get<double>();
  sc.fleet.discharge_rate_mw = jf.at("discharge_rate_mw").get<double>();
  sc.fleet.charge_efficiency = jf.value("charge_efficiency", 1.0);
  sc.fleet.discharge_efficiency = jf.value("discharge_efficiency", 1.0);
  sc.fleet.converter_limit_mva = jf.at("converter_limit_mva").get<double>();
  sc.fleet.polygon_cuts = jf.value("polygon_cuts", 8);
  sc.fleet.soc_floor_mwh = jf.value("soc_floor_mwh", 0.0);
  sc.fleet.zone_soc_floor_mwh.assign(nq, sc.fleet.soc_floor_mwh);
  if (jf.contains("zone_soc_floor_mwh"))
    for (auto& [k, v] : jf.at("zone_soc_floor_mwh").items())
      sc.fleet.zone_soc_floor_mwh[detail::name_index(sc.road.node_names, k,
                                                     "road node")] =
          v.get<double>();
  for (const json& ji : jf.at("initial")) {
    VehicleStart vs;
    vs.node = detail::name_index(sc.road.node_names,
                                 ji.at("node").get<std::string>(), "road node");
    vs.soc_mwh = ji.at("soc_mwh").get<double>();
    sc.initial.push_back(vs);
  }

  if (j.contains("demand"))
    for (const json& jd : j.at("demand").at("pairs")) {
      DemandPair d;
      d.from = detail::name_index(sc.road.node_names,
                                  jd.at("from").get<std::string>(), "road node");
      d.to = detail::name_index(sc.road.node_names,
                                jd.at("to").get<std::string>(), "road node");
      d.rate_per_step = jd.at("rate_per_step").get<double>();
      sc.demand.push_back(d);
    }

  if (j.contains("pricing")) {
    const json& jp = j.at("pricing");
    sc.pricing.unserved_passenger = jp.value("unserved_passenger", 1.0);
    sc.pricing.trip_revenue_per_hour = jp.value("trip_revenue_per_hour", 20.0);
    sc.pricing.unserved_energy_per_mwh =
        jp.value("unserved_energy_per_mwh", 500.0);
    sc.pricing.generation_per_mwh = jp.value("generation_per_mwh", 100.0);
    sc.pricing.throughput_per_mwh = jp.value("throughput_per_mwh", 50.0);
  }
  sc.voltage_big_m = j.value("voltage_big_m", 0.0);
  return sc;
}

inline json scenario_to_json(const Scenario& sc) {
  json j;
  j["schema"] = "saev-scenario v1";
  j["name"] = sc.name;
  j["timestep_minutes"] = sc.timestep_minutes;
  j["horizon_steps"] = sc.horizon_steps;
  json jr;
  jr["nodes"] = sc.road.node_names;
  jr["travel_time_steps"] = sc.road.travel_steps;
  jr["travel_energy_mwh"] = sc.road.travel_energy;
  json jch = json::object();
  for (int q = 0; q < sc.road.num_nodes(); ++q)
    if (sc.road.chargers[q] > 0)
      jch[sc.road.node_names[q]] = sc.road.chargers[q];
  jr["chargers"] = jch;
  j["road"] = jr;

  json jg;
  jg["nodes"] = sc.grid.node_names;
  json jlines = json::array();
  for (const auto& l : sc.grid.lines)
    jlines.push_back({{"from", sc.grid.node_names[l.from]},
                      {"to", sc.grid.node_names[l.to]},
                      {"r_pu", l.r_pu},
                      {"x_pu", l.x_pu},
                      {"smax_mva", l.smax_mva}});
  jg["lines"] = jlines;
  json jsrc = json::array();
  for (int s : sc.grid.sources) jsrc.push_back(sc.grid.node_names[s]);
  jg["sources"] = jsrc;
  json jcp = json::array();
  for (int s : sc.grid.couplable) jcp.push_back(sc.grid.node_names[s]);
  jg["couplable"] = jcp;
  jg["v0_pu"] = sc.grid.v0_pu;
  jg["vmin_pu"] = sc.grid.vmin_pu;
  jg["vmax_pu"] = sc.grid.vmax_pu;
  json jlp = json::object(), jlq = json::object();
  for (int i = 0; i < sc.grid.num_nodes(); ++i) {
    if (sc.grid.load_p_mw[i] != 0.0)
      jlp[sc.grid.node_names[i]] = sc.grid.load_p_mw[i];
    if (sc.grid.load_q_mvar[i] != 0.0)
      jlq[sc.grid.node_names[i]] = sc.grid.load_q_mvar[i];
  }
  jg["loads_mw"] = jlp;
  jg["loads_mvar"] = jlq;
  json jgens = json::array();
  for (const auto& g : sc.grid.gens)
    jgens.push_back({{"node", sc.grid.node_names[g.node]},
                     {"pmin_mw", g.pmin_mw},
                     {"pmax_mw", g.pmax_mw},
                     {"qmin_mvar", g.qmin_mvar},
                     {"qmax_mvar", g.qmax_mvar}});
  jg["gens"] = jgens;
  json jout = json::array();
  for (const auto& o : sc.grid.outages) {
    json jo;
    jo["line"] = {sc.grid.node_names[sc.grid.lines[o.line].from],
                  sc.grid.node_names[sc.grid.lines[o.line].to]};
    jo["from_step"] = o.from_step;
    if (o.to_step != std::numeric_limits<int>::max()) jo["to_step"] = o.to_step;
    jout.push_back(jo);
  }
  jg["line_outages"] = jout;
  j["grid"] = jg;

  json jc = json::object();
  for (int q = 0; q < sc.road.num_nodes(); ++q)
    if (sc.coupling[q] >= 0)
      jc[sc.road.node_names[q]] = sc.grid.node_names[sc.coupling[q]];
  j["coupling"] = jc;

  json jf;
  jf["count"] = sc.fleet.count;
  jf["battery_mwh"] = sc.fleet.battery_mwh;
  jf["charge_rate_mw"] = sc.fleet.charge_rate_mw;
  jf["discharge_rate_mw"] = sc.fleet.discharge_rate_mw;
  jf["charge_efficiency"] = sc.fleet.charge_efficiency;
  jf["discharge_efficiency"] = sc.fleet.discharge_efficiency;
  jf["converter_limit_mva"] = sc.fleet.converter_limit_mva;
  jf["polygon_cuts"] = sc.fleet.polygon_cuts;
  jf["soc_floor_mwh"] = sc.fleet.soc_floor_mwh;
  json jzf = json::object();
  for (int q = 0; q < sc.road.num_nodes(); ++q)
    if (sc.fleet.zone_soc_floor_mwh[q] != sc.fleet.soc_floor_mwh)
      jzf[sc.road.node_names[q]] = sc.fleet.zone_soc_floor_mwh[q];
  if (!jzf.empty()) jf["zone_soc_floor_mwh"] = jzf;
  json jinit = json::array();
  for (const auto& v : sc.initial)
    jinit.push_back(
        {{"node", sc.road.node_names[v.node]}, {"soc_mwh", v.soc_mwh}});
  jf["initial"] = jinit;
  j["fleet"] = jf;

  json jpairs = json::array();
  for (const auto& d : sc.demand)
    jpairs.push_back({{"from", sc.road.node_names[d.from]},
                      {"to", sc.road.node_names[d.to]},
                      {"rate_per_step", d.rate_per_step}});
  j["demand"] = {{"pairs", jpairs}};

  j["pricing"] = {{"unserved_passenger", sc.pricing.unserved_passenger},
                  {"trip_revenue_per_hour", sc.pricing.trip_revenue_per_hour},
                  {"unserved_energy_per_mwh", sc.pricing.unserved_energy_per_mwh},
                  {"generation_per_mwh", sc.pricing.generation_per_mwh},
                  {"throughput_per_mwh", sc.pricing.throughput_per_mwh}};
  if (sc.voltage_big_m > 0.0) j["voltage_big_m"] = sc.voltage_big_m;
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  json j;
  in >> j;
  Scenario sc = scenario_from_json(j);
  auto problems = sc.validate();
  if (!problems.empty()) {
    std::ostringstream os;
    os << "scenario " << path << " is invalid:";
    for (const auto& p : problems) os << "\n  - " << p;
    throw std::invalid_argument(os.str());
  }
  return sc;
}

inline std::vector<std::string> Scenario::validate() const {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) bad.push_back(msg);
  };
  const int nq = road.num_nodes();
  const int ni = grid.num_nodes();
  check(nq > 0, "road network has no nodes");
  check(ni > 0, "electric network has no nodes");
  check(timestep_minutes > 0.0, "timestep must be positive");
  check(horizon_steps >= 1, "horizon must cover at least one step");

  check(static_cast<int>(road.travel_steps.size()) == nq,
        "travel_time_steps must be a square matrix over road nodes");
  for (int q = 0; q < nq && q < static_cast<int>(road.travel_steps.size()); ++q) {
    check(static_cast<int>(road.travel_steps[q].size()) == nq,
          "travel_time_steps row size mismatch");
    for (int r = 0; r < std::min<int>(nq, road.travel_steps[q].size()); ++r) {
      if (q == r)
        check(road.travel_steps[q][r] == 0, "travel time to self must be 0");
      else
        check(road.travel_steps[q][r] >= 1,
              "travel time between distinct zones must be at least one step");
    }
  }
  check(static_cast<int>(road.travel_energy.size()) == nq,
        "travel_energy_mwh must be a square matrix over road nodes");
  for (const auto& row : road.travel_energy)
    for (double e : row) check(e >= 0.0, "travel energy must be nonnegative");
  for (int c : road.chargers) check(c >= 0, "charger counts must be nonnegative");

  check(!grid.sources.empty(), "grid needs at least one source node");
  for (const auto& l : grid.lines) {
    check(l.from != l.to, "grid line endpoints must differ");
    check(l.smax_mva > 0.0, "line apparent capacity must be positive");
    check(l.r_pu >= 0.0 && l.x_pu >= 0.0, "line impedance must be nonnegative");
  }
  check(grid.vmin_pu < grid.vmax_pu, "voltage window is empty");
  check(grid.v0_pu >= grid.vmin_pu && grid.v0_pu <= grid.vmax_pu,
        "reference voltage outside the allowed window");
  for (const auto& g : grid.gens) {
    check(g.pmin_mw <= g.pmax_mw, "generator active power window is empty");
    check(g.qmin_mvar <= g.qmax_mvar, "generator reactive power window is empty");
  }
  for (const auto& o : grid.outages)
    check(o.from_step <= o.to_step, "line outage interval is empty");

  for (int q = 0; q < nq; ++q) {
    const int i = coupling.size() == static_cast<size_t>(nq) ? coupling[q] : -1;
    if (i >= 0) {
      check(i < ni, "coupling references unknown grid node");
      check(road.chargers[q] > 0,
            "coupled station " + road.node_names[q] + " has no chargers");
    }
  }
  std::vector<int> seen(ni, 0);
  for (int q = 0; q < nq; ++q)
    if (coupling.size() == static_cast<size_t>(nq) && coupling[q] >= 0 &&
        coupling[q] < ni) {
      check(!seen[coupling[q]],
            "grid node " + grid.node_names[coupling[q]] +
                " coupled to more than one station");
      seen[coupling[q]] = 1;
    }
  for (int c : grid.couplable)
    check(zone_of_grid_node(c) >= 0 || grid.is_source(c),
          "couplable node " + grid.node_names[c] +
              " is not coupled to any charging station");

  check(fleet.count > 0, "fleet is empty");
  check(fleet.battery_mwh > 0.0, "battery capacity must be positive");
  check(fleet.charge_rate_mw > 0.0, "charge rate must be positive");
  check(fleet.discharge_rate_mw >= 0.0, "discharge rate must be nonnegative");
  check(fleet.charge_efficiency > 0.0 && fleet.charge_efficiency <= 1.0,
        "charge efficiency must lie in (0, 1]");
  check(fleet.discharge_efficiency > 0.0 && fleet.discharge_efficiency <= 1.0,
        "discharge efficiency must lie in (0, 1]");
  check(fleet.converter_limit_mva > 0.0, "converter limit must be positive");
  check(fleet.polygon_cuts >= 4, "need at least four polygon cuts");
  check(static_cast<int>(initial.size()) == fleet.count,
        "initial vehicle list must match the fleet count");
  for (const auto& v : initial) {
    check(v.node >= 0 && v.node < nq, "vehicle starts at an unknown zone");
    check(v.soc_mwh >= 0.0 && v.soc_mwh <= fleet.battery_mwh + 1e-12,
          "vehicle starts outside its battery range");
  }
  for (double f : fleet.zone_soc_floor_mwh)
    check(f >= 0.0 && f <= fleet.battery_mwh,
          "zone energy floor outside the battery range");

  std::map<std::pair<int, int>, int> pair_seen;
  for (const auto& d : demand) {
    check(d.from >= 0 && d.from < nq && d.to >= 0 && d.to < nq,
          "demand references an unknown zone");
    check(d.from != d.to, "demand origin equals destination");
    check(d.rate_per_step >= 0.0, "demand rate must be nonnegative");
    check(++pair_seen[{d.from, d.to}] == 1, "duplicate demand pair");
  }

  check(pricing.unserved_passenger >= 0.0 && pricing.trip_revenue_per_hour >= 0.0 &&
            pricing.unserved_energy_per_mwh >= 0.0 &&
            pricing.generation_per_mwh >= 0.0 && pricing.throughput_per_mwh >= 0.0,
        "prices must be nonnegative");
  return bad;
}

}  // namespace saev
