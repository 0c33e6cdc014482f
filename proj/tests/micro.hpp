#pragma once

// Hand-sized dispatch scenario shared by the central and distributed tests:
// two road zones, a two-bus feeder, one two-plug station on the load bus.
// Assembled programs stay within the enumeration oracle's integer budget at
// horizons 1-2, so optima can be certified exhaustively.

#include "saev/scenario.hpp"

inline saev::Scenario micro_scenario() {
  saev::Scenario sc;
  sc.name = "micro";
  sc.timestep_minutes = 5.0;
  sc.horizon_steps = 1;

  sc.road.node_names = {"a", "b"};
  sc.road.travel_steps = {{0, 1}, {1, 0}};
  sc.road.travel_energy = {{0.0, 0.002}, {0.002, 0.0}};
  sc.road.chargers = {2, 0};

  sc.grid.node_names = {"s", "d"};
  sc.grid.lines = {{0, 1, 0.004, 0.004, 2.0}};
  sc.grid.sources = {0};
  sc.grid.couplable = {1};
  sc.grid.load_p_mw = {0.0, 0.08};
  sc.grid.load_q_mvar = {0.0, 0.02};
  sc.grid.gens = {{0, 0.0, 1.0, -0.5, 0.5}};

  sc.coupling = {1, -1};  // the station at zone a sits on bus d

  sc.fleet.count = 1;
  sc.fleet.battery_mwh = 0.05;
  sc.fleet.charge_rate_mw = 0.1;
  sc.fleet.discharge_rate_mw = 0.1;
  sc.fleet.charge_efficiency = 0.9;
  sc.fleet.discharge_efficiency = 0.9;
  sc.fleet.converter_limit_mva = 0.12;
  sc.fleet.polygon_cuts = 8;
  sc.fleet.soc_floor_mwh = 0.0;
  sc.fleet.zone_soc_floor_mwh = {0.0, 0.0};
  sc.initial = {{0, 0.04}};

  sc.demand = {{1, 0, 0.0}};  // idle unless a test seeds the queue

  return sc;
}

// variant whose only line is out from the first step, islanding bus d; the
// load there is then reachable through vehicle discharge alone
inline saev::Scenario micro_island_scenario() {
  saev::Scenario sc = micro_scenario();
  sc.grid.outages.push_back({0, 0, std::numeric_limits<int>::max()});
  return sc;
}
