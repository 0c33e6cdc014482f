#pragma once

// Vehicle state arithmetic: stored-energy updates, converter capability
// polygon, fleet operating modes and the executed action of one step.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "saev/scenario.hpp"

namespace saev {

struct VehicleState {
  int location = 0;     // zone while parked; destination while driving
  int arrive_at = 0;    // absolute step at which the vehicle is parked again
  double soc_mwh = 0.0;

  bool parked_at(int step) const { return step >= arrive_at; }
};

inline std::vector<VehicleState> initial_fleet(const Scenario& sc) {
  std::vector<VehicleState> v;
  v.reserve(sc.initial.size());
  for (const auto& s : sc.initial) v.push_back({s.node, 0, s.soc_mwh});
  return v;
}

enum class FleetMode { sav, tess, saev, mixed };

inline const char* to_string(FleetMode m) {
  switch (m) {
    case FleetMode::sav: return "sav";
    case FleetMode::tess: return "tess";
    case FleetMode::saev: return "saev";
    default: return "mixed";
  }
}

inline FleetMode fleet_mode_from_string(const std::string& s) {
  if (s == "sav") return FleetMode::sav;
  if (s == "tess") return FleetMode::tess;
  if (s == "saev") return FleetMode::saev;
  if (s == "mixed") return FleetMode::mixed;
  throw std::invalid_argument("unknown fleet mode: " + s);
}

struct VehicleCaps {
  bool may_serve = true;
  bool may_discharge = true;
};

// sav: passengers only; tess: storage only; saev: both;
// mixed: the first half (rounded up) are passenger-only, the rest storage-only
inline std::vector<VehicleCaps> apply_fleet_mode(FleetMode mode, int count) {
  std::vector<VehicleCaps> caps(count);
  for (int v = 0; v < count; ++v) {
    switch (mode) {
      case FleetMode::sav: caps[v] = {true, false}; break;
      case FleetMode::tess: caps[v] = {false, true}; break;
      case FleetMode::saev: caps[v] = {true, true}; break;
      case FleetMode::mixed:
        caps[v] = v < (count + 1) / 2 ? VehicleCaps{true, false}
                                      : VehicleCaps{false, true};
        break;
    }
  }
  return caps;
}

// stored energy after one step of plugged operation; charging loses
// efficiency on the way in, discharging pays it on the way out
inline double step_soc(const FleetParams& f, double soc, double charge_mw,
                       double discharge_mw, double dt_hours) {
  return soc + charge_mw * dt_hours * f.charge_efficiency -
         discharge_mw * dt_hours / f.discharge_efficiency;
}

// grid-side active power of a plugged vehicle, positive = consuming
inline double grid_active_power(double charge_mw, double discharge_mw) {
  return charge_mw - discharge_mw;
}

// Linear outer approximation of the converter apparent-power disc
// ep^2 + eq^2 <= s^2 by k tangent cuts; every point inside the disc is
// accepted, every accepted point lies within s / cos(pi/k).
struct PolygonCut {
  double ep_coef, eq_coef, rhs;
};

inline std::vector<PolygonCut> build_polygon_cuts(int k, double s_max) {
  if (k < 4) throw std::invalid_argument("need at least four polygon cuts");
  std::vector<PolygonCut> cuts;
  cuts.reserve(k);
  const double pi = 3.14159265358979323846;
  for (int j = 0; j < k; ++j) {
    const double th = 2.0 * pi * j / k;
    cuts.push_back({std::cos(th), std::sin(th), s_max});
  }
  return cuts;
}

inline bool respects_polygon(const std::vector<PolygonCut>& cuts, double ep,
                             double eq, double tol = 1e-9) {
  for (const auto& c : cuts)
    if (c.ep_coef * ep + c.eq_coef * eq > c.rhs + tol) return false;
  return true;
}

// executed slice of a dispatch plan for one vehicle at the current step
struct VehicleAction {
  int at_zone = -1;            // zone the vehicle is parked at; -1 in transit
  int move_to = -1;            // -1 while parked
  bool serving = false;        // carries a passenger on that trip
  int serve_pair = -1;         // demand pair index when serving
  bool plug_charge = false;    // holds a charger in the charging direction
  bool plug_discharge = false; // holds a charger in the discharging direction
  double charge_mw = 0.0;      // plug draw
  double discharge_mw = 0.0;   // plug injection
  double reactive_mvar = 0.0;

  bool plugged() const { return plug_charge || plug_discharge; }
};

// Net grid draw per electric node implied by one slot of vehicle actions.
struct StationPower {
  std::vector<double> p_mw, q_mvar;  // indexed by grid node
};

inline StationPower station_power_from_actions(
    const Scenario& sc, const std::vector<VehicleAction>& acts) {
  StationPower sp;
  sp.p_mw.assign(sc.grid.num_nodes(), 0.0);
  sp.q_mvar.assign(sc.grid.num_nodes(), 0.0);
  for (const auto& a : acts) {
    if (a.at_zone < 0) continue;
    const int node = sc.grid_node_of_zone(a.at_zone);
    if (node < 0) continue;
    sp.p_mw[node] += grid_active_power(a.charge_mw, a.discharge_mw);
    sp.q_mvar[node] += a.reactive_mvar;
  }
  return sp;
}

// Plugged vehicles per zone must fit the charger count; a plugged vehicle
// holds its charger even at zero power.
inline std::vector<std::string> station_capacity_check(
    const Scenario& sc, const std::vector<VehicleAction>& acts) {
  std::vector<int> plugged(sc.road.num_nodes(), 0);
  for (const auto& a : acts)
    if (a.plugged() && a.at_zone >= 0) ++plugged[a.at_zone];
  std::vector<std::string> bad;
  for (int q = 0; q < sc.road.num_nodes(); ++q)
    if (plugged[q] > sc.road.chargers[q])
      bad.push_back("zone " + sc.road.node_names[q] + ": " +
                    std::to_string(plugged[q]) + " vehicles on " +
                    std::to_string(sc.road.chargers[q]) + " chargers");
  return bad;
}

}  // namespace saev
