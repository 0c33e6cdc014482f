#include <catch2/catch_amalgamated.hpp>

#include "saev/fleet.hpp"
#include "saev/rng.hpp"
#include "saev/scenario.hpp"

using namespace saev;

TEST_CASE("state of charge arithmetic applies conversion losses") {
  FleetParams f;
  f.charge_efficiency = 0.9;
  f.discharge_efficiency = 0.9;
  const double dt = 5.0 / 60.0;

  // 0.10 + 0.05 * (5/60) * 0.9 = 0.10375
  REQUIRE(step_soc(f, 0.10, 0.05, 0.0, dt) == Catch::Approx(0.10375).margin(1e-12));
  // discharging 0.09 MW drains 0.09 * dt / 0.9 = 0.008333...
  REQUIRE(step_soc(f, 0.10, 0.0, 0.09, dt) ==
          Catch::Approx(0.10 - 0.09 * dt / 0.9).margin(1e-12));
  REQUIRE(grid_active_power(0.05, 0.02) == Catch::Approx(0.03));
}

TEST_CASE("fleet modes split capabilities as expected") {
  auto sav = apply_fleet_mode(FleetMode::sav, 4);
  auto tess = apply_fleet_mode(FleetMode::tess, 4);
  auto saev = apply_fleet_mode(FleetMode::saev, 4);
  auto mixed_odd = apply_fleet_mode(FleetMode::mixed, 5);

  for (auto& c : sav) {
    REQUIRE(c.may_serve);
    REQUIRE_FALSE(c.may_discharge);
  }
  for (auto& c : tess) {
    REQUIRE_FALSE(c.may_serve);
    REQUIRE(c.may_discharge);
  }
  for (auto& c : saev) {
    REQUIRE(c.may_serve);
    REQUIRE(c.may_discharge);
  }
  // odd count: passenger half gets the extra vehicle
  int serve = 0, discharge = 0;
  for (auto& c : mixed_odd) {
    REQUIRE((c.may_serve != c.may_discharge));
    serve += c.may_serve ? 1 : 0;
    discharge += c.may_discharge ? 1 : 0;
  }
  REQUIRE(serve == 3);
  REQUIRE(discharge == 2);

  REQUIRE(fleet_mode_from_string("mixed") == FleetMode::mixed);
  REQUIRE(to_string(FleetMode::tess) == std::string("tess"));
  REQUIRE_THROWS(fleet_mode_from_string("hybrid"));
}

TEST_CASE("polygon cuts approximate the apparent power disc") {
  const double s = 0.27;
  const int k = 8;
  auto cuts = build_polygon_cuts(k, s);
  REQUIRE(cuts.size() == static_cast<size_t>(k));

  Rng rng(31);
  const double circumscribed = s / std::cos(M_PI / k);
  for (int trial = 0; trial < 500; ++trial) {
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double rad = rng.uniform(0.0, 1.4 * s);
    const double ep = rad * std::cos(ang);
    const double eq = rad * std::sin(ang);
    const bool inside = respects_polygon(cuts, ep, eq, 1e-12);
    if (rad <= s) REQUIRE(inside);          // disc is contained in the polygon
    if (inside) REQUIRE(rad <= circumscribed + 1e-9);
  }
  REQUIRE_THROWS(build_polygon_cuts(3, s));
}

TEST_CASE("initial fleet copies scenario placement") {
  auto sc = load_scenario(std::string(SAEV_SOURCE_DIR) + "/scenarios/toy5.json");
  auto fleet = initial_fleet(sc);
  REQUIRE(fleet.size() == static_cast<size_t>(sc.fleet.count));
  for (size_t v = 0; v < fleet.size(); ++v) {
    REQUIRE(fleet[v].location == sc.initial[v].node);
    REQUIRE(fleet[v].soc_mwh == Catch::Approx(sc.initial[v].soc_mwh));
    REQUIRE(fleet[v].arrive_at == 0);
    REQUIRE(fleet[v].parked_at(0));
  }
}
