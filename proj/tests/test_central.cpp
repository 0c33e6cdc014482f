#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "micro.hpp"
#include "saev/central.hpp"

using namespace saev;
using Catch::Approx;

namespace {

Scenario toy5() {
  return load_scenario(std::string(SAEV_SOURCE_DIR) + "/scenarios/toy5.json");
}

// the benchmark queue used by the frozen-welfare regressions below
DispatchProblem toy5_problem(const Scenario& sc) {
  DispatchProblem p = make_dispatch_problem(sc);
  p.queue.waiting = {1.0, 1.0, 0.0, 1.0, 0.0, 1.0};
  return p;
}

}  // namespace

TEST_CASE("assembly column maps are one to one and match hand counts") {
  auto sc = toy5();
  auto p = toy5_problem(sc);
  auto built = assemble_milp(p);
  const auto& dv = built.vars;

  // 10 parked vehicles, 4 slots, 5 zones, 6 active pairs, 3 charger zones;
  // grid: 4 lines, 5 buses, 1 generator, 3 feed buses, 3 coupled buses.
  //  vehicle-slot: 20 moves + 6 pickups + 3 * (2 plugs + 4 power) = 44
  //  vehicle-state (t >= 1): 5 presence + 1 stored = 6
  //  grid slot: 4*4 line switch/flow + 5 z + 3*2 feed = 27 topology,
  //             8 line pq + 5 load + 5 volt + 2 gen + 6 station = 26 flow
  const int expect_vars = 10 * 4 * 44 + 10 * 4 * 6 + 6 * 4 + 4 * (27 + 26);
  REQUIRE(built.model.num_vars() == expect_vars);
  REQUIRE(expect_vars == 2236);

  // integers: 20 moves + 6 pickups + 6 plugs per vehicle-slot, and
  // 3 switch states per line + z + feeds per grid slot
  const int expect_ints = 10 * 4 * (20 + 6 + 6) + 4 * (3 * 4 + 5 + 3);
  int ints = 0;
  for (const auto& v : built.model.vars) ints += v.integral ? 1 : 0;
  REQUIRE(ints == expect_ints);
  REQUIRE(expect_ints == 1360);

  // rows: per vehicle-slot 5 act + 5 loc + 6 serve + 9 plug gate + 24 cuts
  // + 1 soc = 50; queues 2*6*4; plug capacity 3*4; station ties 2*3*4;
  // island gates 2*4; grid 45 topology + 63 flow per slot
  const int expect_rows =
      10 * 4 * 50 + 2 * 6 * 4 + 3 * 4 + 2 * 3 * 4 + 2 * 4 + 4 * (45 + 63);
  REQUIRE(static_cast<int>(built.model.rows.size()) == expect_rows);
  REQUIRE(expect_rows == 2524);

  std::vector<int> seen(built.model.num_vars(), 0);
  auto mark = [&](int id) {
    if (id < 0) return;
    REQUIRE(id < built.model.num_vars());
    ++seen[id];
  };
  auto mark3 = [&](const std::vector<std::vector<std::vector<int>>>& a) {
    for (const auto& vt : a)
      for (const auto& tt : vt)
        for (int id : tt) mark(id);
  };
  auto mark2 = [&](const std::vector<std::vector<int>>& a) {
    for (const auto& row : a)
      for (int id : row) mark(id);
  };
  mark3(dv.move);
  mark3(dv.pickup);
  mark3(dv.plug_charge);
  mark3(dv.plug_discharge);
  mark3(dv.charge_frac);
  mark3(dv.discharge_frac);
  mark3(dv.conv_p);
  mark3(dv.conv_q);
  mark3(dv.presence);
  mark2(dv.stored);
  mark2(dv.waiting);
  mark2(dv.grid.line_s);
  mark2(dv.grid.line_sd);
  mark2(dv.grid.line_sr);
  mark2(dv.grid.line_flow);
  mark2(dv.grid.node_z);
  mark2(dv.grid.feed);
  mark2(dv.grid.feed_flow);
  mark2(dv.grid.line_p);
  mark2(dv.grid.line_q);
  mark2(dv.grid.node_load);
  mark2(dv.grid.node_v);
  mark2(dv.grid.gen_p);
  mark2(dv.grid.gen_q);
  mark2(dv.grid.station_p);
  mark2(dv.grid.station_q);
  for (int c : seen) REQUIRE(c == 1);
}

TEST_CASE("vehicles still driving enter the program only on arrival") {
  auto sc = micro_scenario();
  sc.horizon_steps = 3;
  auto p = make_dispatch_problem(sc);
  p.fleet[0].location = 0;
  p.fleet[0].arrive_at = 2;  // parks at slot 2

  auto built = assemble_milp(p);
  const auto& dv = built.vars;
  for (int t = 0; t < 2; ++t) {
    for (int id : dv.move[0][t]) REQUIRE(id == -1);
    for (int id : dv.plug_charge[0][t]) REQUIRE(id == -1);
    for (int id : dv.conv_p[0][t]) REQUIRE(id == -1);
  }
  REQUIRE(dv.stored[0][2] == -1);
  REQUIRE(dv.stored[0][3] >= 0);
  for (int q = 0; q < 2; ++q) REQUIRE(dv.presence[0][2][q] == -1);
  for (int id : dv.move[0][2]) REQUIRE(id >= 0);

  auto sol = solve_centralized(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  REQUIRE(sol.plans[0][0].at_zone == -1);
  REQUIRE(sol.plans[0][1].at_zone == -1);
  REQUIRE(sol.plans[0][2].at_zone == 0);
  REQUIRE(check_dispatch_solution(p, sol).empty());
}

TEST_CASE("no demand and no load parks the fleet at zero welfare") {
  auto sc = micro_scenario();
  sc.grid.load_p_mw = {0.0, 0.0};
  sc.grid.load_q_mvar = {0.0, 0.0};
  auto p = make_dispatch_problem(sc);
  auto built = assemble_milp(p);

  REQUIRE(built.vars.pair_active[0] == 0);
  REQUIRE(built.vars.pickup[0][0][0] == -1);
  REQUIRE(built.vars.waiting[0][1] == -1);

  auto oracle = enumerate_oracle(built.model);
  REQUIRE(oracle.status == SolveStatus::optimal);
  REQUIRE(oracle.objective == Approx(0.0).margin(1e-9));

  auto sol = solve_centralized(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  REQUIRE(sol.objective == Approx(0.0).margin(1e-9));
  REQUIRE(check_dispatch_solution(p, sol).empty());
  REQUIRE(objective_value(p, sol).total() == Approx(0.0).margin(1e-9));
}

TEST_CASE("a waiting passenger next to a vehicle is picked up immediately") {
  auto sc = micro_scenario();
  sc.grid.load_p_mw = {0.0, 0.0};
  sc.grid.load_q_mvar = {0.0, 0.0};
  sc.initial = {{1, 0.04}};  // at b; the queued trip runs b -> a
  auto p = make_dispatch_problem(sc);
  p.queue.waiting = {1.0};

  // one relieved passenger at unit price plus a 20 $/h fare over one
  // 5-minute step
  const double hand = 1.0 + 20.0 * (5.0 / 60.0);

  auto built = assemble_milp(p);
  auto oracle = enumerate_oracle(built.model);
  REQUIRE(oracle.status == SolveStatus::optimal);
  REQUIRE(-oracle.objective == Approx(hand).margin(1e-7));

  auto sol = solve_centralized(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  REQUIRE(sol.objective == Approx(hand).margin(1e-7));
  REQUIRE(sol.plans[0][0].serving);
  REQUIRE(sol.plans[0][0].serve_pair == 0);
  REQUIRE(sol.plans[0][0].move_to == 0);
  REQUIRE(sol.waiting[0][1] == Approx(0.0).margin(1e-7));

  auto b = objective_value(p, sol);
  REQUIRE(b.queue_relief == Approx(1.0).margin(1e-9));
  REQUIRE(b.trip_revenue == Approx(20.0 / 12.0).margin(1e-9));
  REQUIRE(b.total() == Approx(sol.objective).margin(1e-7));
  REQUIRE(check_dispatch_solution(p, sol).empty());
}

TEST_CASE("island load is served only when its price beats battery wear") {
  // the single line is out, so bus d hangs on the station at zone a
  auto low = micro_island_scenario();
  low.pricing.unserved_energy_per_mwh = 30.0;
  // relief 30 * 0.08 / 12 = 0.2 under wear 50 * 0.08 / 12 = 1/3: stay idle
  auto pl = make_dispatch_problem(low);
  auto ol = enumerate_oracle(assemble_milp(pl).model);
  REQUIRE(ol.status == SolveStatus::optimal);
  REQUIRE(ol.objective == Approx(0.0).margin(1e-9));

  // relief 500 * 0.08 / 12 = 10/3 pays for the same wear: discharge
  auto high = micro_island_scenario();
  auto ph = make_dispatch_problem(high);
  auto oh = enumerate_oracle(assemble_milp(ph).model);
  REQUIRE(oh.status == SolveStatus::optimal);
  REQUIRE(-oh.objective == Approx(3.0).margin(1e-6));

  auto sol = solve_centralized(ph);
  REQUIRE(sol.status == SolveStatus::optimal);
  REQUIRE(sol.objective == Approx(3.0).margin(1e-6));
  REQUIRE(sol.plans[0][0].plug_discharge);
  REQUIRE(sol.plans[0][0].discharge_mw == Approx(0.08).margin(1e-6));
  REQUIRE(sol.topology[0].feed[1] == 1);

  auto b = objective_value(ph, sol);
  REQUIRE(b.energy_served == Approx(10.0 / 3.0).margin(1e-6));
  REQUIRE(b.battery_wear == Approx(1.0 / 3.0).margin(1e-6));
  REQUIRE(check_dispatch_solution(ph, sol).empty());
}

TEST_CASE("starting below an unreachable energy floor is infeasible") {
  auto sc = micro_scenario();
  sc.fleet.soc_floor_mwh = 0.045;
  sc.fleet.zone_soc_floor_mwh = {0.045, 0.045};
  sc.initial = {{0, 0.02}};  // one slot of charging tops out at 0.0275
  auto p = make_dispatch_problem(sc);

  auto built = assemble_milp(p);
  REQUIRE(enumerate_oracle(built.model).status == SolveStatus::infeasible);

  auto sol = solve_centralized(p);
  REQUIRE(sol.status == SolveStatus::infeasible);
  REQUIRE(sol.raw.x.empty());
}

TEST_CASE("a finished plan round-trips through the warm-start encoder") {
  auto sc = micro_island_scenario();
  auto p = make_dispatch_problem(sc);
  auto first = solve_centralized(p);
  REQUIRE(first.status == SolveStatus::optimal);

  auto built = assemble_milp(p);
  auto warm =
      encode_warm_start(p, built.model, built.vars, first.plans, first.topology);
  SolveOptions opt;
  opt.warm_start = &warm;
  opt.node_limit = 2;  // roughly the seeded incumbent alone
  MiqpSolver solver(built.model);
  auto s = solver.solve(opt);
  REQUIRE_FALSE(s.x.empty());
  REQUIRE(-s.objective == Approx(first.objective).margin(1e-6));

  auto redecoded = decode_dispatch(p, built.vars, s.x);
  REQUIRE(check_dispatch_solution(p, redecoded).empty());
}

TEST_CASE("benchmark step solves to its frozen welfare and audits clean") {
  auto sc = toy5();
  auto p = toy5_problem(sc);
  SolveOptions opt;
  opt.relative_gap = 0.02;
  auto sol = solve_centralized(p, opt);

  REQUIRE(sol.status == SolveStatus::optimal);
  REQUIRE(sol.objective == Approx(44.125).margin(1e-6));
  REQUIRE(sol.objective_bound >= sol.objective - 1e-9);
  REQUIRE(check_dispatch_solution(p, sol).empty());

  auto b = objective_value(p, sol);
  REQUIRE(b.total() == Approx(sol.objective).margin(1e-6));
  // every bus keeps its lights on, including the islanded pair
  REQUIRE(served_load(sol.power[0], p.loads_p[0]).served_mw ==
          Approx(1.07).margin(1e-6));
}

TEST_CASE("a node-capped benchmark solve still returns an audited plan") {
  auto sc = toy5();
  auto p = toy5_problem(sc);
  SolveOptions opt;
  opt.relative_gap = 0.02;
  opt.node_limit = 150;
  auto sol = solve_centralized(p, opt);

  REQUIRE(sol.status == SolveStatus::iteration_limit);
  REQUIRE_FALSE(sol.raw.x.empty());
  REQUIRE(sol.objective >= 42.0);  // within a few percent of the full solve
  REQUIRE(sol.objective <= sol.objective_bound + 1e-9);
  REQUIRE(check_dispatch_solution(p, sol).empty());
}

TEST_CASE("executing the first slot hands off a feasible successor") {
  auto sc = toy5();
  auto p = toy5_problem(sc);
  SolveOptions opt;
  opt.relative_gap = 0.02;
  opt.node_limit = 150;
  auto sol = solve_centralized(p, opt);
  REQUIRE_FALSE(sol.raw.x.empty());
  REQUIRE(check_dispatch_solution(p, sol).empty());

  DispatchProblem nxt = make_dispatch_problem(sc, FleetMode::saev, 1);
  nxt.fleet = p.fleet;
  std::vector<double> pickups(sc.demand.size(), 0.0);
  for (size_t v = 0; v < nxt.fleet.size(); ++v) {
    const VehicleAction& a = sol.plans[v][0];
    VehicleState& st = nxt.fleet[v];
    if (a.move_to >= 0) {
      st.soc_mwh -= sc.road.travel_energy[a.at_zone][a.move_to];
      st.arrive_at = sc.road.travel_steps[a.at_zone][a.move_to];
      st.location = a.move_to;
      if (a.serving) pickups[a.serve_pair] += 1.0;
    } else if (a.plugged()) {
      st.soc_mwh = step_soc(sc.fleet, st.soc_mwh, a.charge_mw, a.discharge_mw,
                            sc.dt_hours());
    }
  }
  nxt.queue.waiting =
      evolve_queue(p.queue, std::vector<double>(sc.demand.size(), 0.0), pickups)
          .waiting;

  auto sol2 = solve_centralized(nxt, opt);
  REQUIRE_FALSE(sol2.raw.x.empty());
  REQUIRE(check_dispatch_solution(nxt, sol2).empty());
}
