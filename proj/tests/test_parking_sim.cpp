// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "evsenet/lot_gen.hpp"
#include "evsenet/parking_sim.hpp"
#include "evsenet/schedule_gen.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace evsenet {
namespace {

TEST(ParkProbability, FormulaCases) {
  const Layout l(5, 5, CellType::Parking);
  OccupancyState occ(l);
  const ParkingRules rules;
  EXPECT_DOUBLE_EQ(park_probability(l, occ, {2, 2}, rules), 0.5);
  occ.occupy({1, 2}, 10.0);
  occ.occupy({2, 1}, 10.0);
  EXPECT_DOUBLE_EQ(park_probability(l, occ, {2, 2}, rules), 0.125);
  EXPECT_DOUBLE_EQ(park_probability(l, occ, {0, 4}, rules), 0.75);
  EXPECT_THROW(park_probability(l, occ, {1, 2}, rules), Error);
}

TEST(ParkProbability, ClampedAtMaximum) {
  const Layout l(3, 3, CellType::Parking);
  OccupancyState occ(l);
  ParkingRules rules;
  rules.p_base = 0.9;
  EXPECT_DOUBLE_EQ(park_probability(l, occ, {0, 0}, rules), 0.95);
}

TEST(ParkProbability, MonotoneInNeighborFactor) {
  const Layout l(4, 4, CellType::Parking);
  OccupancyState occ(l);
  occ.occupy({1, 1}, 5.0);
  occ.occupy({2, 2}, 5.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      if (occ.occupied({r, c})) continue;
      double prev = 0.0;
      for (double f = 0.05; f <= 1.0 + 1e-12; f += 0.05) {
        ParkingRules rules;
        rules.occupied_neighbor_factor = f;
        const double p = park_probability(l, occ, {r, c}, rules);
        EXPECT_GE(p, prev);
        prev = p;
      }
    }
}

TEST(ParkingSim, ForcedAssignment) {
  const Layout l = parse_layout("DE\n");
  Schedule s;
  s.events.push_back({0, VehicleKind::Ev, 10.0, 100.0, 5.0, 7.2});
  ParkingRules rules{1.0, 1.0, 1.0, 1.0};
  const Placement p = simulate_parking(l, s, rules, 1);
  ASSERT_EQ(p.assignments.size(), 1u);
  EXPECT_EQ(p.assignments[0].cell, (Cell{0, 1}));
  EXPECT_TRUE(p.skipped.empty());
}

TEST(ParkingSim, DepartureAtArrivalFreesSpot) {
  const Layout l = parse_layout("DE\n");
  Schedule s;
  s.events.push_back({0, VehicleKind::Ev, 0.0, 60.0, 1.0, 7.2});
  s.events.push_back({1, VehicleKind::Ev, 60.0, 120.0, 1.0, 7.2});
  s.events.push_back({2, VehicleKind::Ev, 90.0, 150.0, 1.0, 7.2});
  const Placement p = simulate_parking(l, s, {1.0, 1.0, 1.0, 1.0}, 1);
  EXPECT_EQ(p.assignments.size(), 2u);
  EXPECT_EQ(p.skipped, std::vector<int>{2});
}

TEST(ParkingSim, DfsMatchesExactEnumeration) {
  const Layout l = fixtures::branching_lot();
  OccupancyState occ(l);
  occ.occupy({1, 3}, 1e9);
  occ.occupy({3, 3}, 1e9);
  const ParkingRules rules;
  const auto exact = oracle::enumerate_parking(l, {{1, 3}, {3, 3}}, fixtures::kBranchingDoor, CellType::Evse,
                                               rules.p_base, rules.occupied_neighbor_factor, rules.edge_bonus,
                                               rules.p_max);
  ParkingSimulator sim(l, rules);
  Rng rng(2024);
  const int n = 20000;
  std::map<Cell, int> hits;
  int fails = 0;
  for (int i = 0; i < n; ++i) {
    if (auto c = sim.route(occ, VehicleKind::Ev, rng)) ++hits[*c];
    else ++fails;
  }
  EXPECT_EQ(hits.count(fixtures::kBranchingUnreachable), 0u);
  EXPECT_EQ(exact.park.size(), 3u);
  for (const auto& [cell, p] : exact.park) {
    const double sd = std::sqrt(n * p * (1.0 - p));
    EXPECT_NEAR(hits[cell], n * p, 4.0 * sd) << cell.row << "," << cell.col;
  }
  EXPECT_NEAR(fails, n * exact.fail, 4.0 * std::sqrt(n * exact.fail * (1.0 - exact.fail)));
}

TEST(ParkingSim, PlacementsAreConsistent) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    LotGenConfig lc;
    lc.height = 12;
    lc.width = 12;
    lc.n_evses = 8;
    lc.seed = s;
    const Layout l = generate_layout_with_reachability(lc);
    ScheduleGenConfig sc;
    sc.seed = s + 1000;
    const Schedule sched = generate_schedule(sc);
    const Placement p = simulate_parking(l, sched, {}, s + 2000);
    ASSERT_NO_THROW(validate_placement(l, sched, p));
    EXPECT_EQ(p.assignments.size() + p.skipped.size(), sched.events.size());
    const auto reach = reachable_evses(l);
    const auto reach_parking = reachable_spots(l, CellType::Parking);
    for (const auto& a : p.assignments) {
      if (l.at(a.cell) == CellType::Evse) EXPECT_TRUE(reach.count(a.cell));
      else EXPECT_TRUE(reach_parking.count(a.cell));
    }
    EXPECT_EQ(serialize_placement(simulate_parking(l, sched, {}, s + 2000)), serialize_placement(p));
  }
}

TEST(ParkingSim, NoDoorsIsAnError) {
  const Layout l(3, 3, CellType::Parking);
  EXPECT_THROW(ParkingSimulator(l, {}), Error);
}

}  // namespace
}  // namespace evsenet
