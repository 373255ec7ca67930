// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "evsenet/core.hpp"
#include "evsenet/lot_gen.hpp"
#include "evsenet/random.hpp"
#include "fixtures.hpp"

namespace evsenet {
namespace {

TEST(ParseLayout, MinimalGrid) {
  const Layout l = parse_layout("DR\nPE");
  ASSERT_EQ(l.height(), 2);
  ASSERT_EQ(l.width(), 2);
  EXPECT_EQ(l.at(0, 0), CellType::Door);
  EXPECT_EQ(l.at(0, 1), CellType::Road);
  EXPECT_EQ(l.at(1, 0), CellType::Parking);
  EXPECT_EQ(l.at(1, 1), CellType::Evse);
}

TEST(ParseLayout, CountsEvsesOnFullSizeGrid) {
  std::string text;
  int placed = 0;
  for (int r = 0; r < 30; ++r) {
    for (int c = 0; c < 30; ++c) {
      if (r == 0 && c == 0) text += 'D';
      else if (r == 1) text += 'R';
      else if (r == 2 && placed < 15) text += (++placed, 'E');
      else text += 'P';
    }
    text += '\n';
  }
  const Layout l = parse_layout(text);
  EXPECT_EQ(l.count(CellType::Evse), 15u);
  EXPECT_EQ(l.size(), 900u);
}

TEST(ParseLayout, RejectsInteriorDoor) {
  try {
    parse_layout("PPP\nPDP\nPPP\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("door not on boundary"), std::string::npos);
  }
}

TEST(ParseLayout, RejectsMalformedInput) {
  EXPECT_THROW(parse_layout("DR\nP\n"), Error);
  EXPECT_THROW(parse_layout("DX\nPE\n"), Error);
  EXPECT_THROW(parse_layout(""), Error);
  EXPECT_THROW(parse_layout("\n\n"), Error);
}

TEST(SerializeLayout, CanonicalText) {
  EXPECT_EQ(serialize_layout(parse_layout("DR\nPE")), "DR\nPE\n");
  Layout one(1, 1, CellType::Parking);
  EXPECT_EQ(serialize_layout(one), "P\n");
}

TEST(SerializeLayout, RoundTripsRandomLayouts) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    LotGenConfig cfg;
    cfg.height = 5 + static_cast<int>(seed % 26);
    cfg.width = 5 + static_cast<int>((seed * 7) % 26);
    cfg.n_evses = 4;
    cfg.seed = seed;
    const Layout l = generate_layout(cfg);
    const std::string text = serialize_layout(l);
    ASSERT_EQ(parse_layout(text), l) << "seed " << seed;
    ASSERT_EQ(serialize_layout(parse_layout(text)), text);
    if (cfg.height == 30 && cfg.width == 30) {
      EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 30);
    }
  }
}

TEST(ReachableEvses, UnreachableEvseExcluded) {
  const Layout l = fixtures::small_lot();
  const auto reach = reachable_evses(l);
  EXPECT_EQ(reach.size(), 2u);
  EXPECT_FALSE(reach.count(fixtures::kSmallLotUnreachable));
}

TEST(ReachableEvses, AllEvsesOnRoadTree) {
  const Layout l = parse_layout(
      "DRRRR\n"
      "PEPEP\n"
      "PPPPP\n");
  EXPECT_EQ(reachable_evses(l).size(), 2u);
}

TEST(ReachableEvses, DetachedLoopExcluded) {
  const Layout l = parse_layout(
      "DRPPP\n"
      "ERRRP\n"
      "PRERP\n"
      "PRRRP\n"
      "PPPPP\n");
  // The loop joins the door road at (1,1).
  EXPECT_TRUE(reachable_evses(l).count({2, 2}));

  // Same loop with its link to the door road removed.
  const Layout detached = parse_layout(
      "DRPPP\n"
      "EPPPP\n"
      "PRRRP\n"
      "PRERP\n"
      "PRRRP\n");
  const auto r = reachable_evses(detached);
  EXPECT_TRUE(r.count({1, 0}));
  EXPECT_FALSE(r.count({3, 2}));
}

// Flood fill from doors as an oracle for reachability on random layouts.
TEST(ReachableEvses, MatchesFloodFillAndVanishesWithoutDoors) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    LotGenConfig cfg;
    cfg.height = 8;
    cfg.width = 8;
    cfg.n_evses = 10;
    cfg.seed = seed;
    Layout l = generate_layout(cfg);
    std::set<Cell> visited;
    std::vector<Cell> stack = l.cells_of(CellType::Door);
    for (auto c : stack) visited.insert(c);
    while (!stack.empty()) {
      Cell c = stack.back();
      stack.pop_back();
      for (auto off : kNeighborOffsets) {
        Cell n{c.row + off.row, c.col + off.col};
        if (l.in_bounds(n) && is_road_like(l.at(n)) && visited.insert(n).second) stack.push_back(n);
      }
    }
    std::set<Cell> expect;
    for (auto e : l.cells_of(CellType::Evse))
      for (auto off : kNeighborOffsets)
        if (visited.count({e.row + off.row, e.col + off.col})) expect.insert(e);
    const auto got = reachable_evses(l);
    ASSERT_EQ(got, expect) << "seed " << seed;
    for (auto c : got) ASSERT_EQ(l.at(c), CellType::Evse);

    for (auto d : l.cells_of(CellType::Door)) l.set(d, CellType::Parking);
    EXPECT_TRUE(reachable_evses(l).empty());
  }
}

TEST(ScheduleCsv, RoundTripAndHeader) {
  Schedule s;
  s.events.push_back({0, VehicleKind::Ev, 1.5, 100.25, 10.5, 7.2});
  s.events.push_back({1, VehicleKind::Car, 3.0, 50.0, 0.0, 0.0});
  const std::string text = serialize_schedule(s);
  EXPECT_EQ(text.substr(0, text.find('\n')), "id,kind,arrival_min,departure_min,energy_kwh,peak_rate_kw");
  EXPECT_NE(text.find("1,CAR,3,50,,\n"), std::string::npos);
  const Schedule back = parse_schedule(text);
  ASSERT_EQ(back.events.size(), 2u);
  EXPECT_EQ(back.events[0], s.events[0]);
  EXPECT_EQ(back.events[1], s.events[1]);
}

TEST(ScheduleCsv, RejectsInvariantViolations) {
  const std::string h = "id,kind,arrival_min,departure_min,energy_kwh,peak_rate_kw\n";
  EXPECT_THROW(parse_schedule(h + "0,EV,10,5,1,1\n"), Error);          // departure before arrival
  EXPECT_THROW(parse_schedule(h + "0,EV,0,60,20,10\n"), Error);        // demand above peak*duration
  EXPECT_THROW(parse_schedule(h + "0,CAR,5,6,,\n0,CAR,7,8,,\n"), Error);  // duplicate id
  EXPECT_THROW(parse_schedule(h + "0,CAR,9,10,,\n1,CAR,5,6,,\n"), Error);  // unsorted
  EXPECT_THROW(parse_schedule(h + "0,BUS,5,6,,\n"), Error);
  EXPECT_THROW(parse_schedule("bad header\n"), Error);
}

TEST(PlacementCsv, RoundTripRecoversSkipped) {
  Schedule s;
  s.events.push_back({0, VehicleKind::Ev, 0, 60, 1, 7.2});
  s.events.push_back({1, VehicleKind::Ev, 1, 60, 1, 7.2});
  Placement p;
  p.assignments.push_back({0, {1, 1}});
  const std::string text = serialize_placement(p);
  EXPECT_EQ(text, "ev_id,row,col\n0,1,1\n");
  const Placement back = parse_placement(text, &s);
  ASSERT_EQ(back.assignments.size(), 1u);
  EXPECT_EQ(back.assignments[0], p.assignments[0]);
  EXPECT_EQ(back.skipped, std::vector<int>{1});
}

TEST(PlacementValidation, DetectsDoubleBookingAndWrongType) {
  const Layout l = parse_layout("DR\nPE\n");
  Schedule s;
  s.events.push_back({0, VehicleKind::Ev, 0, 60, 1, 7.2});
  s.events.push_back({1, VehicleKind::Ev, 30, 90, 1, 7.2});
  s.events.push_back({2, VehicleKind::Car, 30, 90, 0, 0});
  Placement p;
  p.assignments = {{0, {1, 1}}, {1, {1, 1}}};
  EXPECT_THROW(validate_placement(l, s, p), Error);
  p.assignments = {{0, {1, 1}}, {2, {1, 1}}};
  EXPECT_THROW(validate_placement(l, s, p), Error);
  p.assignments = {{0, {1, 1}}, {2, {1, 0}}};
  EXPECT_NO_THROW(validate_placement(l, s, p));
}

TEST(StatsCsv, RoundTrip) {
  std::vector<EvseStats> stats{{1, 2, 5.5, 10.0}, {3, 4, 0.0, 0.0}};
  const std::string text = serialize_stats(stats);
  EXPECT_EQ(text, "row,col,tau_kw,p_tot_kwh\n1,2,5.5,10\n3,4,0,0\n");
  const auto back = parse_stats(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].tau, 5.5);
  EXPECT_EQ(back[1].p_tot, 0.0);
}

TEST(Random, DeriveSeedSeparatesStagesAndIndices) {
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
  EXPECT_EQ(derive_seed(1, "a", 0), derive_seed(1, "a", 0));
}

}  // namespace
}  // namespace evsenet
