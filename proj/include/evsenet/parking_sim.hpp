// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "evsenet/core.hpp"
#include "evsenet/random.hpp"

namespace evsenet {

struct ParkingRules {
  double p_base = 0.5;
  double occupied_neighbor_factor = 0.5;
  double edge_bonus = 1.5;
  double p_max = 0.95;
};

inline void validate(const ParkingRules& r) {
  if (!(r.p_base > 0.0 && r.p_base <= 1.0)) throw Error("parking rules: p_base must lie in (0,1]");
  if (!(r.p_max > 0.0 && r.p_max <= 1.0)) throw Error("parking rules: p_max must lie in (0,1]");
  if (!(r.occupied_neighbor_factor > 0.0) || !(r.edge_bonus > 0.0))
    throw Error("parking rules: factors must be positive");
}

/// Which cells hold a vehicle, and until when.
class OccupancyState {
 public:
  explicit OccupancyState(const Layout& layout)
      : layout_(&layout), departure_(layout.size(), kFree) {}

  bool occupied(Cell c) const { return !std::isnan(departure_[layout_->index(c)]); }
  double departure(Cell c) const { return departure_[layout_->index(c)]; }

  void occupy(Cell c, double departure) {
    if (!is_spot(layout_->at(c))) throw Error("only parking and EVSE cells can be occupied");
    if (occupied(c)) throw Error("cell already occupied");
    departure_[layout_->index(c)] = departure;
  }

  /// Frees every cell whose occupant has left by `time`.
  void release_until(double time) {
    for (auto& d : departure_)
      if (!std::isnan(d) && d <= time) d = kFree;
  }

  const Layout& layout() const { return *layout_; }

 private:
  static constexpr double kFree = std::numeric_limits<double>::quiet_NaN();
  const Layout* layout_;
  std::vector<double> departure_;
};

inline int occupied_neighbor_count(const Layout& layout, const OccupancyState& occ, Cell spot) {
  int n = 0;
  for (auto off : kNeighborOffsets) {
    const Cell c{spot.row + off.row, spot.col + off.col};
    if (layout.in_bounds(c) && is_spot(layout.at(c)) && occ.occupied(c)) ++n;
  }
  return n;
}

/// p_base * factor^(occupied neighbours) * (edge bonus on the boundary),
/// clamped to [0, p_max].
inline double park_probability(const Layout& layout, const OccupancyState& occ, Cell spot, const ParkingRules& rules) {
  if (!layout.in_bounds(spot) || !is_spot(layout.at(spot))) throw Error("park_probability: not a parking or EVSE cell");
  if (occ.occupied(spot)) throw Error("park_probability: spot is occupied");
  double p = rules.p_base * std::pow(rules.occupied_neighbor_factor, occupied_neighbor_count(layout, occ, spot));
  if (layout.on_boundary(spot)) p *= rules.edge_bonus;
  return std::clamp(p, 0.0, rules.p_max);
}

/// Road network rooted at one door; cycles broken by first-visit (BFS) parent.
struct RoadTree {
  std::size_t root = 0;
  std::vector<std::vector<std::size_t>> children;  // indexed by cell index
};

inline RoadTree build_road_tree(const Layout& layout, Cell door) {
  RoadTree tree;
  tree.root = layout.index(door);
  tree.children.assign(layout.size(), {});
  std::vector<bool> seen(layout.size(), false);
  std::deque<Cell> queue{door};
  seen[tree.root] = true;
  while (!queue.empty()) {
    const Cell cur = queue.front();
    queue.pop_front();
    for (auto off : kNeighborOffsets) {
      const Cell n{cur.row + off.row, cur.col + off.col};
      if (!layout.in_bounds(n) || !is_road_like(layout.at(n))) continue;
      const auto ni = layout.index(n);
      if (seen[ni]) continue;
      seen[ni] = true;
      tree.children[layout.index(cur)].push_back(ni);
      queue.push_back(n);
    }
  }
  return tree;
}

/// One vehicle's randomized depth-first search from `tree.root`.
/// Returns the chosen spot, or nullopt when the whole tree fails.
inline std::optional<Cell> search_spot(const Layout& layout, const OccupancyState& occ, const RoadTree& tree,
                                       CellType wanted, const ParkingRules& rules, Rng& rng) {
  struct Frame {
    std::size_t node;
    std::vector<std::size_t> order;
    std::size_t next = 0;
  };
  auto try_node = [&](std::size_t node) -> std::optional<Cell> {
    const Cell at = layout.cell_at(node);
    for (auto off : kNeighborOffsets) {
      const Cell s{at.row + off.row, at.col + off.col};
      if (!layout.in_bounds(s) || layout.at(s) != wanted || occ.occupied(s)) continue;
      if (bernoulli(rng, park_probability(layout, occ, s, rules))) return s;
    }
    return std::nullopt;
  };
  auto enter = [&](std::size_t node) {
    Frame f{node, tree.children[node]};
    shuffle(f.order.begin(), f.order.end(), rng);
    return f;
  };

  if (auto s = try_node(tree.root)) return s;
  std::vector<Frame> stack{enter(tree.root)};
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next == top.order.size()) {
      stack.pop_back();
      continue;
    }
    const std::size_t child = top.order[top.next++];
    if (auto s = try_node(child)) return s;
    stack.push_back(enter(child));
  }
  return std::nullopt;
}

/// Stateful simulator for one layout; useful when the caller controls
/// occupancy directly.
class ParkingSimulator {
 public:
  ParkingSimulator(const Layout& layout, ParkingRules rules) : layout_(&layout), rules_(rules) {
    validate(rules_);
    for (auto d : layout.cells_of(CellType::Door)) trees_.push_back(build_road_tree(layout, d));
    if (trees_.empty()) throw Error("parking-sim: layout has no doors");
  }

  std::optional<Cell> route(const OccupancyState& occ, VehicleKind kind, Rng& rng) const {
    const auto& tree = trees_[uniform_index(rng, trees_.size())];
    const CellType wanted = kind == VehicleKind::Ev ? CellType::Evse : CellType::Parking;
    return search_spot(*layout_, occ, tree, wanted, rules_, rng);
  }

  std::size_t door_count() const { return trees_.size(); }

 private:
  const Layout* layout_;
  ParkingRules rules_;
  std::vector<RoadTree> trees_;
};

/// Processes arrivals in order, freeing departed vehicles first.
inline Placement simulate_parking(const Layout& layout, const Schedule& schedule, const ParkingRules& rules,
                                  std::uint64_t seed) {
  ParkingSimulator sim(layout, rules);
  OccupancyState occ(layout);
  Rng rng(seed);
  Placement placement;
  for (const auto& e : schedule.events) {
    occ.release_until(e.arrival);
    if (auto spot = sim.route(occ, e.kind, rng)) {
      occ.occupy(*spot, e.departure);
      placement.assignments.push_back({e.id, *spot});
    } else {
      placement.skipped.push_back(e.id);
    }
  }
  return placement;
}

}  // namespace evsenet
