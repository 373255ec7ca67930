// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "evsenet/core.hpp"
#include "evsenet/random.hpp"

namespace evsenet {

struct LotGenConfig {
  int height = 30;
  int width = 30;
  int n_evses = 15;
  double p_door = 0.05;
  double p_split0 = 0.15;
  double split_decay = 0.5;
  double halt_slope = 0.02;
  double halt_cap = 0.8;
  std::uint64_t seed = 0;
};

inline void validate(const LotGenConfig& c) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (c.height <= 0 || c.width <= 0) throw Error("lot-gen: dimensions must be positive");
  if (c.n_evses <= 0 || c.n_evses >= c.height * c.width) throw Error("lot-gen: need 0 < n_evses < height*width");
  if (!prob(c.p_door) || !prob(c.p_split0) || !prob(c.split_decay) || !prob(c.halt_cap) || c.halt_slope < 0.0)
    throw Error("lot-gen: probabilities must lie in [0,1]");
  if (!(c.halt_cap < 1.0)) throw Error("lot-gen: halt_cap must be < 1");
}

enum class Heading : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

inline Cell step(Cell c, Heading h) {
  const auto off = kNeighborOffsets[static_cast<std::size_t>(h)];
  return {c.row + off.row, c.col + off.col};
}
inline Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
inline Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

struct ActiveRoad {
  Cell head;
  Heading direction = Heading::N;
  int length = 0;
};

namespace detail {

// One attempt; nullopt when road growth leaves too few free cells.
inline std::optional<Layout> grow_layout_once(const LotGenConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const int H = cfg.height, W = cfg.width;
  std::vector<std::optional<CellType>> grid(static_cast<std::size_t>(H) * static_cast<std::size_t>(W));
  Layout shape(H, W);
  auto at = [&](Cell c) -> std::optional<CellType>& { return grid[shape.index(c)]; };

  // Doors, in row-major boundary order.
  std::vector<Cell> boundary;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      if (shape.on_boundary({r, c})) boundary.push_back({r, c});
  std::vector<Cell> doors;
  for (auto c : boundary)
    if (bernoulli(rng, cfg.p_door)) doors.push_back(c);
  if (doors.empty()) doors.push_back(boundary[uniform_index(rng, boundary.size())]);
  for (auto d : doors) at(d) = CellType::Door;

  std::deque<ActiveRoad> active;
  for (auto d : doors) {
    std::vector<Heading> dirs;
    for (int h = 0; h < 4; ++h)
      if (shape.in_bounds(step(d, static_cast<Heading>(h)))) dirs.push_back(static_cast<Heading>(h));
    if (dirs.empty()) continue;  // 1x1 grid
    active.push_back({d, dirs[uniform_index(rng, dirs.size())], 0});
  }

  int splits = 0;
  while (!active.empty()) {
    ActiveRoad road = active.front();
    active.pop_front();
    const double p_halt = std::min(cfg.halt_cap, cfg.halt_slope * road.length);
    const double p_split = cfg.p_split0 * std::pow(cfg.split_decay, splits);
    const double u = uniform01(rng);
    if (u < p_halt) continue;
    if (u < p_halt + p_split) {
      ++splits;
      for (Heading h : {turn_left(road.direction), turn_right(road.direction)}) {
        const Cell n = step(road.head, h);
        if (!shape.in_bounds(n) || at(n).has_value()) continue;
        at(n) = CellType::Road;
        active.push_back({n, h, 1});
      }
      continue;
    }
    const Cell n = step(road.head, road.direction);
    // Edges, doors and existing roads all stop growth.
    if (!shape.in_bounds(n) || at(n).has_value()) continue;
    at(n) = CellType::Road;
    active.push_back({n, road.direction, road.length + 1});
  }

  std::vector<std::size_t> free_cells;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!grid[i]) free_cells.push_back(i);
  if (free_cells.size() < static_cast<std::size_t>(cfg.n_evses)) return std::nullopt;
  // Partial Fisher-Yates picks n_evses distinct cells uniformly.
  for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.n_evses); ++k) {
    const auto j = k + uniform_index(rng, free_cells.size() - k);
    std::swap(free_cells[k], free_cells[j]);
    grid[free_cells[k]] = CellType::Evse;
  }

  Layout layout(H, W, CellType::Parking);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i]) layout.set(layout.cell_at(i), *grid[i]);
  return layout;
}

}  // namespace detail

inline constexpr int kLotGenMaxAttempts = 100;
inline constexpr int kReachabilityMaxAttempts = 1000;

/// Grows roads from random boundary doors, then scatters EVSEs over the
/// remaining cells. Deterministic in (config, seed).
inline Layout generate_layout(const LotGenConfig& config) {
  validate(config);
  for (int attempt = 0; attempt < kLotGenMaxAttempts; ++attempt) {
    const auto seed = attempt == 0 ? config.seed : derive_seed(config.seed, "lot-gen-retry", static_cast<std::uint64_t>(attempt));
    if (auto layout = detail::grow_layout_once(config, seed)) return *std::move(layout);
  }
  throw Error("lot-gen: could not place " + std::to_string(config.n_evses) + " EVSEs after " +
              std::to_string(kLotGenMaxAttempts) + " attempts");
}

/// Regenerates until at least one EVSE is reachable. Partially unreachable
/// layouts are accepted.
inline Layout generate_layout_with_reachability(const LotGenConfig& config, int* attempts_used = nullptr) {
  for (int attempt = 0; attempt < kReachabilityMaxAttempts; ++attempt) {
    LotGenConfig c = config;
    if (attempt > 0) c.seed = derive_seed(config.seed, "lot-gen-reachability", static_cast<std::uint64_t>(attempt));
    Layout layout = generate_layout(c);
    if (!reachable_evses(layout).empty()) {
      if (attempts_used) *attempts_used = attempt + 1;
      return layout;
    }
  }
  throw Error("lot-gen: no layout with a reachable EVSE after " + std::to_string(kReachabilityMaxAttempts) +
              " attempts; configuration is pathological");
}

}  // namespace evsenet
