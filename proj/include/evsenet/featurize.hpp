// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <limits>
#include <vector>

#include "evsenet/core.hpp"

namespace evsenet {

struct FeatureConfig {
  int m = 9;
  bool include_door_distance = false;
  bool normalize_distance = false;

  std::size_t length() const {
    return static_cast<std::size_t>(m) * static_cast<std::size_t>(m) * kChannels + (include_door_distance ? 1 : 0);
  }
  static constexpr std::size_t kChannels = 5;
};

inline void validate(const FeatureConfig& c) {
  if (c.m < 1 || c.m % 2 == 0) throw Error("featurize: m must be odd and >= 1");
}

enum class Channel : std::size_t { Road = 0, Parking = 1, Evse = 2, Door = 3, OffGrid = 4 };

inline Channel channel_of(CellType t) {
  switch (t) {
    case CellType::Road: return Channel::Road;
    case CellType::Parking: return Channel::Parking;
    case CellType::Evse: return Channel::Evse;
    case CellType::Door: return Channel::Door;
  }
  return Channel::OffGrid;
}

/// Road-graph distances from every road/door cell to the nearest door.
/// Non-road cells and disconnected roads hold -1.
inline std::vector<int> door_distance_field(const Layout& layout) {
  std::vector<int> dist(layout.size(), -1);
  std::deque<Cell> queue;
  for (auto d : layout.cells_of(CellType::Door)) {
    dist[layout.index(d)] = 0;
    queue.push_back(d);
  }
  while (!queue.empty()) {
    const Cell cur = queue.front();
    queue.pop_front();
    for (auto off : kNeighborOffsets) {
      const Cell n{cur.row + off.row, cur.col + off.col};
      if (!layout.in_bounds(n) || !is_road_like(layout.at(n)) || dist[layout.index(n)] >= 0) continue;
      dist[layout.index(n)] = dist[layout.index(cur)] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

inline double unreachable_distance(const Layout& layout) { return 2.0 * (layout.height() + layout.width()); }

/// 1 + shortest road path from an adjacent road/door cell to any door;
/// 2*(H+W) when no adjacent cell connects to a door.
inline double door_distance(const Layout& layout, Cell evse, const std::vector<int>& field) {
  int best = std::numeric_limits<int>::max();
  for (auto off : kNeighborOffsets) {
    const Cell n{evse.row + off.row, evse.col + off.col};
    if (!layout.in_bounds(n)) continue;
    const int d = field[layout.index(n)];
    if (d >= 0 && d < best) best = d;
  }
  return best == std::numeric_limits<int>::max() ? unreachable_distance(layout) : best + 1.0;
}

inline double door_distance(const Layout& layout, Cell evse) {
  return door_distance(layout, evse, door_distance_field(layout));
}

namespace detail {

inline std::vector<double> extract_features(const Layout& layout, Cell evse, const FeatureConfig& config,
                                            const std::vector<int>* field) {
  validate(config);
  if (!layout.in_bounds(evse)) throw Error("featurize: center out of bounds");
  if (layout.at(evse) != CellType::Evse) throw Error("featurize: center cell is not an EVSE");
  std::vector<double> v(config.length(), 0.0);
  const int half = config.m / 2;
  std::size_t pos = 0;
  for (int dr = -half; dr <= half; ++dr) {
    for (int dc = -half; dc <= half; ++dc, ++pos) {
      const Cell c{evse.row + dr, evse.col + dc};
      const Channel ch = layout.in_bounds(c) ? channel_of(layout.at(c)) : Channel::OffGrid;
      v[pos * FeatureConfig::kChannels + static_cast<std::size_t>(ch)] = 1.0;
    }
  }
  if (config.include_door_distance) {
    double d = field ? door_distance(layout, evse, *field) : door_distance(layout, evse);
    if (config.normalize_distance) d /= layout.height() + layout.width();
    v.back() = d;
  }
  return v;
}

}  // namespace detail

/// One-hot M x M x 5 window around `evse`, flattened as (row, col, channel),
/// optionally followed by the door distance.
inline std::vector<double> extract_features(const Layout& layout, Cell evse, const FeatureConfig& config) {
  return detail::extract_features(layout, evse, config, nullptr);
}

struct EvseFeatures {
  Cell evse;
  std::vector<double> values;
  double door_distance = 0.0;  // raw, unnormalized
};

/// Features for every EVSE of the layout, row-major.
inline std::vector<EvseFeatures> extract_all(const Layout& layout, const FeatureConfig& config) {
  const auto field = door_distance_field(layout);
  std::vector<EvseFeatures> out;
  for (auto e : layout.cells_of(CellType::Evse))
    out.push_back({e, detail::extract_features(layout, e, config, &field), door_distance(layout, e, field)});
  return out;
}

}  // namespace evsenet
