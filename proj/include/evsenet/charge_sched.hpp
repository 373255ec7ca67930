// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "evsenet/core.hpp"
#include "evsenet/lp.hpp"

namespace evsenet {

struct ChargeConfig {
  int slot_minutes = 5;
  double network_capacity = std::numeric_limits<double>::infinity();  // kW
  int horizon = 720;  // minutes

  bool bounded() const { return std::isfinite(network_capacity); }
  int slots() const { return horizon / slot_minutes; }
  double slot_hours() const { return slot_minutes / 60.0; }
};

inline void validate(const ChargeConfig& c) {
  if (c.slot_minutes <= 0 || c.horizon <= 0 || c.horizon % c.slot_minutes != 0)
    throw Error("charge config: slot_minutes must divide a positive horizon");
  if (!(c.network_capacity > 0.0)) throw Error("charge config: capacity must be positive or unbounded");
}

/// Charging rates of one EV over its own window of slots.
struct EvCharge {
  int ev_id = 0;
  std::size_t evse = 0;  // index into RateProfile::evses
  int first_slot = 0;    // inclusive
  int last_slot = 0;     // exclusive
  double demand = 0.0;
  double peak = 0.0;
  std::vector<double> rates;  // length last_slot - first_slot

  double delivered(double slot_hours) const {
    double e = 0.0;
    for (double r : rates) e += r * slot_hours;
    return e;
  }
};

struct RateProfile {
  int slots = 0;
  double slot_hours = 0.0;
  std::vector<Cell> evses;                  // row-major order of the layout
  std::vector<std::vector<double>> rates;   // [evse][slot], kW
  std::vector<std::vector<bool>> occupied;  // [evse][slot], EV present
  std::vector<EvCharge> vehicles;
  std::size_t lp_solves = 0;
};

namespace detail {

// Slots fully inside [arrival, departure), clipped to the horizon.
inline std::pair<int, int> slot_window(const VehicleEvent& e, const ChargeConfig& cfg) {
  const int first = static_cast<int>(std::ceil(e.arrival / cfg.slot_minutes - 1e-9));
  const int last = std::min(cfg.slots(), static_cast<int>(std::floor(e.departure / cfg.slot_minutes + 1e-9)));
  return {first, std::max(first, last)};
}

inline RateProfile prepare_profile(const Layout& layout, const Schedule& schedule, const Placement& placement,
                                   const ChargeConfig& cfg) {
  validate(cfg);
  RateProfile p;
  p.slots = cfg.slots();
  p.slot_hours = cfg.slot_hours();
  p.evses = layout.cells_of(CellType::Evse);
  p.rates.assign(p.evses.size(), std::vector<double>(static_cast<std::size_t>(p.slots), 0.0));
  p.occupied.assign(p.evses.size(), std::vector<bool>(static_cast<std::size_t>(p.slots), false));
  std::map<Cell, std::size_t> evse_index;
  for (std::size_t i = 0; i < p.evses.size(); ++i) evse_index[p.evses[i]] = i;

  for (const auto& a : placement.assignments) {
    const auto* e = schedule.find(a.vehicle_id);
    if (!e) throw Error("charge: placement references unknown vehicle " + std::to_string(a.vehicle_id));
    if (!e->is_ev()) continue;
    auto it = evse_index.find(a.cell);
    if (it == evse_index.end())
      throw Error("charge: EV " + std::to_string(e->id) + " placed on a non-EVSE cell");
    auto [first, last] = slot_window(*e, cfg);
    EvCharge job{e->id, it->second, first, last, e->energy_demand, e->peak_rate,
                 std::vector<double>(static_cast<std::size_t>(last - first), 0.0)};
    for (int t = first; t < last; ++t) {
      auto&& occ = p.occupied[job.evse][static_cast<std::size_t>(t)];
      if (occ) throw Error("charge: two EVs share an EVSE in one slot");
      occ = true;
    }
    p.vehicles.push_back(std::move(job));
  }
  return p;
}

inline void fill_rates(RateProfile& p) {
  for (const auto& v : p.vehicles)
    for (int t = v.first_slot; t < v.last_slot; ++t)
      p.rates[v.evse][static_cast<std::size_t>(t)] = v.rates[static_cast<std::size_t>(t - v.first_slot)];
}

}  // namespace detail

/// Online LP: at every arrival slot, re-plans all EVs present over their
/// remaining slots. Objective weight (slots - t) front-loads delivery.
/// Rates already delivered are never revised.
inline RateProfile schedule_charging(const Layout& layout, const Schedule& schedule, const Placement& placement,
                                     const ChargeConfig& config) {
  RateProfile p = detail::prepare_profile(layout, schedule, placement, config);
  const int T = p.slots;
  const double dh = p.slot_hours;

  std::vector<int> events;
  for (const auto& v : p.vehicles)
    if (v.last_slot > v.first_slot) events.push_back(v.first_slot);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());

  for (int now : events) {
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < p.vehicles.size(); ++i) {
      const auto& v = p.vehicles[i];
      if (v.first_slot <= now && now < v.last_slot) present.push_back(i);
    }
    // Variable layout: vehicle-major, then slot.
    std::vector<std::size_t> offset(present.size() + 1, 0);
    for (std::size_t k = 0; k < present.size(); ++k)
      offset[k + 1] = offset[k] + static_cast<std::size_t>(p.vehicles[present[k]].last_slot - now);
    const std::size_t n = offset.back();
    LpProblem lp(n);
    std::vector<double> row(n, 0.0);
    for (std::size_t k = 0; k < present.size(); ++k) {
      const auto& v = p.vehicles[present[k]];
      double delivered = 0.0;
      for (int t = v.first_slot; t < now; ++t) delivered += v.rates[static_cast<std::size_t>(t - v.first_slot)] * dh;
      std::fill(row.begin(), row.end(), 0.0);
      for (int t = now; t < v.last_slot; ++t) {
        const std::size_t j = offset[k] + static_cast<std::size_t>(t - now);
        lp.objective[j] = static_cast<double>(T - t);
        lp.upper[j] = v.peak;
        row[j] = dh;
      }
      lp.add_row(row, std::max(0.0, v.demand - delivered));
    }
    if (config.bounded()) {
      for (int t = now; t < T; ++t) {
        std::fill(row.begin(), row.end(), 0.0);
        double peak_sum = 0.0;
        for (std::size_t k = 0; k < present.size(); ++k) {
          const auto& v = p.vehicles[present[k]];
          if (t >= v.last_slot) continue;
          row[offset[k] + static_cast<std::size_t>(t - now)] = 1.0;
          peak_sum += v.peak;
        }
        // Rows that cannot bind are left out.
        if (peak_sum > config.network_capacity) lp.add_row(row, config.network_capacity);
      }
    }
    const LpResult sol = solve_lp(lp);
    ++p.lp_solves;
    if (sol.status != LpStatus::Optimal) throw Error("charge: scheduling LP not optimal (internal error)");
    for (std::size_t k = 0; k < present.size(); ++k) {
      auto& v = p.vehicles[present[k]];
      for (int t = now; t < v.last_slot; ++t)
        v.rates[static_cast<std::size_t>(t - v.first_slot)] = sol.x[offset[k] + static_cast<std::size_t>(t - now)];
    }
  }
  detail::fill_rates(p);
  return p;
}

/// Every EV charges at peak from its first slot until its demand is met.
/// Only valid without a network capacity limit.
inline RateProfile greedy_schedule(const Layout& layout, const Schedule& schedule, const Placement& placement,
                                   const ChargeConfig& config) {
  if (config.bounded()) throw Error("greedy_schedule requires unbounded network capacity");
  RateProfile p = detail::prepare_profile(layout, schedule, placement, config);
  for (auto& v : p.vehicles) {
    double remaining = v.demand;
    for (auto& r : v.rates) {
      r = std::clamp(remaining / p.slot_hours, 0.0, v.peak);
      remaining -= r * p.slot_hours;
    }
  }
  detail::fill_rates(p);
  return p;
}

/// Per-EVSE energy over the horizon and mean rate over EV-occupied slots.
inline std::vector<EvseStats> compute_stats(const RateProfile& profile) {
  std::vector<EvseStats> out;
  out.reserve(profile.evses.size());
  for (std::size_t i = 0; i < profile.evses.size(); ++i) {
    EvseStats s{profile.evses[i].row, profile.evses[i].col, 0.0, 0.0};
    double rate_sum = 0.0;
    int occupied = 0;
    for (std::size_t t = 0; t < static_cast<std::size_t>(profile.slots); ++t) {
      s.p_tot += profile.rates[i][t] * profile.slot_hours;
      if (profile.occupied[i][t]) {
        rate_sum += profile.rates[i][t];
        ++occupied;
      }
    }
    s.tau = occupied > 0 ? rate_sum / occupied : 0.0;
    out.push_back(s);
  }
  return out;
}

inline std::string serialize_profile(const RateProfile& profile) {
  std::string out = "row,col";
  for (int t = 0; t < profile.slots; ++t) out += ",slot_" + std::to_string(t);
  out += '\n';
  for (std::size_t i = 0; i < profile.evses.size(); ++i) {
    out += std::to_string(profile.evses[i].row) + "," + std::to_string(profile.evses[i].col);
    for (double r : profile.rates[i]) out += "," + format_double(r);
    out += '\n';
  }
  return out;
}

}  // namespace evsenet
