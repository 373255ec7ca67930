// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "evsenet/core.hpp"
#include "evsenet/random.hpp"

namespace evsenet {

struct ScheduleGenConfig {
  int n_evs = 50;
  int n_cars = 100;
  double horizon = 720.0;     // minutes
  double parked_mean = 4.0;   // hours
  double parked_std = 2.0;    // hours
  double rate_mean = 10.0;    // kW
  double rate_std = 5.0;      // kW
  std::vector<double> peak_rate_pool{3.3, 6.6, 7.2, 10.0, 19.2};
  std::uint64_t seed = 0;
};

inline void validate(const ScheduleGenConfig& c) {
  if (c.n_evs < 0 || c.n_cars < 0) throw Error("schedule-gen: counts must be nonnegative");
  if (!(c.horizon > 0.0)) throw Error("schedule-gen: horizon must be positive");
  if (c.parked_std < 0.0 || c.rate_std < 0.0) throw Error("schedule-gen: standard deviations must be nonnegative");
  if (c.peak_rate_pool.empty()) throw Error("schedule-gen: peak rate pool is empty");
  for (double p : c.peak_rate_pool)
    if (!(p > 0.0)) throw Error("schedule-gen: peak rates must be positive");
}

/// Independent uniform arrivals over the horizon; parked time and average
/// rate from truncated normals; energy demand follows from the two.
/// Ids are assigned in arrival order.
inline Schedule generate_schedule(const ScheduleGenConfig& config) {
  validate(config);
  Rng rng(config.seed);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Schedule schedule;
  schedule.horizon = config.horizon;
  schedule.events.reserve(static_cast<std::size_t>(config.n_evs + config.n_cars));

  for (int i = 0; i < config.n_evs; ++i) {
    VehicleEvent e;
    e.kind = VehicleKind::Ev;
    e.arrival = uniform(rng, 0.0, config.horizon);
    e.peak_rate = config.peak_rate_pool[uniform_index(rng, config.peak_rate_pool.size())];
    const double hours = truncated_normal(rng, config.parked_mean, config.parked_std, 0.0, kInf);
    const double rate = truncated_normal(rng, config.rate_mean, config.rate_std, 0.0, e.peak_rate);
    e.departure = e.arrival + hours * 60.0;
    e.energy_demand = rate * hours;
    schedule.events.push_back(e);
  }
  for (int i = 0; i < config.n_cars; ++i) {
    VehicleEvent e;
    e.kind = VehicleKind::Car;
    e.arrival = uniform(rng, 0.0, config.horizon);
    e.departure = e.arrival + truncated_normal(rng, config.parked_mean, config.parked_std, 0.0, kInf) * 60.0;
    schedule.events.push_back(e);
  }
  std::stable_sort(schedule.events.begin(), schedule.events.end(),
                   [](const auto& a, const auto& b) { return a.arrival < b.arrival; });
  for (std::size_t i = 0; i < schedule.events.size(); ++i) schedule.events[i].id = static_cast<int>(i);
  return schedule;
}

}  // namespace evsenet
