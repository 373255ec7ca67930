// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>

#include "evsenet/core.hpp"
#include "evsenet/lot_gen.hpp"
#include "evsenet/lp.hpp"
#include "evsenet/parking_sim.hpp"
#include "evsenet/random.hpp"
#include "evsenet/schedule_gen.hpp"
#include "oracles.hpp"

namespace evsenet::fixtures {

// Three EVSEs; (2,3) touches no road.
inline Layout small_lot() {
  return parse_layout(
      "DRRE\n"
      "PEPP\n"
      "PPPE\n");
}
inline constexpr Cell kSmallLotUnreachable{2, 3};

// One door at (2,0) feeding a short branching road. (0,2) is an edge spot,
// (2,3) sits at the junction, (4,4) hangs off the far branch and (1,6) has
// no road contact at all.
inline Layout branching_lot() {
  return parse_layout(
      "PPEPPPP\n"
      "PPRPPPE\n"
      "DRREPPP\n"
      "PPRPPPP\n"
      "PPRREPP\n"
      "PPPPPPP\n");
}
inline constexpr Cell kBranchingDoor{2, 0};
inline constexpr Cell kBranchingUnreachable{1, 6};

// Random LP with at most 4 variables and 4 rows that is feasible (x0 satisfies
// every row) and bounded (an all-positive row caps any free variable).
struct LpInstance {
  LpProblem problem;
  std::vector<oracle::Halfspace> rows;
};

inline LpInstance random_lp(Rng& rng) {
  const std::size_t n = 1 + uniform_index(rng, 4);
  std::vector<double> x0(n), upper(n);
  bool any_free = false;
  for (std::size_t j = 0; j < n; ++j) {
    x0[j] = uniform(rng, 0.0, 2.0);
    if (bernoulli(rng, 0.5)) {
      upper[j] = x0[j] + (bernoulli(rng, 0.2) ? 0.0 : uniform(rng, 0.0, 2.0));
    } else {
      upper[j] = std::numeric_limits<double>::infinity();
      any_free = true;
    }
  }
  const std::size_t m = uniform_index(rng, any_free ? 4 : 5);
  LpInstance inst{LpProblem(n), {}};
  for (std::size_t j = 0; j < n; ++j) {
    inst.problem.objective[j] = uniform(rng, -1.0, 1.0);
    inst.problem.upper[j] = upper[j];
  }
  auto push = [&](std::vector<double> a, double slack) {
    double b = slack;
    for (std::size_t j = 0; j < n; ++j) b += a[j] * x0[j];
    inst.problem.add_row(a, b);
    inst.rows.push_back({std::move(a), b});
  };
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> a(n);
    for (auto& v : a) v = uniform(rng, -1.0, 1.0);
    push(std::move(a), bernoulli(rng, 0.25) ? 0.0 : uniform(rng, 0.0, 1.0));
  }
  if (any_free) {
    std::vector<double> a(n);
    for (auto& v : a) v = uniform(rng, 0.1, 1.0);
    push(std::move(a), uniform(rng, 0.0, 1.0));
  }
  return inst;
}

struct Scenario {
  Layout layout;
  Schedule schedule;
  Placement placement;
};

inline Scenario random_scenario(std::uint64_t seed, int side, int n_evses, int n_evs, int n_cars) {
  LotGenConfig lc;
  lc.height = side;
  lc.width = side;
  lc.n_evses = n_evses;
  lc.seed = derive_seed(seed, "layout", 0);
  ScheduleGenConfig sc;
  sc.n_evs = n_evs;
  sc.n_cars = n_cars;
  sc.seed = derive_seed(seed, "schedule", 0);
  Scenario s{generate_layout_with_reachability(lc), generate_schedule(sc), {}};
  s.placement = simulate_parking(s.layout, s.schedule, {}, derive_seed(seed, "parking", 0));
  return s;
}

}  // namespace evsenet::fixtures
