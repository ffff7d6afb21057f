#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "navqa/gridworld.hpp"
#include "navqa/rng.hpp"

namespace navqa::fixtures {

/// Walled rectangle with an all-floor interior of iw x ih cells.
inline GridWorld open_room(int iw, int ih, int world_id = 0) {
  GridWorld w(iw + 2, ih + 2, world_id);
  for (int y = 1; y <= ih; ++y)
    for (int x = 1; x <= iw; ++x) w.set_cell({x, y}, CellKind::Floor, 0);
  return w;
}

/// East-west corridor of `len` floor cells on row 1, x = 1..len.
inline GridWorld corridor(int len, int world_id = 0) { return open_room(len, 1, world_id); }

inline AgentState at(int x, int y, int heading = 0, int tilt = 0) {
  AgentState s;
  s.position = {x, y};
  s.heading = heading;
  s.tilt = tilt;
  return s;
}

inline constexpr double kGradFloor = 1e-7;

struct GradCheck {
  int checked = 0;
  double worst = 0.0;
};

/// Central differences of `loss` against the analytic gradient over n random
/// coordinates that carry gradient. Relative error |a-b| / max(|a|, |b|, 1e-7).
inline GradCheck finite_difference_check(std::vector<double>& values, const std::vector<double>& analytic,
                                         const std::function<double()>& loss, int n, Rng& rng,
                                         double h = 1e-4) {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    if (analytic[i] != 0.0) live.push_back(i);
  GradCheck out;
  for (int k = 0; k < n && !live.empty(); ++k) {
    const std::size_t i = live[rng.uniform_index(live.size())];
    const double v = values[i];
    values[i] = v + h;
    const double up = loss();
    values[i] = v - h;
    const double down = loss();
    values[i] = v;
    const double fd = (up - down) / (2 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), kGradFloor});
    out.worst = std::max(out.worst, rel);
    ++out.checked;
  }
  return out;
}

}  // namespace navqa::fixtures
