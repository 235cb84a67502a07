// Apache License, Version 2.0, refer to LICENSE.txt
//
// Exhaustive monotone-path search used as an oracle for the dynamic program.

#pragma once

#include <algorithm>
#include <functional>
#include <limits>

#include "elastica/dp.hpp"

namespace elastica::testing {

/// Minimum over every monotone path on `lat`, accumulating segment costs in
/// path order.
inline double brute_force_min(const Lattice& lat, const SegmentCost& seg) {
  double best = std::numeric_limits<double>::infinity();
  const auto inside = [&](int i, int j) {
    if (i >= lat.nx || j >= lat.ny) return false;
    if (lat.band.empty()) return true;
    const auto [lo, hi] = lat.band[static_cast<std::size_t>(i)];
    return j >= lo && j <= hi;
  };
  std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
    if (i == lat.nx - 1 && j == lat.ny - 1) {
      best = std::min(best, acc);
      return;
    }
    for (const Step& s : lat.steps) {
      if (inside(i + s.di, j + s.dj)) walk(i + s.di, j + s.dj, acc + seg(i, j, s.di, s.dj));
    }
  };
  walk(0, 0, 0.0);
  return best;
}

}  // namespace elastica::testing
