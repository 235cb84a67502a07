// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "elastica/random.hpp"
#include "elastica/srvf.hpp"
#include "elastica/warp.hpp"

namespace elastica::testing {

/// Smooth random SRVF: a short random cosine series in each coordinate.
inline Srvf random_srvf(Rng& rng, Eigen::Index points, int dim = 1, int terms = 4) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Matrix coef(terms + 1, dim), ph(terms + 1, dim);
  for (int j = 0; j <= terms; ++j) {
    for (int c = 0; c < dim; ++c) {
      coef(j, c) = normal(rng) / (1.0 + j);
      ph(j, c) = phase(rng);
    }
  }
  const Grid grid = Grid::uniform(points);
  Matrix v(points, dim);
  for (Eigen::Index i = 0; i < points; ++i) {
    for (int c = 0; c < dim; ++c) {
      double s = coef(0, c);
      for (int j = 1; j <= terms; ++j) s += coef(j, c) * std::cos(j * std::numbers::pi * grid[i] + ph(j, c));
      v(i, c) = s;
    }
  }
  return {grid, std::move(v)};
}

/// Warp with Dirichlet(a) increments.
inline WarpFunction random_warp(Rng& rng, int segments, double a) {
  for (;;) {
    const auto p = dirichlet(a, segments, rng);
    bool ok = true;
    for (double v : p) ok = ok && v > 1e-9;
    if (ok) {
      std::vector<double> k(p.size() + 1, 0.0);
      for (std::size_t i = 0; i < p.size(); ++i) k[i + 1] = k[i] + p[i];
      k.back() = 1.0;
      return WarpFunction::from_knots(std::move(k));
    }
  }
}

/// Random monotone lattice path on an (n+1)x(n+1) lattice built from steps
/// (di, dj) drawn from `steps`, each repeated for a random run of up to
/// `max_run` moves; returned as a warp with n segments whose knots lie on
/// lattice nodes. Every such warp is exactly representable by the
/// dynamic-programming search that uses the same steps.
inline WarpFunction random_lattice_warp(Rng& rng, int n,
                                        const std::vector<std::pair<int, int>>& steps,
                                        int max_run = 8) {
  // reach[a][b]: the corner is reachable when a, b moves remain.
  std::vector<std::vector<char>> reach(static_cast<std::size_t>(n) + 1,
                                       std::vector<char>(static_cast<std::size_t>(n) + 1, 0));
  reach[0][0] = 1;
  for (int a = 0; a <= n; ++a) {
    for (int b = 0; b <= n; ++b) {
      for (auto [di, dj] : steps) {
        if (a >= di && b >= dj && reach[static_cast<std::size_t>(a - di)][static_cast<std::size_t>(b - dj)]) {
          reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
        }
      }
    }
  }
  std::uniform_int_distribution<int> run(1, max_run);
  std::vector<std::pair<int, int>> nodes{{0, 0}};
  int i = 0, j = 0;
  while (i < n || j < n) {
    std::vector<std::pair<int, int>> feasible;
    for (auto s : steps) {
      const int a = n - i - s.first, b = n - j - s.second;
      if (a >= 0 && b >= 0 && reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) feasible.push_back(s);
    }
    std::uniform_int_distribution<std::size_t> f(0, feasible.size() - 1);
    const auto s = feasible[f(rng)];
    for (int r = run(rng); r > 0; --r) {
      const int a = n - i - s.first, b = n - j - s.second;
      if (a < 0 || b < 0 || !reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) break;
      i += s.first;
      j += s.second;
      nodes.emplace_back(i, j);
    }
  }
  std::vector<double> knots(static_cast<std::size_t>(n) + 1);
  for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
    const auto [i0, j0] = nodes[s];
    const auto [i1, j1] = nodes[s + 1];
    for (int x = i0; x <= i1; ++x) {
      knots[static_cast<std::size_t>(x)] =
          (j0 + static_cast<double>(j1 - j0) * (x - i0) / (i1 - i0)) / n;
    }
  }
  return WarpFunction::from_knots(std::move(knots));
}

/// Smooth warp t + sum_k c_k sin(k pi t) / (k pi), k = 1..3, with
/// sum |c_k| <= max_amplitude < 1 so that 1 - a <= g' <= 1 + a. Stored on
/// `segments` knots.
inline WarpFunction random_smooth_warp(Rng& rng, int segments, double max_amplitude) {
  double c[3];
  double total = 0.0;
  for (double& v : c) {
    v = 2.0 * uniform01(rng) - 1.0;
    total += std::abs(v);
  }
  const double scale = max_amplitude * uniform01(rng) / total;
  std::vector<double> k(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) {
    const double t = static_cast<double>(i) / segments;
    double g = t;
    for (int j = 0; j < 3; ++j) {
      const double w = (j + 1) * std::numbers::pi;
      g += scale * c[j] * std::sin(w * t) / w;
    }
    k[static_cast<std::size_t>(i)] = g;
  }
  return WarpFunction::from_knots(std::move(k));
}

inline Srvf rotated_copy(const Srvf& q, double theta) {
  Matrix r(2, 2);
  r << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
  return {q.grid(), q.values() * r, q.unit_norm()};
}

}  // namespace elastica::testing
