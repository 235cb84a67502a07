// Apache License, Version 2.0, refer to LICENSE.txt
//
// Quotient-space registration: slope-constrained dynamic programming over a
// lattice (a coarse square pass, then a banded pass with a refined warped
// axis), elastic distances, and the iterative Karcher mean.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>
#include <span>
#include <utility>
#include <vector>

#include "elastica/error.hpp"
#include "elastica/parallel.hpp"
#include "elastica/rotation.hpp"
#include "elastica/srvf.hpp"
#include "elastica/warp.hpp"

namespace elastica {

/// A lattice step: `di` cells along the q1 axis, `dj` along the warped axis,
/// i.e. local slope dj / di.
struct Step {
  int di = 1;
  int dj = 1;
  friend bool operator==(const Step&, const Step&) = default;
};

[[nodiscard]] inline std::vector<Step> default_slopes() {
  return {{3, 1}, {2, 1}, {3, 2}, {1, 1}, {2, 3}, {1, 2}, {1, 3}};
}

struct DpConfig {
  int lattice_size = 0;  // nodes per axis; 0 means one node per grid point
  std::vector<Step> slope_set = default_slopes();
  bool rotation_enabled = true;  // used only when m >= 2
  int knots = 0;                 // segments M of returned warps; 0 means lattice_size - 1
  int workers = 1;               // parallel alignments inside karcher_mean
  // Second pass: the warped axis is refined by this factor inside a band of
  // `band` coarse cells around the first-pass path, with every slope
  // dj / (refine * di), di <= 2, inside the range of slope_set. 1 disables it.
  int refine = 16;
  int band = 2;
  int refine_passes = 4;  // band re-centring rounds in the second pass
};

/// Lowest-cost monotone path from (0,0) to (nx-1, ny-1) in lattice units.
struct DpPath {
  std::vector<std::pair<int, int>> nodes;
  double cost = 0.0;
  int nx = 0;
  int ny = 0;
};

struct WarpMatch {
  WarpFunction warp;
  double distance = 0.0;
};

struct ElasticAlignment {
  WarpFunction warp;
  Rotation rotation;
  double distance = 0.0;
  bool converged = true;  // false when the rotation/warp alternation hit its cap
};

struct KarcherResult {
  Srvf mean;
  std::vector<WarpFunction> warps;
  std::vector<Rotation> rotations;
  std::vector<double> objective_trace;
  int iterations = 0;
};

/// A rectangular lattice search problem: node (i, j) sits at
/// (i / (nx-1), j / (ny-1)); column i may only use rows band[i].first..second.
struct Lattice {
  int nx = 0;
  int ny = 0;
  std::vector<Step> steps;
  std::vector<std::pair<int, int>> band;  // empty means the full column

  [[nodiscard]] static Lattice square(int n, std::vector<Step> steps) {
    return {n, n, std::move(steps), {}};
  }
};

namespace detail {

inline int resolved_lattice(const Srvf& q, const DpConfig& cfg) {
  return cfg.lattice_size > 0 ? cfg.lattice_size : static_cast<int>(q.size());
}

inline void validate_dp(const Srvf& q1, const Srvf& q2, const DpConfig& cfg) {
  require(q1.grid() == q2.grid() && q1.dim() == q2.dim(), "dp_registration",
          "common_grid", "SRVFs must share grid and dimension");
  const int n = resolved_lattice(q1, cfg);
  require(n >= 3, "dp_registration", "lattice_size", "lattice_size must be at least 3");
  require(std::find(cfg.slope_set.begin(), cfg.slope_set.end(), Step{1, 1}) !=
              cfg.slope_set.end(),
          "dp_registration", "slope_set", "slope set must contain slope 1");
  for (const Step& s : cfg.slope_set) {
    require(s.di >= 1 && s.dj >= 1, "dp_registration", "slope_set",
            "slope steps must be positive");
  }
  require(cfg.refine >= 1 && cfg.band >= 1, "dp_registration", "refine",
          "refine and band must be at least 1");
  const int m = cfg.knots > 0 ? cfg.knots : n - 1;
  require(m <= n - 1, "dp_registration", "lattice_size",
          "lattice too coarse for the requested number of knots");
}

}  // namespace detail

/// Segment costs on a lattice. q1 is pre-sampled on a refinement of the
/// x-lattice so every segment shares quadrature nodes with its neighbours.
class SegmentCost {
 public:
  SegmentCost(const Srvf& q1, const Srvf& q2, int nx, int ny)
      : nx_(nx), ny_(ny), dim_(q1.dim()), grid_(&q2.grid()) {
    const auto cells = static_cast<double>(q1.size() - 1) / (nx_ - 1);
    refine_ = std::max(1, static_cast<int>(std::ceil(cells - 1e-9)));
    const int fine = (nx_ - 1) * refine_;
    q1_fine_.resize(static_cast<std::size_t>(fine + 1) * dim_);
    RowVector row(dim_);
    for (int k = 0; k <= fine; ++k) {
      detail::interpolate_row(q1.grid(), q1.values(), static_cast<double>(k) / fine, row);
      for (int c = 0; c < dim_; ++c) q1_fine_[static_cast<std::size_t>(k) * dim_ + c] = row[c];
    }
    q2_.resize(static_cast<std::size_t>(q2.size()) * dim_);
    for (Eigen::Index r = 0; r < q2.size(); ++r) {
      for (int c = 0; c < dim_; ++c) q2_[static_cast<std::size_t>(r) * dim_ + c] = q2.values()(r, c);
    }
  }

  /// Integral over [x_i, x_{i+di}] of |q1(t) - sqrt(s) q2(y_j + s (t - x_i))|^2,
  /// s the segment slope, by the trapezoidal rule on di * refine sub-intervals.
  [[nodiscard]] double operator()(int i, int j, int di, int dj) const {
    const int subs = di * refine_;
    const double xcell = 1.0 / (nx_ - 1);
    const double ycell = 1.0 / (ny_ - 1);
    const double h = di * xcell / subs;
    const double slope = (dj * ycell) / (di * xcell);
    const double root = std::sqrt(slope);
    const double y0 = j * ycell;
    const double dy = dj * ycell / subs;
    const bool uniform = grid_->is_uniform();
    const auto last = static_cast<double>(grid_->size() - 1);
    double total = 0.0;
    for (int k = 0; k <= subs; ++k) {
      const double y = std::min(y0 + k * dy, 1.0);
      Eigen::Index r;
      double w;
      if (uniform) {
        const double pos = y * last;
        r = std::min(static_cast<Eigen::Index>(pos), grid_->size() - 2);
        w = pos - static_cast<double>(r);
      } else {
        std::tie(r, w) = grid_->locate(y);
      }
      const double* a = &q1_fine_[static_cast<std::size_t>(i * refine_ + k) * dim_];
      const double* b0 = &q2_[static_cast<std::size_t>(r) * dim_];
      const double* b1 = b0 + dim_;
      double e = 0.0;
      for (int c = 0; c < dim_; ++c) {
        const double v = a[c] - root * ((1.0 - w) * b0[c] + w * b1[c]);
        e += v * v;
      }
      total += (k == 0 || k == subs) ? 0.5 * e : e;
    }
    return total * h;
  }

 private:
  int nx_;
  int ny_;
  int dim_;
  int refine_ = 1;
  const Grid* grid_;
  std::vector<double> q1_fine_;
  std::vector<double> q2_;
};

namespace detail {

/// Steps ordered so that slopes closer to 1 come first; with strict
/// improvement required, ties resolve toward the least warping.
inline std::vector<Step> tie_break_order(std::vector<Step> steps, double aspect) {
  std::stable_sort(steps.begin(), steps.end(), [aspect](const Step& a, const Step& b) {
    return std::abs(std::log(aspect * a.dj / a.di)) < std::abs(std::log(aspect * b.dj / b.di));
  });
  return steps;
}

inline WarpFunction path_to_warp(const DpPath& path, int segments) {
  const double xs = path.nx - 1;
  const double ys = path.ny - 1;
  std::vector<double> knots(static_cast<std::size_t>(segments) + 1);
  std::size_t s = 0;
  for (int k = 0; k <= segments; ++k) {
    const double x = static_cast<double>(k) / segments * xs;
    while (s + 2 < path.nodes.size() && path.nodes[s + 1].first <= x) ++s;
    const auto [i0, j0] = path.nodes[s];
    const auto [i1, j1] = path.nodes[s + 1];
    const double w = std::clamp((x - i0) / (i1 - i0), 0.0, 1.0);
    knots[static_cast<std::size_t>(k)] = (j0 + w * (j1 - j0)) / ys;
  }
  return WarpFunction::from_knots(std::move(knots));
}

/// First-pass path height (in coarse y cells) at every x node.
inline std::vector<double> path_heights(const DpPath& path) {
  std::vector<double> y(static_cast<std::size_t>(path.nx));
  for (std::size_t s = 0; s + 1 < path.nodes.size(); ++s) {
    const auto [i0, j0] = path.nodes[s];
    const auto [i1, j1] = path.nodes[s + 1];
    for (int i = i0; i <= i1; ++i) {
      y[static_cast<std::size_t>(i)] = j0 + static_cast<double>(j1 - j0) * (i - i0) / (i1 - i0);
    }
  }
  return y;
}

}  // namespace detail

/// Dynamic program over monotone paths on `lattice`. Costs accumulate along
/// the path from the origin, so the result equals the in-order sum of the
/// segment costs of the returned path.
template <typename Cost>
[[nodiscard]] DpPath solve_lattice(const Lattice& lattice, const Cost& seg) {
  const int nx = lattice.nx, ny = lattice.ny;
  const double aspect = static_cast<double>(nx - 1) / (ny - 1);
  const auto steps = detail::tie_break_order(lattice.steps, aspect);
  const auto lo = [&](int i) { return lattice.band.empty() ? 0 : lattice.band[static_cast<std::size_t>(i)].first; };
  const auto hi = [&](int i) { return lattice.band.empty() ? ny - 1 : lattice.band[static_cast<std::size_t>(i)].second; };
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto idx = [ny](int i, int j) { return static_cast<std::size_t>(i) * ny + j; };
  std::vector<double> cost(static_cast<std::size_t>(nx) * ny, inf);
  std::vector<int> from(static_cast<std::size_t>(nx) * ny, -1);
  cost[0] = 0.0;
  for (int i = 1; i < nx; ++i) {
    for (int j = std::max(1, lo(i)); j <= hi(i); ++j) {
      double best = inf;
      int arg = -1;
      for (std::size_t s = 0; s < steps.size(); ++s) {
        const int pi = i - steps[s].di, pj = j - steps[s].dj;
        if (pi < 0 || pj < lo(std::max(pi, 0)) || pj > hi(std::max(pi, 0))) continue;
        const double base = cost[idx(pi, pj)];
        if (base == inf) continue;
        const double c = base + seg(pi, pj, steps[s].di, steps[s].dj);
        if (c < best) {
          best = c;
          arg = static_cast<int>(s);
        }
      }
      cost[idx(i, j)] = best;
      from[idx(i, j)] = arg;
    }
  }
  if (cost[idx(nx - 1, ny - 1)] == inf) {
    throw Error(ErrorKind::numeric_failure, "dp_registration", "path_exists",
                "no monotone lattice path reaches the corner with this slope set");
  }
  DpPath path;
  path.nx = nx;
  path.ny = ny;
  path.cost = cost[idx(nx - 1, ny - 1)];
  for (int i = nx - 1, j = ny - 1; i != 0 || j != 0;) {
    path.nodes.emplace_back(i, j);
    const Step& s = steps[static_cast<std::size_t>(from[idx(i, j)])];
    i -= s.di;
    j -= s.dj;
  }
  path.nodes.emplace_back(0, 0);
  std::reverse(path.nodes.begin(), path.nodes.end());
  return path;
}

/// Sum of segment costs along an explicit path, in path order.
template <typename Cost>
[[nodiscard]] double path_cost(std::span<const std::pair<int, int>> nodes, const Cost& seg) {
  double c = 0.0;
  for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
    c += seg(nodes[s].first, nodes[s].second, nodes[s + 1].first - nodes[s].first,
             nodes[s + 1].second - nodes[s].second);
  }
  return c;
}

/// The banded refinement lattice around a first-pass path.
[[nodiscard]] inline Lattice refinement_lattice(const DpPath& coarse, const DpConfig& cfg) {
  const int r = cfg.refine;
  double smin = std::numeric_limits<double>::infinity(), smax = 0.0;
  for (const Step& s : cfg.slope_set) {
    smin = std::min(smin, static_cast<double>(s.dj) / s.di);
    smax = std::max(smax, static_cast<double>(s.dj) / s.di);
  }
  Lattice lat;
  lat.nx = coarse.nx;
  lat.ny = (coarse.ny - 1) * r + 1;
  for (int di = 1; di <= 2; ++di) {
    const int first = static_cast<int>(std::ceil(smin * r * di - 1e-9));
    const int last = static_cast<int>(std::floor(smax * r * di + 1e-9));
    for (int dj = std::max(first, 1); dj <= last; ++dj) {
      if (di == 2 && dj % 2 == 0) continue;  // same slope as a (1, dj/2) step
      lat.steps.push_back({di, dj});
    }
  }
  const auto heights = detail::path_heights(coarse);
  lat.band.resize(static_cast<std::size_t>(lat.nx));
  for (int i = 0; i < lat.nx; ++i) {
    const double c = heights[static_cast<std::size_t>(i)] * r;
    const int lo = std::max(0, static_cast<int>(std::floor(c - cfg.band * r)));
    const int hi = std::min(lat.ny - 1, static_cast<int>(std::ceil(c + cfg.band * r)));
    lat.band[static_cast<std::size_t>(i)] = {lo, hi};
  }
  return lat;
}

/// Lattice DP of q2 onto q1: the first pass on the square lattice with
/// cfg.slope_set, then (if cfg.refine > 1) the banded refinement pass.
[[nodiscard]] inline DpPath dp_path(const Srvf& q1, const Srvf& q2, const DpConfig& cfg = {}) {
  detail::validate_dp(q1, q2, cfg);
  const int n = detail::resolved_lattice(q1, cfg);
  const SegmentCost coarse_cost(q1, q2, n, n);
  DpPath path = solve_lattice(Lattice::square(n, cfg.slope_set), coarse_cost);
  if (cfg.refine == 1) return path;
  // Re-centre the band on the latest path until the path stops moving.
  Lattice fine = refinement_lattice(path, cfg);
  const SegmentCost fine_cost(q1, q2, fine.nx, fine.ny);
  path = solve_lattice(fine, fine_cost);
  for (int pass = 1; pass < cfg.refine_passes; ++pass) {
    const auto heights = detail::path_heights(path);
    bool moved = false;
    for (int i = 0; i < fine.nx; ++i) {
      const double c = heights[static_cast<std::size_t>(i)];
      const int lo = std::max(0, static_cast<int>(std::floor(c - cfg.band * cfg.refine)));
      const int hi = std::min(fine.ny - 1, static_cast<int>(std::ceil(c + cfg.band * cfg.refine)));
      moved = moved || lo != fine.band[static_cast<std::size_t>(i)].first ||
              hi != fine.band[static_cast<std::size_t>(i)].second;
      fine.band[static_cast<std::size_t>(i)] = {lo, hi};
    }
    if (!moved) break;
    DpPath next = solve_lattice(fine, fine_cost);
    if (next.nodes == path.nodes) break;
    path = std::move(next);
  }
  return path;
}

/// Warp g minimizing ||q1 - sqrt(g') q2(g)|| over lattice paths, projected to
/// cfg.knots segments; distance is measured with the projected warp.
[[nodiscard]] inline WarpMatch optimal_warp(const Srvf& q1, const Srvf& q2, const DpConfig& cfg = {}) {
  const DpPath path = dp_path(q1, q2, cfg);
  const int n = detail::resolved_lattice(q1, cfg);
  const int m = cfg.knots > 0 ? cfg.knots : n - 1;
  WarpFunction g = detail::path_to_warp(path, m);
  const double d = l2_distance(q1, warp_action(q2, g));
  return {std::move(g), d};
}

/// Best warp and (for m >= 2) rotation of q2 onto q1, alternating Procrustes
/// and DP until the distance stops improving.
[[nodiscard]] inline ElasticAlignment elastic_align(const Srvf& q1, const Srvf& q2,
                                                    const DpConfig& cfg = {}) {
  if (q1.dim() == 1 || !cfg.rotation_enabled) {
    WarpMatch w = optimal_warp(q1, q2, cfg);
    return {std::move(w.warp), Rotation::identity(q1.dim()), w.distance, true};
  }
  ElasticAlignment best{WarpFunction::identity(1), Rotation::identity(q1.dim()),
                        std::numeric_limits<double>::infinity(), false};
  Srvf warped = q2;
  double previous = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 20; ++round) {
    const Rotation r = rotation_align(q1, warped).rotation;
    WarpMatch w = optimal_warp(q1, rotate(q2, r), cfg);
    const double d = w.distance;
    if (d < best.distance) best = {w.warp, r, d, false};
    if (std::abs(previous - d) <= 1e-6 * std::max(d, 1e-12) || d == 0.0) {
      best.converged = true;
      break;
    }
    previous = d;
    warped = warp_action(q2, w.warp);
  }
  return best;
}

/// Elastic distance. Both alignment directions give admissible values of the
/// same infimum (the action is an isometry), so the smaller one is returned;
/// this also makes the discrete distance exactly symmetric.
[[nodiscard]] inline double elastic_distance(const Srvf& q1, const Srvf& q2,
                                             const DpConfig& cfg = {}) {
  const double forward = elastic_align(q1, q2, cfg).distance;
  if (forward == 0.0) return 0.0;
  return std::min(forward, elastic_align(q2, q1, cfg).distance);
}

/// Applies an alignment to q: rotate(warp_action(q, g), r).
[[nodiscard]] inline Srvf apply_alignment(const Srvf& q, const WarpFunction& g, const Rotation& r) {
  Srvf w = warp_action(q, g);
  return r.dim() == q.dim() && q.dim() >= 2 ? rotate(w, r) : w;
}

/// Karcher mean in the quotient space: alternate per-observation alignment
/// to the current mean and averaging of the aligned SRVFs.
[[nodiscard]] inline KarcherResult karcher_mean(std::span<const Srvf> qs, const DpConfig& cfg = {},
                                                int max_iter = 50, double rel_tol = 1e-6) {
  detail::require(!qs.empty(), "dp_registration", "nonempty",
                  "karcher_mean needs at least one SRVF");
  const std::size_t n = qs.size();
  bool all_unit = true;
  for (const auto& q : qs) {
    detail::require(q.grid() == qs[0].grid() && q.dim() == qs[0].dim(), "dp_registration",
                    "common_grid", "SRVFs must share grid and dimension");
    all_unit = all_unit && q.unit_norm();
  }
  const int lattice = detail::resolved_lattice(qs[0], cfg);
  const int segments = cfg.knots > 0 ? cfg.knots : lattice - 1;
  const int dim = qs[0].dim();

  // Medoid under the plain L2 distance.
  std::size_t medoid = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += l2_distance(qs[i], qs[j]);
    if (s < best_sum) {
      best_sum = s;
      medoid = i;
    }
  }

  KarcherResult result{qs[medoid], std::vector<WarpFunction>(n, WarpFunction::identity(segments)),
                       std::vector<Rotation>(n, Rotation::identity(dim)), {}, 0};
  std::vector<Srvf> aligned(qs.begin(), qs.end());
  std::vector<bool> have_previous(n, false);

  for (int it = 0; it < max_iter; ++it) {
    const Srvf& mu = result.mean;
    std::vector<double> d2(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      ElasticAlignment a = elastic_align(mu, qs[i], cfg);
      Srvf candidate = apply_alignment(qs[i], a.warp, a.rotation);
      double dist = l2_distance(mu, candidate);
      // Keep the previous alignment if it still fits the new mean better.
      if (have_previous[i]) {
        const double old = l2_distance(mu, aligned[i]);
        if (old <= dist) return void(d2[i] = old * old);
      }
      result.warps[i] = std::move(a.warp);
      result.rotations[i] = a.rotation;
      aligned[i] = std::move(candidate);
      d2[i] = dist * dist;
    });
    std::fill(have_previous.begin(), have_previous.end(), true);
    const double objective = std::accumulate(d2.begin(), d2.end(), 0.0);
    result.objective_trace.push_back(objective);
    result.iterations = it + 1;

    Matrix sum = Matrix::Zero(mu.size(), dim);
    for (const auto& a : aligned) sum += a.values();
    Srvf next(mu.grid(), sum / static_cast<double>(n));
    if (all_unit && l2_norm(next) > 0.0) next = normalized(next);
    result.mean = std::move(next);

    const std::size_t t = result.objective_trace.size();
    if (t >= 2) {
      const double prev = result.objective_trace[t - 2];
      if (prev - objective <= rel_tol * std::max(prev, 1e-300)) break;
    }
    if (objective == 0.0) break;
  }
  return result;
}

}  // namespace elastica
