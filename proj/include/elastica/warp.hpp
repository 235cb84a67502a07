// Apache License, Version 2.0, refer to LICENSE.txt
//
// Piecewise-linear warping functions of [0,1] and their action on SRVFs.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "elastica/error.hpp"
#include "elastica/srvf.hpp"

namespace elastica {

/// Increasing bijection of [0,1], linear between the knots gamma(i/M).
class WarpFunction {
 public:
  WarpFunction() : WarpFunction(identity(1)) {}

  [[nodiscard]] static WarpFunction identity(int segments) {
    detail::require(segments >= 1, "core_geometry", "warp_segments",
                    "a warp needs at least one segment");
    std::vector<double> k(static_cast<std::size_t>(segments) + 1);
    for (std::size_t i = 0; i < k.size(); ++i) {
      k[i] = static_cast<double>(i) / segments;
    }
    return WarpFunction(std::move(k), Unchecked{});
  }

  [[nodiscard]] static WarpFunction from_knots(std::vector<double> knots) {
    detail::require(knots.size() >= 2, "core_geometry", "warp_segments",
                    "a warp needs at least two knots");
    detail::require(std::abs(knots.front()) <= 1e-12 &&
                        std::abs(knots.back() - 1.0) <= 1e-12,
                    "core_geometry", "warp_endpoints",
                    "warp knots must start at 0 and end at 1");
    knots.front() = 0.0;
    knots.back() = 1.0;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (!(knots[i] > knots[i - 1]) || !std::isfinite(knots[i])) {
        throw Error(ErrorKind::invalid_input, "core_geometry", "warp_increments",
                    "warp increment " + std::to_string(i) + " is not positive");
      }
    }
    return WarpFunction(std::move(knots), Unchecked{});
  }

  /// Builds the warp from simplex increments p_1..p_M.
  [[nodiscard]] static WarpFunction from_increments(std::span<const double> p) {
    double total = 0.0;
    for (double v : p) {
      if (!(v > 0.0)) {
        throw Error(ErrorKind::invalid_input, "core_geometry", "warp_increments",
                    "warp increments must be strictly positive");
      }
      total += v;
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "core_geometry",
                    "warp_simplex", "warp increments must sum to 1");
    std::vector<double> k(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) k[i + 1] = k[i] + p[i];
    k.back() = 1.0;
    return from_knots(std::move(k));
  }

  [[nodiscard]] int segments() const noexcept {
    return static_cast<int>(knots_.size()) - 1;
  }
  [[nodiscard]] const std::vector<double>& knots() const noexcept { return knots_; }
  [[nodiscard]] double knot(int i) const { return knots_[static_cast<std::size_t>(i)]; }

  [[nodiscard]] std::vector<double> increments() const {
    std::vector<double> p(knots_.size() - 1);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = knots_[i + 1] - knots_[i];
    return p;
  }

  [[nodiscard]] bool is_identity() const noexcept {
    const int m = segments();
    for (int i = 0; i <= m; ++i) {
      if (knots_[static_cast<std::size_t>(i)] != static_cast<double>(i) / m) return false;
    }
    return true;
  }

  [[nodiscard]] double operator()(double t) const { return evaluate(knots_, t); }

  /// Derivative M p_s on segment s. At a knot the two one-sided slopes are
  /// averaged, which keeps trapezoidal norms of warped SRVFs consistent.
  [[nodiscard]] double derivative(double t) const { return slope_at(knots_, t); }

  /// Piecewise-linear interpolation of a raw knot vector (uniform knots).
  [[nodiscard]] static double evaluate(std::span<const double> knots, double t) {
    const int m = static_cast<int>(knots.size()) - 1;
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double x = t * m;
    const int s = std::min(static_cast<int>(x), m - 1);
    const double w = x - s;
    const auto i = static_cast<std::size_t>(s);
    return knots[i] + w * (knots[i + 1] - knots[i]);
  }

  [[nodiscard]] static double slope_at(std::span<const double> knots, double t) {
    const int m = static_cast<int>(knots.size()) - 1;
    const double x = std::clamp(t, 0.0, 1.0) * m;
    const double r = std::round(x);
    auto slope = [&](int s) {
      return m * (knots[static_cast<std::size_t>(s) + 1] - knots[static_cast<std::size_t>(s)]);
    };
    if (std::abs(x - r) <= 1e-9) {
      const int k = static_cast<int>(r);
      if (k == 0) return slope(0);
      if (k == m) return slope(m - 1);
      return 0.5 * (slope(k - 1) + slope(k));
    }
    return slope(std::min(static_cast<int>(x), m - 1));
  }

  /// gamma^{-1}(y) by inverting the piecewise-linear map.
  [[nodiscard]] double inverse_at(double y) const {
    const int m = segments();
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) return 1.0;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), y);
    const int s = std::clamp(static_cast<int>(it - knots_.begin()) - 1, 0, m - 1);
    const double lo = knots_[static_cast<std::size_t>(s)];
    const double hi = knots_[static_cast<std::size_t>(s) + 1];
    return (s + (y - lo) / (hi - lo)) / m;
  }

 private:
  struct Unchecked {};
  WarpFunction(std::vector<double> k, Unchecked) : knots_(std::move(k)) {}

  std::vector<double> knots_;
};

/// Sup-norm distance between knot vectors of two warps with equal M.
[[nodiscard]] inline double knot_sup_distance(const WarpFunction& a, const WarpFunction& b) {
  detail::require(a.segments() == b.segments(), "core_geometry", "warp_segments",
                  "warps must have the same number of segments");
  double d = 0.0;
  for (int i = 0; i <= a.segments(); ++i) d = std::max(d, std::abs(a.knot(i) - b.knot(i)));
  return d;
}

/// (g1 o g2) sampled at the knots of g2.
[[nodiscard]] inline WarpFunction warp_compose(const WarpFunction& g1, const WarpFunction& g2) {
  std::vector<double> k(g2.knots().size());
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = g1(g2.knots()[i]);
  return WarpFunction::from_knots(std::move(k));
}

/// g^{-1} sampled at the knots i/M of g.
[[nodiscard]] inline WarpFunction warp_inverse(const WarpFunction& g) {
  const int m = g.segments();
  std::vector<double> k(static_cast<std::size_t>(m) + 1);
  for (int i = 0; i <= m; ++i) k[static_cast<std::size_t>(i)] = g.inverse_at(static_cast<double>(i) / m);
  return WarpFunction::from_knots(std::move(k));
}

/// Re-samples a warp onto M uniform knots.
[[nodiscard]] inline WarpFunction resample_warp(const WarpFunction& g, int segments) {
  std::vector<double> k(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) k[static_cast<std::size_t>(i)] = g(static_cast<double>(i) / segments);
  return WarpFunction::from_knots(std::move(k));
}

/// Samples of sqrt(gamma'(t)) q(gamma(t)) on q's grid, without any
/// renormalization.
[[nodiscard]] inline Matrix warped_values(const Srvf& q, const WarpFunction& g) {
  if (g.is_identity()) return q.values();
  const Grid& grid = q.grid();
  Matrix out(q.size(), q.dim());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    detail::interpolate_row(grid, q.values(), g(t), out.row(i));
    out.row(i) *= std::sqrt(g.derivative(t));
  }
  return out;
}

/// q*(t) = sqrt(gamma'(t)) q(gamma(t)) on q's grid.
[[nodiscard]] inline Srvf warp_action(const Srvf& q, const WarpFunction& g) {
  if (g.is_identity()) return q;
  const Grid& grid = q.grid();
  Matrix out = warped_values(q, g);
  if (q.unit_norm()) {
    // The action is an isometry; only discretization error is removed here.
    Srvf raw(grid, std::move(out));
    return normalized(raw);
  }
  return {grid, std::move(out)};
}

/// Karcher mean on the sphere of square-root slopes: each warp maps to the
/// unit vector sqrt(p) in R^M, which is averaged intrinsically.
[[nodiscard]] inline WarpFunction karcher_mean_of_warps(std::span<const WarpFunction> gs,
                                                        double tol = 1e-13,
                                                        int max_iter = 500) {
  detail::require(!gs.empty(), "core_geometry", "nonempty",
                  "karcher_mean_of_warps needs at least one warp");
  const int m = gs.front().segments();
  std::vector<Eigen::VectorXd> v;
  v.reserve(gs.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
  for (const auto& g : gs) {
    detail::require(g.segments() == m, "core_geometry", "warp_segments",
                    "all warps must have the same number of segments");
    Eigen::VectorXd s(m);
    const auto p = g.increments();
    for (int i = 0; i < m; ++i) s[i] = std::sqrt(p[static_cast<std::size_t>(i)]);
    mu += s;
    v.push_back(std::move(s));
  }
  mu.normalize();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd tangent = Eigen::VectorXd::Zero(m);
    for (const auto& s : v) {
      const double c = std::clamp(mu.dot(s), -1.0, 1.0);
      const double theta = std::acos(c);
      if (theta > 1e-15) tangent += (theta / std::sin(theta)) * (s - c * mu);
    }
    tangent /= static_cast<double>(v.size());
    const double len = tangent.norm();
    if (len < tol) break;
    mu = std::cos(len) * mu + (std::sin(len) / len) * tangent;
    mu.normalize();
  }
  std::vector<double> p(static_cast<std::size_t>(m));
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    p[static_cast<std::size_t>(i)] = mu[i] * mu[i];
    total += p[static_cast<std::size_t>(i)];
  }
  std::vector<double> k(static_cast<std::size_t>(m) + 1, 0.0);
  for (int i = 0; i < m; ++i) {
    k[static_cast<std::size_t>(i) + 1] = k[static_cast<std::size_t>(i)] + p[static_cast<std::size_t>(i)] / total;
  }
  k.back() = 1.0;
  return WarpFunction::from_knots(std::move(k));
}

}  // namespace elastica
