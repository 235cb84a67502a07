// Apache License, Version 2.0, refer to LICENSE.txt
//
// Sampled functions on [0,1], their square-root velocity representation,
// and the L2 geometry used by every other module.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "elastica/error.hpp"

namespace elastica {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Strictly increasing sample positions covering [0,1] with exact endpoints.
class Grid {
 public:
  Grid() = default;

  explicit Grid(std::vector<double> t) : t_(std::move(t)) {
    detail::require(t_.size() >= 2, "core_geometry", "grid_length",
                    "grid needs at least two points");
    detail::require(std::abs(t_.front()) <= 1e-12 &&
                        std::abs(t_.back() - 1.0) <= 1e-12,
                    "core_geometry", "grid_endpoints",
                    "grid must start at 0 and end at 1");
    t_.front() = 0.0;
    t_.back() = 1.0;
    for (std::size_t i = 1; i < t_.size(); ++i) {
      detail::require(std::isfinite(t_[i]) && t_[i] > t_[i - 1],
                      "core_geometry", "grid_increasing",
                      "grid must be strictly increasing (index " +
                          std::to_string(i) + ")");
    }
    const double n = static_cast<double>(t_.size() - 1);
    uniform_ = true;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (std::abs(t_[i] - static_cast<double>(i) / n) > 1e-12) {
        uniform_ = false;
        break;
      }
    }
  }

  /// `points` equally spaced samples including both endpoints.
  [[nodiscard]] static Grid uniform(Eigen::Index points) {
    detail::require(points >= 2, "core_geometry", "grid_length",
                    "grid needs at least two points");
    std::vector<double> t(static_cast<std::size_t>(points));
    const double n = static_cast<double>(points - 1);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / n;
    return Grid(std::move(t));
  }

  [[nodiscard]] Eigen::Index size() const noexcept {
    return static_cast<Eigen::Index>(t_.size());
  }
  [[nodiscard]] double operator[](Eigen::Index i) const {
    return t_[static_cast<std::size_t>(i)];
  }
  [[nodiscard]] const std::vector<double>& points() const noexcept { return t_; }
  [[nodiscard]] bool is_uniform() const noexcept { return uniform_; }

  /// Segment index i and fraction w with t = (1-w) t_i + w t_{i+1}.
  [[nodiscard]] std::pair<Eigen::Index, double> locate(double t) const {
    const Eigen::Index last = size() - 1;
    if (t <= 0.0) return {0, 0.0};
    if (t >= 1.0) return {last - 1, 1.0};
    Eigen::Index i;
    if (uniform_) {
      i = std::min<Eigen::Index>(static_cast<Eigen::Index>(t * last), last - 1);
    } else {
      auto it = std::upper_bound(t_.begin(), t_.end(), t);
      i = std::clamp<Eigen::Index>(
          static_cast<Eigen::Index>(it - t_.begin()) - 1, 0, last - 1);
    }
    const double lo = t_[static_cast<std::size_t>(i)];
    const double hi = t_[static_cast<std::size_t>(i + 1)];
    return {i, std::clamp((t - lo) / (hi - lo), 0.0, 1.0)};
  }

  /// Trapezoidal quadrature weights.
  [[nodiscard]] Eigen::VectorXd weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(size());
    for (Eigen::Index i = 0; i + 1 < size(); ++i) {
      const double h = (*this)[i + 1] - (*this)[i];
      w[i] += 0.5 * h;
      w[i + 1] += 0.5 * h;
    }
    return w;
  }

  friend bool operator==(const Grid& a, const Grid& b) { return a.t_ == b.t_; }

 private:
  std::vector<double> t_;
  bool uniform_ = true;
};

namespace detail {

inline void require_finite(const Matrix& values, const char* module) {
  require(values.allFinite(), module, "finite_values",
          "sample values must be finite");
}

/// Linear interpolation of row-wise samples at position t, written into `out`.
template <typename Out>
void interpolate_row(const Grid& grid, const Matrix& values, double t, Out&& out) {
  const auto [i, w] = grid.locate(t);
  out = (1.0 - w) * values.row(i) + w * values.row(i + 1);
}

}  // namespace detail

/// A function or curve f : [0,1] -> R^m observed on a grid; one row per sample.
class SampledFunction {
 public:
  SampledFunction(Grid grid, Matrix values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    detail::require(values_.rows() == grid_.size(), "core_geometry",
                    "values_length", "values length must equal grid length");
    detail::require(values_.cols() >= 1, "core_geometry", "dimension",
                    "dimension must be at least 1");
    detail::require_finite(values_, "core_geometry");
  }

  [[nodiscard]] static SampledFunction uniform(Matrix values) {
    Grid g = Grid::uniform(values.rows());
    return {std::move(g), std::move(values)};
  }

  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] const Matrix& values() const noexcept { return values_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(values_.cols()); }
  [[nodiscard]] Eigen::Index size() const noexcept { return values_.rows(); }

  [[nodiscard]] RowVector operator()(double t) const {
    RowVector r(values_.cols());
    detail::interpolate_row(grid_, values_, t, r);
    return r;
  }

 private:
  Grid grid_;
  Matrix values_;
};

/// Discretized square-root velocity function q = f' / sqrt(|f'|).
class Srvf {
 public:
  Srvf(Grid grid, Matrix values, bool unit_norm = false)
      : grid_(std::move(grid)), values_(std::move(values)), unit_norm_(unit_norm) {
    detail::require(values_.rows() == grid_.size(), "core_geometry",
                    "values_length", "values length must equal grid length");
    detail::require(values_.cols() >= 1, "core_geometry", "dimension",
                    "dimension must be at least 1");
    detail::require_finite(values_, "core_geometry");
    if (unit_norm_) {
      const double n = std::sqrt(squared_norm());
      detail::require(std::abs(n - 1.0) <= 1e-8, "core_geometry", "unit_norm",
                      "unit-norm SRVF has norm " + std::to_string(n));
    }
  }

  [[nodiscard]] static Srvf uniform(Matrix values, bool unit_norm = false) {
    Grid g = Grid::uniform(values.rows());
    return {std::move(g), std::move(values), unit_norm};
  }

  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] const Matrix& values() const noexcept { return values_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(values_.cols()); }
  [[nodiscard]] Eigen::Index size() const noexcept { return values_.rows(); }
  [[nodiscard]] bool unit_norm() const noexcept { return unit_norm_; }

  [[nodiscard]] RowVector operator()(double t) const {
    RowVector r(values_.cols());
    detail::interpolate_row(grid_, values_, t, r);
    return r;
  }

  /// Trapezoidal integral of |q(t)|^2.
  [[nodiscard]] double squared_norm() const {
    return grid_.weights().dot(values_.rowwise().squaredNorm());
  }

 private:
  Grid grid_;
  Matrix values_;
  bool unit_norm_ = false;
};

[[nodiscard]] inline double l2_norm(const Srvf& q) { return std::sqrt(q.squared_norm()); }

[[nodiscard]] inline double l2_inner(const Srvf& a, const Srvf& b) {
  detail::require(a.grid() == b.grid() && a.dim() == b.dim(), "core_geometry",
                  "common_grid", "SRVFs must share grid and dimension");
  return a.grid().weights().dot((a.values().cwiseProduct(b.values())).rowwise().sum());
}

/// ||q1 - q2||_2 by trapezoidal quadrature of the squared pointwise norm.
[[nodiscard]] inline double l2_distance(const Srvf& q1, const Srvf& q2) {
  detail::require(q1.grid() == q2.grid() && q1.dim() == q2.dim(),
                  "core_geometry", "common_grid",
                  "SRVFs must share grid and dimension");
  const Eigen::VectorXd d2 = (q1.values() - q2.values()).rowwise().squaredNorm();
  return std::sqrt(std::max(0.0, q1.grid().weights().dot(d2)));
}

/// Rescales q to unit L2 norm and marks it as such.
[[nodiscard]] inline Srvf normalized(const Srvf& q) {
  const double n = l2_norm(q);
  if (!(n > 0.0)) {
    throw Error(ErrorKind::numeric_failure, "core_geometry", "unit_norm",
                "cannot normalize a zero SRVF");
  }
  return {q.grid(), q.values() / n, true};
}

/// Central differences in the interior, second-order one-sided stencils at
/// the endpoints. Written in terms of divided differences so that constant
/// pieces give an exactly zero derivative. Needs at least three samples.
[[nodiscard]] inline Matrix finite_difference(const Grid& grid, const Matrix& f) {
  const Eigen::Index n = grid.size();
  Matrix d(n, f.cols());
  auto divided = [&](Eigen::Index i) {  // slope on [t_i, t_{i+1}]
    return RowVector((f.row(i + 1) - f.row(i)) / (grid[i + 1] - grid[i]));
  };
  {
    const double h1 = grid[1] - grid[0];
    const double h2 = grid[2] - grid[1];
    const RowVector d1 = divided(0), d2 = divided(1);
    d.row(0) = d1 - (h1 / (h1 + h2)) * (d2 - d1);
  }
  {
    const double h1 = grid[n - 1] - grid[n - 2];
    const double h2 = grid[n - 2] - grid[n - 3];
    const RowVector d1 = divided(n - 2), d2 = divided(n - 3);
    d.row(n - 1) = d1 + (h1 / (h1 + h2)) * (d1 - d2);
  }
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double hl = grid[i] - grid[i - 1];
    const double hr = grid[i + 1] - grid[i];
    d.row(i) = (hr * divided(i - 1) + hl * divided(i)) / (hl + hr);
  }
  return d;
}

/// q(t) = f'(t) / sqrt(|f'(t)|), with q = 0 where the derivative estimate is 0.
[[nodiscard]] inline Srvf srvf_transform(const SampledFunction& f) {
  detail::require(f.size() >= 3, "core_geometry", "grid_length",
                  "srvf_transform needs at least 3 samples");
  const Matrix d = finite_difference(f.grid(), f.values());
  Matrix q(d.rows(), d.cols());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double speed = d.row(i).norm();
    if (speed == 0.0) {
      q.row(i).setZero();
    } else {
      q.row(i) = d.row(i) / std::sqrt(speed);
    }
  }
  return {f.grid(), std::move(q)};
}

/// f(t) = start + integral_0^t q |q| ds by the trapezoidal rule.
[[nodiscard]] inline SampledFunction srvf_inverse(const Srvf& q, const RowVector& start) {
  detail::require(start.size() == q.dim(), "core_geometry", "dimension",
                  "start point dimension must match the SRVF");
  const Grid& g = q.grid();
  Matrix velocity(q.size(), q.dim());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    velocity.row(i) = q.values().row(i) * q.values().row(i).norm();
  }
  Matrix f(q.size(), q.dim());
  f.row(0) = start;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    f.row(i) = f.row(i - 1) +
               0.5 * (g[i] - g[i - 1]) * (velocity.row(i - 1) + velocity.row(i));
  }
  return {g, std::move(f)};
}

/// Samples a callable t -> R^m (returning double or a row vector) on `grid`.
template <typename F>
[[nodiscard]] Matrix sample_on(const Grid& grid, F&& fn) {
  using R = decltype(fn(0.0));
  if constexpr (std::is_arithmetic_v<R>) {
    Matrix v(grid.size(), 1);
    for (Eigen::Index i = 0; i < grid.size(); ++i) v(i, 0) = fn(grid[i]);
    return v;
  } else {
    const RowVector first = fn(grid[0]);
    Matrix v(grid.size(), first.size());
    v.row(0) = first;
    for (Eigen::Index i = 1; i < grid.size(); ++i) v.row(i) = fn(grid[i]);
    return v;
  }
}

}  // namespace elastica
