// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <optional>

#include "elastica/error.hpp"
#include "elastica/srvf.hpp"

namespace elastica {

/// Wraps an angle into [0, 2 pi).
[[nodiscard]] inline double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(theta, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

/// Element of SO(m), acting on row vectors from the right (x -> x * matrix).
/// For m = 2 the angle is kept alongside; x * matrix rotates x
/// counter-clockwise by that angle.
class Rotation {
 public:
  Rotation() : matrix_(Matrix::Identity(2, 2)), angle_(0.0) {}

  [[nodiscard]] static Rotation identity(int m) {
    Rotation r;
    r.matrix_ = Matrix::Identity(m, m);
    r.angle_.reset();
    if (m == 2) r.angle_ = 0.0;
    return r;
  }

  [[nodiscard]] static Rotation from_angle(double theta) {
    Rotation r;
    r.angle_ = wrap_angle(theta);
    const double c = std::cos(*r.angle_);
    const double s = std::sin(*r.angle_);
    r.matrix_.resize(2, 2);
    r.matrix_ << c, s, -s, c;
    return r;
  }

  [[nodiscard]] static Rotation from_matrix(const Matrix& g) {
    detail::require(g.rows() == g.cols() && g.rows() >= 1, "core_geometry",
                    "rotation_shape", "rotation must be square");
    const Eigen::Index m = g.rows();
    detail::require((g.transpose() * g - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() <= 1e-12 &&
                        std::abs(g.determinant() - 1.0) <= 1e-12,
                    "core_geometry", "rotation_so_m",
                    "matrix is not a rotation (orthogonality or determinant)");
    Rotation r;
    r.matrix_ = g;
    if (m == 2) r.angle_ = wrap_angle(std::atan2(g(0, 1), g(0, 0)));
    return r;
  }

  [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(matrix_.rows()); }
  [[nodiscard]] std::optional<double> angle() const noexcept { return angle_; }

  [[nodiscard]] Rotation inverse() const {
    Rotation r;
    r.matrix_ = matrix_.transpose();
    if (angle_) r.angle_ = wrap_angle(-*angle_);
    return r;
  }

 private:
  Matrix matrix_;
  std::optional<double> angle_;
};

[[nodiscard]] inline Srvf rotate(const Srvf& q, const Rotation& r) {
  detail::require(q.dim() == r.dim(), "core_geometry", "dimension",
                  "rotation dimension must match the SRVF");
  return {q.grid(), q.values() * r.matrix(), q.unit_norm()};
}

struct RotationFit {
  Rotation rotation;
  bool degenerate = false;  // cross-covariance vanished; identity returned
};

namespace detail {

/// argmin over SO(m) of ||a - b G||_F^2 given the cross-covariance b^T a.
inline RotationFit procrustes_rotation(const Matrix& cross) {
  const Eigen::Index m = cross.rows();
  if (cross.cwiseAbs().maxCoeff() <= 1e-300) {
    return {Rotation::identity(static_cast<int>(m)), true};
  }
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix d = Matrix::Identity(m, m);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(m - 1, m - 1) = -1.0;
  Matrix g = svd.matrixU() * d * svd.matrixV().transpose();
  // Re-orthonormalize to machine precision.
  Eigen::JacobiSVD<Matrix> clean(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  g = clean.matrixU() * clean.matrixV().transpose();
  return {Rotation::from_matrix(g), false};
}

}  // namespace detail

/// Rotation G minimizing ||q1 - q2 G||_2 (orthogonal Procrustes with
/// determinant correction).
[[nodiscard]] inline RotationFit rotation_align(const Srvf& q1, const Srvf& q2) {
  detail::require(q1.grid() == q2.grid() && q1.dim() == q2.dim(), "core_geometry",
                  "common_grid", "SRVFs must share grid and dimension");
  const Eigen::VectorXd w = q1.grid().weights();
  const Matrix cross = q2.values().transpose() * w.asDiagonal() * q1.values();
  return detail::procrustes_rotation(cross);
}

}  // namespace elastica
