// Apache License, Version 2.0, refer to LICENSE.txt
//
// Landmark pre-shapes, Procrustes distances and means, and nearest-mean
// classification by Procrustes or elastic distance.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "elastica/bayes.hpp"
#include "elastica/dp.hpp"
#include "elastica/error.hpp"
#include "elastica/parallel.hpp"
#include "elastica/random.hpp"
#include "elastica/rotation.hpp"
#include "elastica/srvf.hpp"

namespace elastica {

/// (k-1) x k Helmert sub-matrix: row j (1-based) holds j entries
/// -1/sqrt(j(j+1)), then j/sqrt(j(j+1)), then zeros.
[[nodiscard]] inline Matrix helmert_submatrix(int k) {
  detail::require(k >= 2, "procrustes", "helmert_size", "k must be at least 2");
  Matrix h = Matrix::Zero(k - 1, k);
  for (int j = 1; j < k; ++j) {
    const double c = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
    for (int i = 0; i < j; ++i) h(j - 1, i) = -c;
    h(j - 1, j) = j * c;
  }
  return h;
}

/// Helmertized, unit-Frobenius-norm landmark coordinates.
class PreShape {
 public:
  [[nodiscard]] const Matrix& coords() const noexcept { return z_; }
  [[nodiscard]] Eigen::Index landmarks() const noexcept { return z_.rows() + 1; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(z_.cols()); }

  /// Wraps a matrix that already has unit norm (renormalizing rounding).
  [[nodiscard]] static PreShape from_unit(Matrix z) {
    const double n = z.norm();
    detail::require(std::abs(n - 1.0) < 1e-8, "procrustes", "unit_norm",
                    "pre-shape coordinates must have unit norm");
    PreShape p;
    p.z_ = std::move(z) / n;
    return p;
  }

 private:
  Matrix z_;
};

/// Z = H X / ||H X|| for a k x m landmark matrix X with k > m.
[[nodiscard]] inline PreShape preshape(const Matrix& x) {
  detail::require(x.rows() > x.cols() && x.cols() >= 1, "procrustes", "landmark_shape",
                  "a configuration needs more landmarks than dimensions");
  detail::require(x.allFinite(), "procrustes", "finite", "landmark coordinates must be finite");
  const Matrix hx = helmert_submatrix(static_cast<int>(x.rows())) * x;
  const double size = hx.norm();
  detail::require(size > 1e-300, "procrustes", "nonzero_size",
                  "configuration has zero size after removing translation");
  return PreShape::from_unit(hx / size);
}

namespace detail {

inline void require_same_shape_space(const PreShape& a, const PreShape& b) {
  require(a.coords().rows() == b.coords().rows() && a.dim() == b.dim(), "procrustes",
          "dimension_match", "pre-shapes must have the same number of landmarks and dimension");
}

}  // namespace detail

/// Rotation G in SO(m) minimizing ||z1 - z2 G|| and the attained inner
/// product <z1, z2 G> (the determinant-corrected sum of singular values).
struct ProcrustesFit {
  Rotation rotation;
  double inner = 0.0;
};

[[nodiscard]] inline ProcrustesFit procrustes_fit(const PreShape& z1, const PreShape& z2) {
  detail::require_same_shape_space(z1, z2);
  const Matrix cross = z2.coords().transpose() * z1.coords();
  const RotationFit r = detail::procrustes_rotation(cross);
  const double inner = (z2.coords() * r.rotation.matrix()).cwiseProduct(z1.coords()).sum();
  return {r.rotation, std::clamp(inner, -1.0, 1.0)};
}

enum class ProcrustesKind {
  full,     // min over rotation and scale: sqrt(1 - s^2)
  partial,  // min over rotation only: sqrt(2 - 2 s)
};

/// Procrustes distance between pre-shapes: full = min over rotation G and
/// scale b of ||z1 - b z2 G|| = sqrt(1 - s^2), partial = min over G of
/// ||z1 - z2 G|| = sqrt(2 - 2 s), s the optimal inner product. Both are
/// evaluated as residual norms, which stay accurate near zero, and with the
/// arguments in a fixed order so the value is exactly symmetric.
[[nodiscard]] inline double procrustes_distance(const PreShape& z1, const PreShape& z2,
                                                ProcrustesKind kind = ProcrustesKind::full) {
  detail::require_same_shape_space(z1, z2);
  const Matrix& a = z1.coords();
  const Matrix& b = z2.coords();
  const bool swap = std::lexicographical_compare(b.data(), b.data() + b.size(), a.data(), a.data() + a.size());
  const PreShape& u = swap ? z2 : z1;
  const PreShape& v = swap ? z1 : z2;
  const ProcrustesFit f = procrustes_fit(u, v);
  const Matrix rotated = v.coords() * f.rotation.matrix();
  if (kind == ProcrustesKind::full) return (u.coords() - f.inner * rotated).norm();
  return (u.coords() - rotated).norm();
}

struct GpaResult {
  PreShape mean;
  std::vector<PreShape> aligned;        // each input rotated onto the mean
  std::vector<double> objective_trace;  // sum of squared full distances
  int iterations = 0;
};

/// Generalized Procrustes mean: alternately rotate every pre-shape onto the
/// mean and replace the mean by the unit vector maximizing the summed
/// squared inner products with the rotated pre-shapes (the top eigenvector
/// of their second-moment matrix). For m = 2 both steps lower the summed
/// squared full Procrustes distance; a step that would raise it ends the
/// iteration, so the recorded objective is non-increasing.
[[nodiscard]] inline GpaResult gpa_mean(std::span<const Matrix> configs, int max_iter = 100,
                                        double rel_tol = 1e-8, int workers = 1) {
  detail::require(!configs.empty(), "procrustes", "nonempty", "gpa_mean needs at least one configuration");
  std::vector<PreShape> z;
  z.reserve(configs.size());
  for (const auto& x : configs) z.push_back(preshape(x));
  for (const auto& p : z) detail::require_same_shape_space(z[0], p);
  const std::size_t n = z.size();

  GpaResult r{z[0], z, {}, 0};
  std::vector<double> inner(n, 0.0);
  auto align_all = [&] {
    parallel_for(n, workers, [&](std::size_t i) {
      const ProcrustesFit f = procrustes_fit(r.mean, z[i]);
      r.aligned[i] = PreShape::from_unit(z[i].coords() * f.rotation.matrix());
      inner[i] = f.inner;
    });
    // Squared full distances as residual norms (1 - s^2 loses accuracy near 0).
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      obj += (r.mean.coords() - inner[i] * r.aligned[i].coords()).squaredNorm();
    }
    return obj;
  };

  double obj = align_all();
  r.objective_trace.push_back(obj);
  const Eigen::Index rows = z[0].coords().rows(), cols = z[0].dim();
  for (int it = 0; it < max_iter; ++it) {
    // Top eigenvector of Y Y^T through the n x n Gram matrix Y^T Y.
    Matrix y(rows * cols, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      y.col(static_cast<Eigen::Index>(i)) = r.aligned[i].coords().reshaped();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(y.transpose() * y);
    Eigen::VectorXd v = y * eig.eigenvectors().col(eig.eigenvectors().cols() - 1);
    if (!v.allFinite() || v.norm() <= 1e-300) break;
    // The sign is free; pick the one positively correlated with the sample.
    if ((y.transpose() * v).sum() < 0.0) v = -v;
    const PreShape candidate = PreShape::from_unit(v.normalized().reshaped(rows, cols));
    const PreShape previous = r.mean;
    const std::vector<PreShape> previous_aligned = r.aligned;
    r.mean = candidate;
    const double next = align_all();
    ++r.iterations;
    if (next > obj) {
      // In odd dimensions -I is not a rotation and the eigen step may not
      // help; keep the previous state.
      r.mean = previous;
      r.aligned = previous_aligned;
      break;
    }
    r.objective_trace.push_back(next);
    const double change = (obj - next) / std::max(obj, 1e-300);
    obj = next;
    if (change < rel_tol) break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Nearest-mean classification.

enum class ShapeMetric { procrustes, elastic };

/// A training mean or test object: a pre-shape for the Procrustes metric,
/// an SRVF for the elastic metric.
using ShapeObject = std::variant<PreShape, Srvf>;

/// Distance used by the classifiers; the elastic metric includes rotation
/// for curves in the plane.
[[nodiscard]] inline double shape_distance(const ShapeObject& a, const ShapeObject& b,
                                           ShapeMetric metric, const DpConfig& dp = {}) {
  if (metric == ShapeMetric::procrustes) {
    const auto* za = std::get_if<PreShape>(&a);
    const auto* zb = std::get_if<PreShape>(&b);
    detail::require(za && zb, "procrustes", "metric_mismatch",
                    "the Procrustes metric needs pre-shapes");
    return procrustes_distance(*za, *zb);
  }
  const auto* qa = std::get_if<Srvf>(&a);
  const auto* qb = std::get_if<Srvf>(&b);
  detail::require(qa && qb, "procrustes", "metric_mismatch", "the elastic metric needs SRVFs");
  return elastic_distance(*qa, *qb, dp);
}

/// Index of the closest mean; ties go to the lowest index.
[[nodiscard]] inline std::size_t classify_nearest_mean(const ShapeObject& test,
                                                       std::span<const ShapeObject> means,
                                                       ShapeMetric metric, const DpConfig& dp = {}) {
  detail::require(!means.empty(), "procrustes", "nonempty", "at least one group mean is required");
  std::size_t best = 0;
  double best_d = shape_distance(test, means[0], metric, dp);
  for (std::size_t g = 1; g < means.size(); ++g) {
    const double d = shape_distance(test, means[g], metric, dp);
    if (d < best_d) {
      best_d = d;
      best = g;
    }
  }
  return best;
}

/// Landmark configurations with integer group labels 0..G-1.
struct LandmarkDataset {
  std::vector<Matrix> configs;
  std::vector<int> labels;
  std::vector<std::string> group_names;

  [[nodiscard]] int groups() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }
  void validate() const {
    detail::require(!configs.empty() && configs.size() == labels.size(), "procrustes", "dataset",
                    "every configuration needs exactly one label");
    for (int l : labels) detail::require(l >= 0, "procrustes", "dataset", "labels must be non-negative");
    for (const auto& x : configs) {
      detail::require(x.rows() == configs[0].rows() && x.cols() == configs[0].cols(), "procrustes",
                      "dimension_match", "all configurations must have the same size");
    }
  }
};

/// Unit-norm SRVF of the landmark sequence read as a curve on uniform time.
[[nodiscard]] inline Srvf landmark_srvf(const Matrix& x) {
  return normalized(srvf_transform(SampledFunction::uniform(x)));
}

/// How the elastic metric's group means are estimated.
enum class ElasticMean {
  bayesian,  // posterior mean of the ambient multiple-registration model
  karcher,   // quotient-space Karcher mean
};

struct ClassifierConfig {
  ShapeMetric metric = ShapeMetric::procrustes;
  ElasticMean elastic_mean = ElasticMean::bayesian;
  ModelConfig model;  // used by the Bayesian mean
  DpConfig dp;        // used by elastic distances and the Karcher mean
  int workers = 1;

  ClassifierConfig() {
    model.n_iter = 4000;
    model.burn_in = 2000;
    model.M = 10;
  }
};

/// Group means for one metric. Method A: Procrustes mean of pre-shapes.
/// Method B: elastic mean of the curves' SRVFs.
[[nodiscard]] inline std::vector<ShapeObject> train_means(const LandmarkDataset& train,
                                                          const ClassifierConfig& cfg) {
  train.validate();
  const int g = train.groups();
  std::vector<ShapeObject> means(static_cast<std::size_t>(g), PreShape{});
  parallel_for(static_cast<std::size_t>(g), cfg.workers, [&](std::size_t grp) {
    std::vector<Matrix> members;
    for (std::size_t i = 0; i < train.configs.size(); ++i) {
      if (train.labels[i] == static_cast<int>(grp)) members.push_back(train.configs[i]);
    }
    detail::require(!members.empty(), "procrustes", "group_nonempty",
                    "every group needs at least one training configuration");
    if (cfg.metric == ShapeMetric::procrustes) {
      means[grp] = gpa_mean(members).mean;
      return;
    }
    std::vector<Srvf> qs;
    for (const auto& x : members) qs.push_back(landmark_srvf(x));
    if (cfg.elastic_mean == ElasticMean::karcher || qs.size() == 1) {
      means[grp] = karcher_mean(qs, cfg.dp).mean;
      return;
    }
    ModelConfig model = cfg.model;
    model.seed = derive_seed(cfg.model.seed, grp);
    means[grp] = normalized(*register_multiple(qs, model).summary.mean_function);
  });
  return means;
}

[[nodiscard]] inline ShapeObject as_shape_object(const Matrix& x, ShapeMetric metric) {
  if (metric == ShapeMetric::procrustes) return preshape(x);
  return landmark_srvf(x);
}

struct ClassificationReport {
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  long correct = 0, total = 0;

  [[nodiscard]] double accuracy() const {
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }
  void add(int truth, int predicted) {
    confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)] += 1;
    ++total;
    if (truth == predicted) ++correct;
  }
};

/// Trains on `train` and classifies every configuration of `test`.
[[nodiscard]] inline ClassificationReport evaluate_split(const LandmarkDataset& train,
                                                         const LandmarkDataset& test,
                                                         const ClassifierConfig& cfg) {
  test.validate();
  const std::vector<ShapeObject> means = train_means(train, cfg);
  const auto g = static_cast<std::size_t>(std::max(train.groups(), test.groups()));
  ClassificationReport rep;
  rep.confusion.assign(g, std::vector<long>(g, 0));
  std::vector<int> predicted(test.configs.size());
  parallel_for(test.configs.size(), cfg.workers, [&](std::size_t i) {
    predicted[i] = static_cast<int>(
        classify_nearest_mean(as_shape_object(test.configs[i], cfg.metric), means, cfg.metric, cfg.dp));
  });
  for (std::size_t i = 0; i < predicted.size(); ++i) rep.add(test.labels[i], predicted[i]);
  return rep;
}

/// Stratified random split: about `test_fraction` of every group is held out.
[[nodiscard]] inline std::pair<LandmarkDataset, LandmarkDataset> stratified_split(
    const LandmarkDataset& data, double test_fraction, Rng& rng) {
  data.validate();
  detail::require(test_fraction > 0.0 && test_fraction < 1.0, "procrustes", "test_fraction",
                  "test fraction must be in (0, 1)");
  LandmarkDataset train, test;
  train.group_names = test.group_names = data.group_names;
  for (int grp = 0; grp < data.groups(); ++grp) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (data.labels[i] == grp) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size()))), 1,
        idx.size() > 1 ? idx.size() - 1 : 1);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      LandmarkDataset& dst = j < n_test ? test : train;
      dst.configs.push_back(data.configs[idx[j]]);
      dst.labels.push_back(grp);
    }
  }
  return {std::move(train), std::move(test)};
}

/// Accuracy of repeated stratified splits; split s uses stream s of `seed`.
[[nodiscard]] inline std::vector<ClassificationReport> resampled_accuracy(
    const LandmarkDataset& data, const ClassifierConfig& cfg, int splits, double test_fraction,
    std::uint64_t seed) {
  detail::require(splits >= 1, "procrustes", "splits", "at least one split is required");
  std::vector<ClassificationReport> out;
  for (int s = 0; s < splits; ++s) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(s));
    const auto [train, test] = stratified_split(data, test_fraction, rng);
    ClassifierConfig c = cfg;
    c.model.seed = derive_seed(cfg.model.seed, static_cast<std::uint64_t>(s));
    out.push_back(evaluate_split(train, test, c));
  }
  return out;
}

/// Three planar template curves on k landmarks spanning [-1, 1] in x: a half
/// circle, one period of a sine wave and a three-tooth zigzag.
[[nodiscard]] inline std::vector<Matrix> template_curves(int k = 30) {
  detail::require(k >= 6, "procrustes", "landmarks", "templates need at least 6 landmarks");
  std::vector<Matrix> t(3, Matrix(k, 2));
  for (int i = 0; i < k; ++i) {
    const double s = static_cast<double>(i) / (k - 1);
    t[0](i, 0) = std::cos(std::numbers::pi * s);
    t[0](i, 1) = std::sin(std::numbers::pi * s);
    t[1](i, 0) = 2.0 * s - 1.0;
    t[1](i, 1) = 0.5 * std::sin(2.0 * std::numbers::pi * s);
    const double tooth = 3.0 * s - std::floor(3.0 * s);
    t[2](i, 0) = 2.0 * s - 1.0;
    t[2](i, 1) = 0.4 * (1.0 - 2.0 * std::abs(2.0 * tooth - 1.0));
  }
  return t;
}

/// `per_class` noisy copies of every template: isotropic Gaussian landmark
/// noise of SD sigma, then a random rotation, scale in [0.5, 2] and shift.
[[nodiscard]] inline LandmarkDataset synthetic_landmark_dataset(int per_class, double sigma, Rng& rng,
                                                                int k = 30) {
  detail::require(per_class >= 1, "procrustes", "per_class", "per_class must be positive");
  detail::require(sigma >= 0.0, "procrustes", "sigma", "sigma must be non-negative");
  const std::vector<Matrix> templates = template_curves(k);
  std::normal_distribution<double> normal(0.0, 1.0);
  LandmarkDataset d;
  d.group_names = {"arc", "wave", "zigzag"};
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < per_class; ++r) {
      Matrix x = templates[static_cast<std::size_t>(c)];
      for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] += sigma * normal(rng);
      const Rotation rot = Rotation::from_angle(2.0 * std::numbers::pi * uniform01(rng));
      const double scale = 0.5 + 1.5 * uniform01(rng);
      RowVector shift(2);
      shift << normal(rng), normal(rng);
      x = (scale * x * rot.matrix()).rowwise() + shift;
      d.configs.push_back(std::move(x));
      d.labels.push_back(c);
    }
  }
  return d;
}

}  // namespace elastica
