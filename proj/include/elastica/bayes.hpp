// Apache License, Version 2.0, refer to LICENSE.txt
//
// Bayesian registration in the ambient space: Dirichlet prior on warp
// increments, Gaussian residual model with precision kappa, Gamma prior on
// kappa, and Metropolis-within-Gibbs samplers for pairs and for several
// functions around a sampled mean.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "elastica/dp.hpp"
#include "elastica/error.hpp"
#include "elastica/random.hpp"
#include "elastica/rotation.hpp"
#include "elastica/srvf.hpp"
#include "elastica/warp.hpp"

namespace elastica {

struct ModelConfig {
  double a = 1.0;         // symmetric Dirichlet concentration
  double alpha = 1.0;     // Gamma shape for kappa
  double beta = 1000.0;   // Gamma scale for kappa (prior mean alpha * beta)
  int M = 20;             // warp segments
  std::optional<bool> unit_norm;  // unset: taken from the inputs
  int n_iter = 50000;
  int burn_in = 25000;
  int thin = 10;
  double proposal_scale = 0.5;   // knot shift width as a fraction of its bracket
  double rotation_scale = 0.5;   // half-width (radians) of the angle random walk
  bool adapt = true;             // tune both scales toward 20-40% during burn-in
  int adapt_window = 50;
  bool rotation = true;          // sample rotations when m >= 2
  double mean_prior_var = 1e6;   // v0 for the mean function prior
  std::uint64_t seed = 1;
  bool use_likelihood = true;    // false samples the prior only
  bool dp_init = true;           // start from the dynamic-programming alignment

  void validate() const {
    detail::require(a > 0.0, "bayes_mcmc", "prior_a", "Dirichlet concentration must be positive");
    detail::require(alpha > 0.0 && beta > 0.0, "bayes_mcmc", "kappa_prior",
                    "Gamma prior parameters must be positive");
    detail::require(M >= 1, "bayes_mcmc", "warp_segments", "M must be at least 1");
    detail::require(n_iter >= 1 && burn_in >= 0 && burn_in < n_iter, "bayes_mcmc", "burn_in",
                    "burn_in must be smaller than n_iter");
    detail::require(thin >= 1, "bayes_mcmc", "thin", "thin must be at least 1");
    detail::require(proposal_scale > 0.0 && rotation_scale > 0.0, "bayes_mcmc",
                    "proposal_scale", "proposal scales must be positive");
    detail::require(mean_prior_var > 0.0, "bayes_mcmc", "mean_prior_var",
                    "mean prior variance must be positive");
  }
};

/// Degrees of freedom of one observation: points * m, minus one under the
/// unit-norm constraint.
[[nodiscard]] inline double p_dof(Eigen::Index points, int m, bool unit_norm) {
  return static_cast<double>(points) * m - (unit_norm ? 1.0 : 0.0);
}

struct AcceptRates {
  double warp = 0.0;
  double rotation = 0.0;
  double swap = 0.0;
};

struct McmcChain {
  std::vector<int> iterations;
  std::vector<std::vector<WarpFunction>> warps;  // [sample][observation]
  std::vector<double> kappa;
  std::vector<std::vector<double>> angles;       // [sample][observation], m = 2 only
  std::vector<Srvf> means;                       // multiple mode only
  std::vector<double> log_post;
  AcceptRates accept;
  bool untuned_ladder = false;

  [[nodiscard]] std::size_t size() const noexcept { return kappa.size(); }
};

struct WarpBand {
  WarpFunction mean;
  std::vector<double> lower;  // 2.5% knot quantiles
  std::vector<double> upper;  // 97.5% knot quantiles
};

struct PosteriorSummary {
  std::vector<WarpBand> warps;           // one per observation
  std::vector<double> mean_angles;       // circular means, m = 2 only
  std::optional<Srvf> mean_function;     // multiple mode only
  double kappa_mean = 0.0;
  std::size_t map_index = 0;
  double map_log_post = -std::numeric_limits<double>::infinity();
  AcceptRates accept;

  [[nodiscard]] double mean_band_width() const {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& w : warps) {
      for (std::size_t i = 0; i < w.lower.size(); ++i) total += w.upper[i] - w.lower[i];
      count += w.lower.size();
    }
    return count ? total / static_cast<double>(count) : 0.0;
  }
};

/// Symmetric Dirichlet(a) log density of the increments, normalized.
[[nodiscard]] inline double log_prior_warp(std::span<const double> increments, double a) {
  const auto m = static_cast<double>(increments.size());
  double s = 0.0;
  for (double p : increments) {
    if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
    s += std::log(p);
  }
  return std::lgamma(m * a) - m * std::lgamma(a) + (a - 1.0) * s;
}

[[nodiscard]] inline double log_prior_warp(const WarpFunction& g, double a) {
  const auto p = g.increments();
  return log_prior_warp(std::span<const double>(p), a);
}

/// Gamma(shape alpha, scale beta) log density.
[[nodiscard]] inline double log_prior_kappa(double kappa, double alpha, double beta) {
  if (!(kappa > 0.0)) return -std::numeric_limits<double>::infinity();
  return (alpha - 1.0) * std::log(kappa) - kappa / beta - std::lgamma(alpha) - alpha * std::log(beta);
}

/// Residual sum of squares over grid points between q1 and the warped,
/// optionally rotated q2.
[[nodiscard]] inline double residual_ss(const Srvf& q1, const Srvf& q2, const WarpFunction& g,
                                        const Rotation* r = nullptr) {
  detail::require(q1.grid() == q2.grid() && q1.dim() == q2.dim(), "bayes_mcmc", "common_grid",
                  "SRVFs must share grid and dimension");
  Matrix w = warped_values(q2, g);
  if (r != nullptr) w = w * r->matrix();
  return (q1.values() - w).squaredNorm();
}

/// (p/2) log kappa - kappa RSS + log prior(g) + log prior(kappa).
[[nodiscard]] inline double log_posterior_pairwise(const WarpFunction& g, double kappa,
                                                   const Srvf& q1, const Srvf& q2,
                                                   const ModelConfig& cfg,
                                                   const Rotation* r = nullptr) {
  if (!(kappa > 0.0)) return -std::numeric_limits<double>::infinity();
  const bool unit = cfg.unit_norm.value_or(q1.unit_norm() && q2.unit_norm());
  const double p = p_dof(q1.size(), q1.dim(), unit);
  const double rss = cfg.use_likelihood ? residual_ss(q1, q2, g, r) : 0.0;
  const double like = cfg.use_likelihood ? 0.5 * p * std::log(kappa) - kappa * rss : 0.0;
  return like + log_prior_warp(g, cfg.a) + log_prior_kappa(kappa, cfg.alpha, cfg.beta);
}

/// Gibbs draw of kappa at inverse temperature b:
/// Gamma(shape b (p/2 + alpha) + 1 - b, rate b (1/beta + rss)).
[[nodiscard]] inline double gibbs_kappa(double rss, double p, double alpha, double beta, Rng& rng,
                                        double inv_temp = 1.0) {
  detail::require(rss >= 0.0, "bayes_mcmc", "residual", "residual sum of squares must be >= 0");
  const double shape = inv_temp * (0.5 * p + alpha) + 1.0 - inv_temp;
  const double rate = inv_temp * (1.0 / beta + rss);
  return gamma_rate(shape, rate, rng);
}

namespace detail {

/// Reflects y into the open interval (lo, hi).
inline double reflect_into(double y, double lo, double hi) {
  const double w = hi - lo;
  double z = std::fmod(y - lo, 2.0 * w);
  if (z < 0.0) z += 2.0 * w;
  if (z > w) z = 2.0 * w - z;
  return lo + z;
}

inline Matrix rotation_matrix(double theta) {
  Matrix r(2, 2);
  r << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace detail

/// Metropolis-within-Gibbs state for one or several observations aligned to
/// a target: the fixed q1 (pairwise) or a sampled mean function (multiple).
/// Each sweep can be run at an inverse temperature b, which scales the whole
/// log posterior; b = 1 is the ordinary sampler.
class BayesSampler {
 public:
  [[nodiscard]] static BayesSampler pairwise(const Srvf& q1, const Srvf& q2, const ModelConfig& cfg) {
    cfg.validate();
    detail::require(q1.grid() == q2.grid() && q1.dim() == q2.dim(), "bayes_mcmc", "common_grid",
                    "SRVFs must share grid and dimension");
    BayesSampler s(cfg, {q2}, q1.unit_norm() && q2.unit_norm(), false);
    s.target_ = q1.values();
    s.init_state();
    s.refresh_all();
    s.kappa_ = s.conditional_kappa_mean();
    return s;
  }

  [[nodiscard]] static BayesSampler multiple(std::span<const Srvf> qs, const ModelConfig& cfg) {
    cfg.validate();
    detail::require(qs.size() >= 2, "bayes_mcmc", "n_observations",
                    "register_multiple needs at least two functions");
    bool unit = true;
    for (const auto& q : qs) {
      detail::require(q.grid() == qs[0].grid() && q.dim() == qs[0].dim(), "bayes_mcmc",
                      "common_grid", "SRVFs must share grid and dimension");
      unit = unit && q.unit_norm();
    }
    BayesSampler s(cfg, std::vector<Srvf>(qs.begin(), qs.end()), unit, true);
    // Start the mean at the L2 medoid.
    std::size_t medoid = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < qs.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < qs.size(); ++j) d += l2_distance(qs[i], qs[j]);
      if (d < best) {
        best = d;
        medoid = i;
      }
    }
    s.target_ = qs[medoid].values();
    s.init_state();
    s.refresh_all();
    s.kappa_ = s.conditional_kappa_mean();
    return s;
  }

  /// One full sweep: warp knots (and angles) of every observation, the mean
  /// function in multiple mode, then kappa; multiple mode is re-standardized.
  void sweep(double inv_temp, Rng& rng) {
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      update_warp(i, inv_temp, rng);
      shift_block(i, inv_temp, rng);
    }
    if (rotating_) {
      for (std::size_t i = 0; i < obs_.size(); ++i) update_rotation(i, inv_temp, rng);
    }
    if (multiple_) update_mean(inv_temp, rng);
    update_kappa(inv_temp, rng);
    if (multiple_) standardize();
  }

  /// Adjusts proposal scales from the acceptance since the last call.
  void adapt() {
    auto tune = [](double& scale, long& acc, long& tried, double lo, double hi) {
      if (tried == 0) return;
      const double rate = static_cast<double>(acc) / static_cast<double>(tried);
      if (rate < 0.2) scale *= 0.8;
      if (rate > 0.4) scale *= 1.25;
      scale = std::clamp(scale, lo, hi);
      acc = tried = 0;
    };
    for (auto& o : obs_) {
      tune(o.warp_scale, o.window_acc, o.window_tried, 1e-4, 1.0);
      tune(o.block_scale, o.block_window_acc, o.block_window_tried, 1e-6, 0.5);
      tune(o.rot_scale, o.rot_window_acc, o.rot_window_tried, 1e-4, std::numbers::pi);
    }
  }

  [[nodiscard]] double log_posterior() const {
    double lp = log_prior_kappa(kappa_, cfg_.alpha, cfg_.beta);
    double rss = 0.0;
    for (const auto& o : obs_) {
      lp += log_prior_warp(increments(o.knots), cfg_.a);
      rss += o.rss;
    }
    if (cfg_.use_likelihood) {
      lp += 0.5 * p_ * static_cast<double>(obs_.size()) * std::log(kappa_) - kappa_ * rss;
    }
    if (multiple_) lp -= target_.squaredNorm() / cfg_.mean_prior_var;
    return lp;
  }

  void record(McmcChain& chain, int iteration) const {
    chain.iterations.push_back(iteration);
    std::vector<WarpFunction> ws;
    std::vector<double> th;
    for (const auto& o : obs_) {
      ws.push_back(WarpFunction::from_knots(o.knots));
      th.push_back(o.theta);
    }
    chain.warps.push_back(std::move(ws));
    if (rotating_) chain.angles.push_back(std::move(th));
    chain.kappa.push_back(kappa_);
    if (multiple_) chain.means.emplace_back(obs_q_[0].grid(), target_);
    chain.log_post.push_back(log_posterior());
  }

  void fill_accept(AcceptRates& a) const {
    long wa = 0, wt = 0, ra = 0, rt = 0;
    for (const auto& o : obs_) {
      wa += o.total_acc;
      wt += o.total_tried;
      ra += o.rot_total_acc;
      rt += o.rot_total_tried;
    }
    a.warp = wt ? static_cast<double>(wa) / static_cast<double>(wt) : 0.0;
    a.rotation = rt ? static_cast<double>(ra) / static_cast<double>(rt) : 0.0;
  }

  /// Resets the acceptance totals (called when burn-in ends).
  void reset_counts() {
    for (auto& o : obs_) o.total_acc = o.total_tried = o.rot_total_acc = o.rot_total_tried = 0;
  }

  [[nodiscard]] double kappa() const noexcept { return kappa_; }
  [[nodiscard]] const std::vector<double>& knots(std::size_t i) const { return obs_[i].knots; }
  [[nodiscard]] double angle(std::size_t i) const { return obs_[i].theta; }
  [[nodiscard]] double rss(std::size_t i) const { return obs_[i].rss; }
  [[nodiscard]] const Matrix& target() const noexcept { return target_; }
  [[nodiscard]] std::size_t observations() const noexcept { return obs_.size(); }
  [[nodiscard]] double warp_scale(std::size_t i) const { return obs_[i].warp_scale; }

 private:
  struct Obs {
    std::vector<double> knots;
    Matrix warped;                 // sqrt(g') q(g) before rotation
    std::vector<double> contrib;   // per-point squared residual
    double rss = 0.0;
    double theta = 0.0;
    double warp_scale = 0.5;
    double rot_scale = 0.5;
    double block_scale = 0.02;
    long block_window_acc = 0, block_window_tried = 0;
    long window_acc = 0, window_tried = 0, total_acc = 0, total_tried = 0;
    long rot_window_acc = 0, rot_window_tried = 0, rot_total_acc = 0, rot_total_tried = 0;
  };

  BayesSampler(const ModelConfig& cfg, std::vector<Srvf> qs, bool unit, bool multiple)
      : cfg_(cfg), obs_q_(std::move(qs)), multiple_(multiple) {
    const Srvf& q0 = obs_q_[0];
    p_ = p_dof(q0.size(), q0.dim(), cfg.unit_norm.value_or(unit));
    rotating_ = q0.dim() == 2 && cfg.rotation;
    detail::require(q0.dim() <= 2 || !cfg.rotation, "bayes_mcmc", "rotation_dim",
                    "rotation sampling is implemented for m = 2; disable it for m > 2");
    obs_.resize(obs_q_.size());
    for (auto& o : obs_) {
      o.knots = WarpFunction::identity(cfg.M).knots();
      o.warp_scale = std::min(cfg.proposal_scale, 1.0);
      o.rot_scale = std::min(cfg.rotation_scale, std::numbers::pi);
    }
    const auto& t = q0.grid().points();
    // Grid indices influenced by each knot: t in [(l-1)/M, (l+1)/M].
    window_.resize(static_cast<std::size_t>(cfg.M) + 1);
    for (int l = 0; l <= cfg.M; ++l) {
      const double lo = static_cast<double>(l - 1) / cfg.M - 1e-12;
      const double hi = static_cast<double>(l + 1) / cfg.M + 1e-12;
      const auto b = std::lower_bound(t.begin(), t.end(), lo) - t.begin();
      const auto e = std::upper_bound(t.begin(), t.end(), hi) - t.begin();
      window_[static_cast<std::size_t>(l)] = {b, e};
    }
  }

  static std::vector<double> increments(const std::vector<double>& k) {
    std::vector<double> p(k.size() - 1);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = k[i + 1] - k[i];
    return p;
  }

  /// Starting warps and angles: the dynamic-programming alignment to the
  /// target projected onto M knots, or identity warps with Procrustes angles.
  void init_state() {
    const Srvf target(obs_q_[0].grid(), target_);
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      if (cfg_.dp_init && cfg_.use_likelihood) {
        DpConfig dp;
        dp.rotation_enabled = rotating_;
        const ElasticAlignment al = elastic_align(target, obs_q_[i], dp);
        const WarpFunction g = resample_warp(al.warp, cfg_.M);
        const auto p = g.increments();
        if (std::all_of(p.begin(), p.end(), [](double v) { return v > 1e-12; })) {
          obs_[i].knots = g.knots();
        }
        if (rotating_) obs_[i].theta = al.rotation.angle().value_or(0.0);
      } else if (rotating_) {
        obs_[i].theta = rotation_align(target, obs_q_[i]).rotation.angle().value_or(0.0);
      }
    }
  }

  /// Warped value of observation i at grid point j for the given knots.
  void warped_point(std::size_t i, Eigen::Index j, std::span<const double> k,
                    Eigen::Ref<RowVector> out) const {
    const Srvf& q = obs_q_[i];
    const double t = q.grid()[j];
    detail::interpolate_row(q.grid(), q.values(), WarpFunction::evaluate(k, t), out);
    out *= std::sqrt(WarpFunction::slope_at(k, t));
  }

  double point_residual(std::size_t i, const RowVector& warped, Eigen::Index j) const {
    if (!cfg_.use_likelihood) return 0.0;
    if (rotating_) {
      const RowVector r = warped * detail::rotation_matrix(obs_[i].theta);
      return (target_.row(j) - r).squaredNorm();
    }
    return (target_.row(j) - warped).squaredNorm();
  }

  void refresh(std::size_t i) {
    Obs& o = obs_[i];
    const Srvf& q = obs_q_[i];
    o.warped.resize(q.size(), q.dim());
    o.contrib.assign(static_cast<std::size_t>(q.size()), 0.0);
    RowVector row(q.dim());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      warped_point(i, j, o.knots, row);
      o.warped.row(j) = row;
    }
    recompute_residuals(i);
  }

  void recompute_residuals(std::size_t i) {
    Obs& o = obs_[i];
    o.rss = 0.0;
    for (Eigen::Index j = 0; j < o.warped.rows(); ++j) {
      o.contrib[static_cast<std::size_t>(j)] = point_residual(i, o.warped.row(j), j);
      o.rss += o.contrib[static_cast<std::size_t>(j)];
    }
  }

  void refresh_all() {
    for (std::size_t i = 0; i < obs_.size(); ++i) refresh(i);
  }

  [[nodiscard]] double total_rss() const {
    double r = 0.0;
    for (const auto& o : obs_) r += o.rss;
    return r;
  }

  [[nodiscard]] double conditional_kappa_mean() const {
    const double pp = p_ * static_cast<double>(obs_.size());
    const double rss = cfg_.use_likelihood ? total_rss() : 0.0;
    return (0.5 * (cfg_.use_likelihood ? pp : 0.0) + cfg_.alpha) / (1.0 / cfg_.beta + rss);
  }

  void update_warp(std::size_t i, double b, Rng& rng) {
    Obs& o = obs_[i];
    const int m = cfg_.M;
    RowVector row(obs_q_[i].dim());
    std::vector<double> trial = o.knots;
    std::vector<RowVector> new_rows;
    std::vector<double> new_contrib;
    for (int l = 1; l < m; ++l) {
      const auto li = static_cast<std::size_t>(l);
      const double lo = o.knots[li - 1], hi = o.knots[li + 1];
      const double width = o.warp_scale * (hi - lo);
      const double u = 2.0 * uniform01(rng) - 1.0;
      const double prop = detail::reflect_into(o.knots[li] + width * u, lo, hi);
      const double log_u = std::log(uniform01(rng));
      ++o.window_tried;
      ++o.total_tried;
      if (!(prop > lo && prop < hi)) continue;

      trial[li] = prop;
      const auto [jb, je] = window_[li];
      new_rows.clear();
      new_contrib.clear();
      double delta_rss = 0.0;
      for (auto j = jb; j < je; ++j) {
        warped_point(i, j, trial, row);
        const double c = point_residual(i, row, j);
        delta_rss += c - o.contrib[static_cast<std::size_t>(j)];
        new_rows.push_back(row);
        new_contrib.push_back(c);
      }
      double log_ratio = 0.0;
      if (cfg_.use_likelihood) log_ratio -= kappa_ * delta_rss;
      if (cfg_.a != 1.0) {
        const double old_lp = std::log(o.knots[li] - lo) + std::log(hi - o.knots[li]);
        const double new_lp = std::log(prop - lo) + std::log(hi - prop);
        log_ratio += (cfg_.a - 1.0) * (new_lp - old_lp);
      }
      if (log_u < b * log_ratio) {
        o.knots[li] = prop;
        for (auto j = jb; j < je; ++j) {
          const auto k = static_cast<std::size_t>(j - jb);
          o.warped.row(j) = new_rows[k];
          o.contrib[static_cast<std::size_t>(j)] = new_contrib[k];
        }
        o.rss += delta_rss;
        ++o.window_acc;
        ++o.total_acc;
      } else {
        trial[li] = o.knots[li];
      }
    }
    // Re-sum to keep the running total free of drift.
    o.rss = 0.0;
    for (double c : o.contrib) o.rss += c;
  }

  /// Moves a random run of consecutive interior knots by a common uniform
  /// step in [-h, h]: a symmetric proposal that translates a stretch of the
  /// warp, which single-knot moves only achieve through many small steps.
  /// Only the two increments at the ends of the run change.
  void shift_block(std::size_t i, double b, Rng& rng) {
    Obs& o = obs_[i];
    const int m = cfg_.M;
    if (m < 2) return;
    const int len = 1 + static_cast<int>(uniform01(rng) * (m - 1));
    const int first = 1 + static_cast<int>(uniform01(rng) * (m - len));
    const int last = first + len - 1;
    const double u = o.block_scale * (2.0 * uniform01(rng) - 1.0);
    const double log_u = std::log(uniform01(rng));
    ++o.block_window_tried;
    const auto fi = static_cast<std::size_t>(first), la = static_cast<std::size_t>(last);
    const double left = o.knots[fi] - o.knots[fi - 1] + u;
    const double right = o.knots[la + 1] - o.knots[la] - u;
    if (!(left > 0.0 && right > 0.0)) return;

    std::vector<double> trial = o.knots;
    for (std::size_t l = fi; l <= la; ++l) trial[l] += u;
    const Eigen::Index jb = window_[fi].first, je = window_[la].second;
    RowVector row(obs_q_[i].dim());
    std::vector<RowVector> new_rows;
    std::vector<double> new_contrib;
    double delta_rss = 0.0;
    for (auto j = jb; j < je; ++j) {
      warped_point(i, j, trial, row);
      const double c = point_residual(i, row, j);
      delta_rss += c - o.contrib[static_cast<std::size_t>(j)];
      new_rows.push_back(row);
      new_contrib.push_back(c);
    }
    double log_ratio = 0.0;
    if (cfg_.use_likelihood) log_ratio -= kappa_ * delta_rss;
    if (cfg_.a != 1.0) {
      const double old_left = o.knots[fi] - o.knots[fi - 1];
      const double old_right = o.knots[la + 1] - o.knots[la];
      log_ratio += (cfg_.a - 1.0) * (std::log(left) + std::log(right) - std::log(old_left) -
                                     std::log(old_right));
    }
    if (log_u < b * log_ratio) {
      o.knots = std::move(trial);
      for (auto j = jb; j < je; ++j) {
        const auto k = static_cast<std::size_t>(j - jb);
        o.warped.row(j) = new_rows[k];
        o.contrib[static_cast<std::size_t>(j)] = new_contrib[k];
      }
      o.rss = 0.0;
      for (double c : o.contrib) o.rss += c;
      ++o.block_window_acc;
    }
  }

  void update_rotation(std::size_t i, double b, Rng& rng) {
    Obs& o = obs_[i];
    const double prop = wrap_angle(o.theta + o.rot_scale * (2.0 * uniform01(rng) - 1.0));
    const double log_u = std::log(uniform01(rng));
    ++o.rot_window_tried;
    ++o.rot_total_tried;
    const double old_theta = o.theta;
    const double old_rss = o.rss;
    const std::vector<double> old_contrib = o.contrib;
    o.theta = prop;
    recompute_residuals(i);
    const double log_ratio = cfg_.use_likelihood ? -kappa_ * (o.rss - old_rss) : 0.0;
    if (log_u < b * log_ratio) {
      ++o.rot_window_acc;
      ++o.rot_total_acc;
    } else {
      o.theta = old_theta;
      o.rss = old_rss;
      o.contrib = old_contrib;
    }
  }

  /// Pointwise normal conditional of the mean: precision 2 b (n kappa + 1/v0),
  /// mean n kappa qbar / (n kappa + 1/v0).
  void update_mean(double b, Rng& rng) {
    const auto n = static_cast<double>(obs_.size());
    Matrix sum = Matrix::Zero(target_.rows(), target_.cols());
    for (const auto& o : obs_) {
      sum += rotating_ ? Matrix(o.warped * detail::rotation_matrix(o.theta)) : o.warped;
    }
    const double k = cfg_.use_likelihood ? kappa_ : 0.0;
    const double prec = n * k + 1.0 / cfg_.mean_prior_var;
    const double sd = std::sqrt(1.0 / (2.0 * b * prec));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < target_.rows(); ++j) {
      for (Eigen::Index c = 0; c < target_.cols(); ++c) {
        target_(j, c) = k * sum(j, c) / prec + sd * normal(rng);
      }
    }
    for (std::size_t i = 0; i < obs_.size(); ++i) recompute_residuals(i);
  }

  void update_kappa(double b, Rng& rng) {
    const double pp = cfg_.use_likelihood ? p_ * static_cast<double>(obs_.size()) : 0.0;
    const double rss = cfg_.use_likelihood ? total_rss() : 0.0;
    kappa_ = gibbs_kappa(rss, pp, cfg_.alpha, cfg_.beta, rng, b);
    kappa_ = std::max(kappa_, std::numeric_limits<double>::min());
  }

  /// Re-centres the warps so that their Karcher mean is the identity,
  /// moving the mean function by the same warp.
  void standardize() {
    std::vector<WarpFunction> ws;
    ws.reserve(obs_.size());
    for (const auto& o : obs_) ws.push_back(WarpFunction::from_knots(o.knots));
    const Grid& grid = obs_q_[0].grid();
    bool changed = false;
    for (int round = 0; round < 20; ++round) {
      const WarpFunction bar = karcher_mean_of_warps(ws);
      if (knot_sup_distance(bar, WarpFunction::identity(cfg_.M)) <= 1e-10) break;
      const WarpFunction inv = warp_inverse(bar);
      for (auto& w : ws) w = warp_compose(w, inv);
      target_ = warped_values(Srvf(grid, target_), inv);
      changed = true;
    }
    if (!changed) return;
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      obs_[i].knots = ws[i].knots();
      refresh(i);
    }
  }

  ModelConfig cfg_;
  std::vector<Srvf> obs_q_;
  bool multiple_ = false;
  bool rotating_ = false;
  double p_ = 0.0;
  double kappa_ = 1.0;
  Matrix target_;
  std::vector<Obs> obs_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> window_;
};

namespace detail {

inline double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Knot-wise posterior mean and 95% band per observation, posterior mean of
/// kappa, circular mean angles, and the highest-log-posterior draw.
[[nodiscard]] inline PosteriorSummary summarize(const McmcChain& chain) {
  detail::require(chain.size() > 0, "bayes_mcmc", "nonempty_chain",
                  "cannot summarize an empty chain");
  PosteriorSummary s;
  const std::size_t n = chain.size();
  const std::size_t nobs = chain.warps[0].size();
  for (std::size_t o = 0; o < nobs; ++o) {
    const int m = chain.warps[0][o].segments();
    std::vector<double> mean(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<double> lower(mean.size()), upper(mean.size());
    std::vector<double> column(n);
    for (int k = 0; k <= m; ++k) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        column[t] = chain.warps[t][o].knot(k);
        acc += column[t];
      }
      mean[static_cast<std::size_t>(k)] = acc / static_cast<double>(n);
      lower[static_cast<std::size_t>(k)] = detail::quantile(column, 0.025);
      upper[static_cast<std::size_t>(k)] = detail::quantile(column, 0.975);
    }
    // Project to a valid warp: sort, pin the ends, keep increments positive.
    std::sort(mean.begin(), mean.end());
    mean.front() = 0.0;
    mean.back() = 1.0;
    for (std::size_t k = 1; k < mean.size(); ++k) {
      if (!(mean[k] > mean[k - 1])) mean[k] = std::nextafter(mean[k - 1], 2.0);
    }
    mean.back() = 1.0;
    for (std::size_t k = 0; k < mean.size(); ++k) {
      lower[k] = std::min(lower[k], mean[k]);
      upper[k] = std::max(upper[k], mean[k]);
    }
    s.warps.push_back({WarpFunction::from_knots(mean), std::move(lower), std::move(upper)});
  }
  double ks = 0.0;
  for (double k : chain.kappa) ks += k;
  s.kappa_mean = ks / static_cast<double>(n);
  if (!chain.angles.empty()) {
    for (std::size_t o = 0; o < nobs; ++o) {
      double c = 0.0, sn = 0.0;
      for (const auto& a : chain.angles) {
        c += std::cos(a[o]);
        sn += std::sin(a[o]);
      }
      s.mean_angles.push_back(wrap_angle(std::atan2(sn, c)));
    }
  }
  if (!chain.means.empty()) {
    Matrix acc = Matrix::Zero(chain.means[0].size(), chain.means[0].dim());
    for (const auto& m : chain.means) acc += m.values();
    s.mean_function = Srvf(chain.means[0].grid(), acc / static_cast<double>(n));
  }
  const auto it = std::max_element(chain.log_post.begin(), chain.log_post.end());
  s.map_index = static_cast<std::size_t>(it - chain.log_post.begin());
  s.map_log_post = *it;
  s.accept = chain.accept;
  return s;
}

/// Plain (single-temperature) driver shared by register_pair and
/// register_multiple.
[[nodiscard]] inline McmcChain run_sampler(BayesSampler& sampler, const ModelConfig& cfg, Rng& rng) {
  McmcChain chain;
  for (int it = 0; it < cfg.n_iter; ++it) {
    sampler.sweep(1.0, rng);
    if (it < cfg.burn_in) {
      if (cfg.adapt && (it + 1) % cfg.adapt_window == 0) sampler.adapt();
      if (it + 1 == cfg.burn_in) sampler.reset_counts();
      continue;
    }
    if ((it - cfg.burn_in) % cfg.thin == 0) sampler.record(chain, it);
  }
  sampler.fill_accept(chain.accept);
  return chain;
}

struct BayesResult {
  McmcChain chain;
  PosteriorSummary summary;
};

[[nodiscard]] inline BayesResult register_pair(const Srvf& q1, const Srvf& q2, const ModelConfig& cfg) {
  BayesSampler sampler = BayesSampler::pairwise(q1, q2, cfg);
  Rng rng = make_rng(cfg.seed);
  McmcChain chain = run_sampler(sampler, cfg, rng);
  PosteriorSummary summary = summarize(chain);
  return {std::move(chain), std::move(summary)};
}

[[nodiscard]] inline BayesResult register_multiple(std::span<const Srvf> qs, const ModelConfig& cfg) {
  BayesSampler sampler = BayesSampler::multiple(qs, cfg);
  Rng rng = make_rng(cfg.seed);
  McmcChain chain = run_sampler(sampler, cfg, rng);
  PosteriorSummary summary = summarize(chain);
  return {std::move(chain), std::move(summary)};
}

}  // namespace elastica
