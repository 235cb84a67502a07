// Apache License, Version 2.0, refer to LICENSE.txt
//
// Monte Carlo comparison of the quotient-space Karcher mean and the
// ambient-space posterior mean on four synthetic mean functions.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "elastica/bayes.hpp"
#include "elastica/dp.hpp"
#include "elastica/error.hpp"
#include "elastica/parallel.hpp"
#include "elastica/random.hpp"
#include "elastica/srvf.hpp"
#include "elastica/warp.hpp"

namespace elastica {

enum class Example { I, II, III, IV };

[[nodiscard]] inline Example parse_example(const std::string& id) {
  if (id == "I" || id == "1") return Example::I;
  if (id == "II" || id == "2") return Example::II;
  if (id == "III" || id == "3") return Example::III;
  if (id == "IV" || id == "4") return Example::IV;
  throw Error(ErrorKind::invalid_input, "simulation", "example_id",
              "unknown example '" + id + "' (expected I, II, III or IV)");
}

[[nodiscard]] inline std::string example_name(Example e) {
  switch (e) {
    case Example::I: return "I";
    case Example::II: return "II";
    case Example::III: return "III";
    case Example::IV: return "IV";
  }
  return "?";
}

/// Default (k, M) per example.
[[nodiscard]] inline int example_points(Example e) { return e == Example::III ? 101 : 51; }
[[nodiscard]] inline int example_segments(Example e) { return e == Example::III ? 20 : 10; }

struct NormalComponent {
  double weight, mean, sd;
};

/// Three-component normal mixture used by example II.
[[nodiscard]] inline std::vector<NormalComponent> default_mixture() {
  return {{0.3, 0.22, 0.07}, {0.45, 0.5, 0.08}, {0.25, 0.78, 0.06}};
}

namespace detail {

struct Knot2 {
  double t, f;
};

inline double polyline_value(const std::vector<Knot2>& pts, double t) {
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (t <= pts[i + 1].t || i + 2 == pts.size()) {
      const double w = (t - pts[i].t) / (pts[i + 1].t - pts[i].t);
      return pts[i].f + w * (pts[i + 1].f - pts[i].f);
    }
  }
  return pts.back().f;
}

inline const std::vector<Knot2>& example_polyline(Example e) {
  static const std::vector<Knot2> single{{0.0, 0.0}, {0.4, 1.0}, {1.0, 0.0}};
  static const std::vector<Knot2> twin{{0.0, 0.0}, {0.25, 1.0}, {0.5, 0.3}, {0.75, 0.8}, {1.0, 0.0}};
  return e == Example::I ? single : twin;
}

inline double normal_pdf(double x, double m, double s) {
  const double z = (x - m) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

// Canonical double-Gamma response on [0, 32] s mapped to unit time:
// h(s) = g(s; 6) - g(s; 16) / 6 with g(s; a) the Gamma(a, 1) density.
constexpr double kHrfSpan = 32.0;

inline double gamma_pdf(double s, double a) {
  if (s <= 0.0) return 0.0;
  return std::exp((a - 1.0) * std::log(s) - s - std::lgamma(a));
}

inline double gamma_pdf_slope(double s, double a) {
  if (s <= 0.0) return 0.0;
  return gamma_pdf(s, a) * ((a - 1.0) / s - 1.0);
}

}  // namespace detail

/// Shape of the example mean on unit time, before scaling.
/// I: single triangular peak; II: three-component normal mixture;
/// III: derivative of the double-Gamma response; IV: two-peak polyline.
[[nodiscard]] inline double example_function(Example e, double t,
                                             const std::vector<NormalComponent>& mixture = default_mixture()) {
  switch (e) {
    case Example::I:
    case Example::IV:
      return detail::polyline_value(detail::example_polyline(e), t);
    case Example::II: {
      double s = 0.0;
      for (const auto& c : mixture) s += c.weight * detail::normal_pdf(t, c.mean, c.sd);
      return s;
    }
    case Example::III: {
      const double s = detail::kHrfSpan * t;
      return detail::gamma_pdf_slope(s, 6.0) - detail::gamma_pdf_slope(s, 16.0) / 6.0;
    }
  }
  return 0.0;
}

/// The example mean as an SRVF on continuous t: the example function scaled
/// to unit L2 norm on the k-point grid.
class ExampleSrvf {
 public:
  explicit ExampleSrvf(Example e, int k = 0,
                       std::vector<NormalComponent> mixture = default_mixture())
      : example_(e), mixture_(std::move(mixture)) {
    if (k == 0) k = example_points(e);
    detail::require(k >= 3, "simulation", "points", "k must be at least 3");
    grid_ = Grid::uniform(k);
    const Srvf raw(grid_, sample_on(grid_, [&](double t) { return unscaled(t); }));
    scale_ = 1.0 / l2_norm(raw);
  }

  [[nodiscard]] double operator()(double t) const { return scale_ * unscaled(t); }
  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] Srvf sampled() const {
    return normalized(Srvf(grid_, sample_on(grid_, [&](double t) { return (*this)(t); })));
  }

 private:
  [[nodiscard]] double unscaled(double t) const { return example_function(example_, t, mixture_); }

  Example example_;
  std::vector<NormalComponent> mixture_;
  Grid grid_;
  double scale_ = 1.0;
};

/// Unit-norm SRVF of the example function on k equally spaced points.
[[nodiscard]] inline Srvf example_mean(Example e, int k = 0,
                                       const std::vector<NormalComponent>& mixture = default_mixture()) {
  return ExampleSrvf(e, k, mixture).sampled();
}

/// Warp with symmetric Dirichlet(a) increments; draws that underflow to a
/// zero increment are redrawn.
[[nodiscard]] inline WarpFunction sample_warp(double a, int M, Rng& rng) {
  detail::require(a > 0.0, "simulation", "warp_concentration", "a must be positive");
  detail::require(M >= 1, "simulation", "warp_segments", "M must be at least 1");
  for (;;) {
    const std::vector<double> p = dirichlet(a, M, rng);
    if (std::all_of(p.begin(), p.end(), [](double v) { return v > 0.0; })) {
      return WarpFunction::from_increments(p);
    }
  }
}

namespace detail {

template <typename Warped>
std::vector<Srvf> noisy_copies(const Grid& grid, int n, double sigma, double a, int M, Rng& rng,
                               std::vector<WarpFunction>* warps, Warped&& warped) {
  detail::require(n >= 1, "simulation", "sample_size", "n must be at least 1");
  detail::require(sigma >= 0.0, "simulation", "sigma", "sigma must be non-negative");
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Srvf> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const WarpFunction g = sample_warp(a, M, rng);
    Matrix v = warped(g);
    if (sigma > 0.0) {
      for (Eigen::Index j = 0; j < v.size(); ++j) v.data()[j] += sigma * noise(rng);
    }
    out.emplace_back(grid, std::move(v));
    if (warps) warps->push_back(g);
  }
  return out;
}

}  // namespace detail

/// n observations sqrt(g_i') mu(g_i) + e_i with g_i ~ Dirichlet(a) on M
/// segments and e_i iid N(0, sigma^2) at every grid point; mu is
/// interpolated linearly between its samples.
[[nodiscard]] inline std::vector<Srvf> simulate_sample(const Srvf& mu, int n, double sigma, double a,
                                                       int M, Rng& rng,
                                                       std::vector<WarpFunction>* warps = nullptr) {
  return detail::noisy_copies(mu.grid(), n, sigma, a, M, rng, warps,
                              [&](const WarpFunction& g) { return warped_values(mu, g); });
}

/// As above with mu evaluated exactly at the warped times.
[[nodiscard]] inline std::vector<Srvf> simulate_sample(const ExampleSrvf& mu, int n, double sigma,
                                                       double a, int M, Rng& rng,
                                                       std::vector<WarpFunction>* warps = nullptr) {
  return detail::noisy_copies(mu.grid(), n, sigma, a, M, rng, warps, [&](const WarpFunction& g) {
    return sample_on(mu.grid(), [&](double t) { return std::sqrt(g.derivative(t)) * mu(g(t)); });
  });
}

struct StudyConfig {
  Example example = Example::I;
  std::vector<int> n_values{5, 10, 20};
  std::vector<double> sigma_values{0.1, 0.5};
  int reps = 20;
  int k = 0;    // 0: per-example default
  int M = 0;    // 0: per-example default
  double a = 1.0;
  std::uint64_t seed = 1;
  int n_iter = 10000;   // total MCMC sweeps
  int burn_in = 5000;
  int thin = 10;
  int workers = 1;
  DpConfig dp;          // shared by the Karcher mean and the distances

  void validate() const {
    detail::require(reps >= 1, "simulation", "reps", "reps must be at least 1");
    detail::require(!n_values.empty() && !sigma_values.empty(), "simulation", "grid",
                    "n_values and sigma_values must be non-empty");
    for (int n : n_values) detail::require(n >= 2, "simulation", "sample_size", "every n must be >= 2");
    for (double s : sigma_values) detail::require(s > 0.0, "simulation", "sigma", "every sigma must be > 0");
    detail::require(a > 0.0, "simulation", "warp_concentration", "a must be positive");
    detail::require(burn_in < n_iter, "simulation", "burn_in", "burn_in must be smaller than n_iter");
  }
};

struct StudyCell {
  int n = 0;
  double sigma = 0.0;
  std::vector<double> quotient;  // squared elastic distance per repetition
  std::vector<double> ambient;

  [[nodiscard]] static double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
  }
  [[nodiscard]] static double se(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  }
};

struct StudyResult {
  Example example = Example::I;
  std::vector<StudyCell> cells;  // n-major, then sigma

  [[nodiscard]] const StudyCell& cell(int n, double sigma) const {
    for (const auto& c : cells) {
      if (c.n == n && c.sigma == sigma) return c;
    }
    throw Error(ErrorKind::invalid_input, "simulation", "cell", "no such (n, sigma) cell");
  }
};

/// One repetition: simulate, estimate both means, return their squared
/// elastic distances to the truth.
[[nodiscard]] inline std::pair<double, double> study_repetition(const StudyConfig& cfg, const Srvf& mu,
                                                                int n, double sigma,
                                                                std::uint64_t stream) {
  const int M = cfg.M > 0 ? cfg.M : example_segments(cfg.example);
  Rng rng = make_rng(cfg.seed, stream);
  const std::vector<Srvf> qs = simulate_sample(ExampleSrvf(cfg.example, cfg.k), n, sigma, cfg.a, M, rng);

  const KarcherResult quotient = karcher_mean(qs, cfg.dp);

  ModelConfig model;
  model.M = M;
  model.a = 1.0;
  model.n_iter = cfg.n_iter;
  model.burn_in = cfg.burn_in;
  model.thin = cfg.thin;
  model.rotation = false;
  model.seed = derive_seed(cfg.seed, stream ^ 0x5bd1e995ULL);
  const BayesResult ambient = register_multiple(qs, model);

  const double dq = elastic_distance(quotient.mean, mu, cfg.dp);
  const double da = elastic_distance(*ambient.summary.mean_function, mu, cfg.dp);
  return {dq * dq, da * da};
}

/// Runs every (n, sigma, repetition) on independent streams; the table is
/// identical for any number of workers.
[[nodiscard]] inline StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  const Srvf mu = example_mean(cfg.example, cfg.k);
  StudyResult result;
  result.example = cfg.example;
  for (int n : cfg.n_values) {
    for (double s : cfg.sigma_values) {
      StudyCell c;
      c.n = n;
      c.sigma = s;
      c.quotient.assign(static_cast<std::size_t>(cfg.reps), 0.0);
      c.ambient.assign(static_cast<std::size_t>(cfg.reps), 0.0);
      result.cells.push_back(std::move(c));
    }
  }
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  parallel_for(result.cells.size() * reps, cfg.workers, [&](std::size_t job) {
    StudyCell& c = result.cells[job / reps];
    const std::size_t rep = job % reps;
    const auto [dq, da] = study_repetition(cfg, mu, c.n, c.sigma, job);
    c.quotient[rep] = dq;
    c.ambient[rep] = da;
  });
  return result;
}

/// example,n,sigma,estimator,mean_sq_dist,se
inline void write_study_csv(std::ostream& os, const StudyResult& r) {
  os << "example,n,sigma,estimator,mean_sq_dist,se\n";
  for (const auto& c : r.cells) {
    os << example_name(r.example) << ',' << c.n << ',' << c.sigma << ",quotient,"
       << StudyCell::mean(c.quotient) << ',' << StudyCell::se(c.quotient) << '\n';
    os << example_name(r.example) << ',' << c.n << ',' << c.sigma << ",ambient,"
       << StudyCell::mean(c.ambient) << ',' << StudyCell::se(c.ambient) << '\n';
  }
}

/// Long format for plotting log mean squared distance against log n.
inline void write_study_plot(std::ostream& os, const StudyResult& r) {
  os << "example,sigma,estimator,log_n,log_mean_sq_dist\n";
  for (const auto& c : r.cells) {
    for (const auto& [name, v] : {std::pair{"quotient", &c.quotient}, std::pair{"ambient", &c.ambient}}) {
      os << example_name(r.example) << ',' << c.sigma << ',' << name << ',' << std::log(c.n) << ','
         << std::log(StudyCell::mean(*v)) << '\n';
    }
  }
}

}  // namespace elastica
