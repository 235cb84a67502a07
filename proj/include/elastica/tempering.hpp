// Apache License, Version 2.0, refer to LICENSE.txt
//
// Single-chain simulated tempering over a geometric ladder of powered
// posteriors pi^beta_i, with level weights tuned from pre-runs.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "elastica/bayes.hpp"
#include "elastica/error.hpp"
#include "elastica/random.hpp"

namespace elastica {

struct TemperingLadder {
  int T = 1;
  double delta = 0.0;
  std::vector<double> betas;        // betas[0] = 1, strictly decreasing
  std::vector<double> log_weights;  // log w_i, defined up to a constant
  int level = 0;                    // current 0-based level
  bool tuned = false;

  /// Move probability q_{i,j} for a neighbour j of level i.
  [[nodiscard]] double move_prob(int i) const noexcept {
    return (i == 0 || i == T - 1) ? 1.0 : 0.5;
  }
};

/// beta_i = (1 + delta)^(1 - i), i = 1..T, equal weights. T = 1 is allowed
/// and gives the untempered sampler.
[[nodiscard]] inline TemperingLadder build_ladder(int T = 10, double delta = 0.1) {
  detail::require(T >= 1, "tempering", "ladder_size", "T must be at least 1");
  detail::require(T == 1 || (delta > 0.0 && std::isfinite(delta)), "tempering", "ladder_delta",
                  "delta must be positive");
  TemperingLadder l;
  l.T = T;
  l.delta = delta;
  l.betas.resize(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) l.betas[static_cast<std::size_t>(i)] = std::pow(1.0 + delta, -i);
  l.log_weights.assign(static_cast<std::size_t>(T), 0.0);
  return l;
}

struct TuningReport {
  std::vector<long> counts;       // level visits in the final pre-run
  double swap_accept_rate = 0.0;  // in the final pre-run
  int K = 1;                      // delta = 1 / (K sqrt(N_T))
  double N_T = 1.0;
  int pre_run_iters = 0;
  int pre_runs = 0;
};

/// One level move from the current level i to a neighbour j, accepted with
/// min(1, exp[(b_j - b_i) log_pi + log w_j - log w_i + log q_ji - log q_ij]).
/// Returns true on acceptance. Draws nothing when T = 1.
inline bool swap_step(TemperingLadder& ladder, double log_pi, Rng& rng) {
  if (ladder.T == 1) return false;
  const int i = ladder.level;
  int j;
  if (i == 0) {
    j = 1;
  } else if (i == ladder.T - 1) {
    j = i - 1;
  } else {
    j = uniform01(rng) < 0.5 ? i - 1 : i + 1;
  }
  const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
  const double log_r = (ladder.betas[uj] - ladder.betas[ui]) * log_pi + ladder.log_weights[uj] -
                       ladder.log_weights[ui] + std::log(ladder.move_prob(j)) -
                       std::log(ladder.move_prob(i));
  if (std::log(uniform01(rng)) < log_r) {
    ladder.level = j;
    return true;
  }
  return false;
}

namespace detail {

struct PreRun {
  std::vector<long> counts;
  double accept = 0.0;
};

/// `iters` sweeps at the current level followed by a level move. The target
/// needs sweep(beta, rng) and log_posterior().
template <typename Target>
PreRun pre_run(Target& target, TemperingLadder& ladder, int iters, Rng& rng) {
  PreRun r;
  r.counts.assign(static_cast<std::size_t>(ladder.T), 0);
  long accepted = 0;
  for (int it = 0; it < iters; ++it) {
    target.sweep(ladder.betas[static_cast<std::size_t>(ladder.level)], rng);
    accepted += swap_step(ladder, target.log_posterior(), rng) ? 1 : 0;
    ++r.counts[static_cast<std::size_t>(ladder.level)];
  }
  r.accept = iters > 0 ? static_cast<double>(accepted) / iters : 0.0;
  return r;
}

inline TemperingLadder respaced(const TemperingLadder& old, double delta) {
  TemperingLadder l = build_ladder(old.T, delta);
  l.level = std::min(old.level, old.T - 1);
  return l;
}

}  // namespace detail

/// How level weights are estimated for a given spacing.
enum class WeightMethod {
  bridge,  // per-level normalizing constants from fixed-level runs
  counts,  // equal-weight pre-run, w_i proportional to 1 / n_i
};

struct TuneConfig {
  int pre_iters = 50000;
  WeightMethod weights = WeightMethod::bridge;
  int refine_rounds = 2;        // extra w_i <- w_i / n_i passes, each twice as long
  double accept_lo = 0.2;
  double accept_hi = 0.4;
  int max_spacing_steps = 8;
  double min_n_t = 1.0 / 64.0;  // N_T below 1 gives delta above 1 for flat posteriors
  int max_K = 16;
};

namespace detail {

/// log of the mean of exp(x) without overflow.
inline double log_mean_exp(const std::vector<double>& x) {
  const double top = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - top);
  return top + std::log(s / static_cast<double>(x.size()));
}

/// log Z_i for Z_i = integral of pi^beta_i, up to a constant. The path from
/// beta = 1 to the hottest level is cut into auxiliary inverse temperatures
/// no more than a factor `max_ratio` apart; the target is held at each in
/// turn (the first fifth of each run discarded) and neighbours are joined by
/// the geometric bridge log Z_b / Z_a = log E_a[pi^(d/2)] - log E_b[pi^(-d/2)],
/// d = b - a.
template <typename Target>
std::vector<double> bridge_log_z(Target& target, const TemperingLadder& ladder, int iters, Rng& rng,
                                 double max_ratio = 1.15) {
  const auto T = static_cast<std::size_t>(ladder.T);
  std::vector<double> path{ladder.betas[0]};
  std::vector<std::size_t> at_level{0};
  for (std::size_t i = 0; i + 1 < T; ++i) {
    const double ratio = ladder.betas[i] / ladder.betas[i + 1];
    const int pieces = std::max(1, static_cast<int>(std::ceil(std::log(ratio) / std::log(max_ratio))));
    for (int k = 1; k <= pieces; ++k) path.push_back(ladder.betas[i] * std::pow(ratio, -static_cast<double>(k) / pieces));
    at_level.push_back(path.size() - 1);
  }
  const int per_beta = std::max(10, iters / static_cast<int>(path.size()));
  const int skip = per_beta / 5;
  std::vector<std::vector<double>> lp(path.size());
  for (std::size_t b = 0; b < path.size(); ++b) {
    for (int it = 0; it < per_beta; ++it) {
      target.sweep(path[b], rng);
      if (it >= skip) lp[b].push_back(target.log_posterior());
    }
  }
  std::vector<double> log_z_path(path.size(), 0.0);
  for (std::size_t b = 0; b + 1 < path.size(); ++b) {
    const double d = path[b + 1] - path[b];
    std::vector<double> fwd(lp[b].size()), back(lp[b + 1].size());
    std::transform(lp[b].begin(), lp[b].end(), fwd.begin(), [&](double l) { return 0.5 * d * l; });
    std::transform(lp[b + 1].begin(), lp[b + 1].end(), back.begin(),
                   [&](double l) { return -0.5 * d * l; });
    log_z_path[b + 1] = log_z_path[b] + log_mean_exp(fwd) - log_mean_exp(back);
  }
  std::vector<double> log_z(T);
  for (std::size_t i = 0; i < T; ++i) log_z[i] = log_z_path[at_level[i]];
  return log_z;
}

inline bool all_visited(const std::vector<long>& counts) {
  return std::none_of(counts.begin(), counts.end(), [](long c) { return c == 0; });
}

/// Level weights for the current spacing (in counts mode an unvisited level
/// in the equal-weight pre-run fails at once), then `refine_rounds` passes of
/// w_i <- w_i / n_i of doubling length. The returned flag and the report describe a final
/// pre-run with the fitted weights; success means it visited every level.
template <typename Target>
bool fit_weights(Target& target, TemperingLadder& ladder, const TuneConfig& tc, Rng& rng,
                 TuningReport& report) {
  std::fill(ladder.log_weights.begin(), ladder.log_weights.end(), 0.0);
  auto normalize = [&] {
    const double shift = ladder.log_weights[0];
    for (double& w : ladder.log_weights) w -= shift;
  };
  auto divide_by_counts = [&](const std::vector<long>& counts) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      ladder.log_weights[i] -= std::log(static_cast<double>(std::max(counts[i], 1L)));
    }
  };
  if (tc.weights == WeightMethod::bridge) {
    const std::vector<double> log_z = bridge_log_z(target, ladder, tc.pre_iters, rng);
    for (std::size_t i = 0; i < log_z.size(); ++i) ladder.log_weights[i] = -log_z[i];
    ladder.level = 0;
  } else {
    const PreRun r = pre_run(target, ladder, tc.pre_iters, rng);
    ++report.pre_runs;
    if (!all_visited(r.counts)) {
      report.counts = r.counts;
      report.swap_accept_rate = r.accept;
      return false;
    }
    divide_by_counts(r.counts);
  }
  normalize();
  PreRun r = pre_run(target, ladder, tc.pre_iters, rng);
  ++report.pre_runs;
  // Each refinement pass doubles the run length: the counts of a short run
  // are dominated by the autocorrelation of the level process.
  int iters = tc.pre_iters;
  for (int round = 0; round < tc.refine_rounds && all_visited(r.counts); ++round) {
    divide_by_counts(r.counts);
    normalize();
    iters *= 2;
    r = pre_run(target, ladder, iters, rng);
    ++report.pre_runs;
  }
  report.counts = r.counts;
  report.swap_accept_rate = r.accept;
  return all_visited(r.counts);
}

}  // namespace detail

/// Chooses the spacing delta = 1 / sqrt(N_T) from the swap acceptance of a
/// weighted pre-run, then fixes the weights; delta shrinks to
/// 1 / (K sqrt(N_T)), K = 2, 3, ..., while some level stays unvisited. The
/// target is advanced in place by the pre-runs.
template <typename Target>
std::pair<TemperingLadder, TuningReport> tune(const TemperingLadder& initial, Target& target,
                                              const TuneConfig& tc, Rng& rng) {
  detail::require(tc.pre_iters >= 1, "tempering", "pre_iters", "pre-run length must be positive");
  TuningReport report;
  report.pre_run_iters = tc.pre_iters;
  TemperingLadder ladder = initial;
  if (ladder.T == 1) {
    ladder.tuned = true;
    report.counts = {0};
    return {ladder, report};
  }

  // N_T starts at T and is doubled (or halved) until the acceptance is
  // inside the band; a change of direction settles on the geometric midpoint.
  double n_t = ladder.T;
  int last_dir = 0;
  bool settled = false;
  for (int step = 0; step < tc.max_spacing_steps; ++step) {
    ladder = detail::respaced(ladder, 1.0 / std::sqrt(n_t));
    const bool ok = detail::fit_weights(target, ladder, tc, rng, report);
    int dir = 0;
    if (!ok || report.swap_accept_rate < tc.accept_lo) dir = 1;
    if (ok && report.swap_accept_rate > tc.accept_hi && n_t > tc.min_n_t) dir = -1;
    if (dir == 0) {
      settled = ok;
      break;
    }
    if (last_dir != 0 && dir != last_dir) {
      n_t = std::sqrt(n_t * (dir > 0 ? 2.0 * n_t : 0.5 * n_t));
      break;
    }
    n_t = dir > 0 ? 2.0 * n_t : std::max(tc.min_n_t, 0.5 * n_t);
    last_dir = dir;
  }
  report.N_T = n_t;

  for (int K = 1; !settled; ++K) {
    if (K > tc.max_K) {
      std::ostringstream os;
      os << "level weights could not be estimated: some level unvisited up to K = " << tc.max_K
         << " (N_T = " << report.N_T << ")";
      throw Error(ErrorKind::numeric_failure, "tempering", "all_levels_visited", os.str());
    }
    ladder = detail::respaced(ladder, 1.0 / (K * std::sqrt(n_t)));
    report.K = K;
    settled = detail::fit_weights(target, ladder, tc, rng, report);
  }
  ladder.level = 0;
  ladder.tuned = true;
  return {ladder, report};
}

/// Tempered driver: within-level sweeps at beta of the current level, a level
/// move after each sweep, and recording of level-1 (beta = 1) states only.
/// With T = 1 it consumes exactly the draws of run_sampler.
template <typename Sampler>
McmcChain run_tempered(Sampler& sampler, const ModelConfig& cfg, TemperingLadder& ladder, Rng& rng,
                       std::vector<long>* occupancy = nullptr) {
  McmcChain chain;
  chain.untuned_ladder = ladder.T > 1 && !ladder.tuned;
  if (occupancy) occupancy->assign(static_cast<std::size_t>(ladder.T), 0);
  long swaps = 0, accepted = 0;
  for (int it = 0; it < cfg.n_iter; ++it) {
    sampler.sweep(ladder.betas[static_cast<std::size_t>(ladder.level)], rng);
    if (ladder.T > 1) {
      ++swaps;
      accepted += swap_step(ladder, sampler.log_posterior(), rng) ? 1 : 0;
    }
    if (it < cfg.burn_in) {
      if (cfg.adapt && (it + 1) % cfg.adapt_window == 0) sampler.adapt();
      if (it + 1 == cfg.burn_in) sampler.reset_counts();
      continue;
    }
    if (occupancy) ++(*occupancy)[static_cast<std::size_t>(ladder.level)];
    if (ladder.level == 0 && (it - cfg.burn_in) % cfg.thin == 0) sampler.record(chain, it);
  }
  sampler.fill_accept(chain.accept);
  chain.accept.swap = swaps ? static_cast<double>(accepted) / static_cast<double>(swaps) : 0.0;
  return chain;
}

struct TemperedResult {
  McmcChain chain;
  PosteriorSummary summary;
  TemperingLadder ladder;
  std::vector<long> occupancy;  // post-burn-in level visits
};

namespace detail {

template <typename Sampler>
TemperedResult tempered_run(Sampler sampler, const ModelConfig& cfg, TemperingLadder ladder) {
  Rng rng = make_rng(cfg.seed);
  TemperedResult r;
  r.chain = run_tempered(sampler, cfg, ladder, rng, &r.occupancy);
  detail::require(r.chain.size() > 0, "tempering", "level_one_samples",
                  "no beta = 1 samples were recorded; lengthen the run or retune the ladder");
  r.summary = summarize(r.chain);
  r.ladder = std::move(ladder);
  return r;
}

}  // namespace detail

[[nodiscard]] inline TemperedResult tempered_register(const Srvf& q1, const Srvf& q2,
                                                      const ModelConfig& cfg,
                                                      TemperingLadder ladder) {
  return detail::tempered_run(BayesSampler::pairwise(q1, q2, cfg), cfg, std::move(ladder));
}

[[nodiscard]] inline TemperedResult tempered_register(std::span<const Srvf> qs,
                                                      const ModelConfig& cfg,
                                                      TemperingLadder ladder) {
  return detail::tempered_run(BayesSampler::multiple(qs, cfg), cfg, std::move(ladder));
}

/// Builds a T-level ladder and tunes it on the pairwise posterior of (q1, q2)
/// using a stream derived from cfg.seed.
[[nodiscard]] inline std::pair<TemperingLadder, TuningReport> tune_pairwise(
    const Srvf& q1, const Srvf& q2, const ModelConfig& cfg, int T = 10, const TuneConfig& tc = {}) {
  BayesSampler target = BayesSampler::pairwise(q1, q2, cfg);
  Rng rng = make_rng(cfg.seed, 1);
  return tune(build_ladder(T, 1.0 / std::sqrt(static_cast<double>(T))), target, tc, rng);
}

}  // namespace elastica
