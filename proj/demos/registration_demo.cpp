// Apache License, Version 2.0, refer to LICENSE.txt
//
// Registers a simulated sample of warped, noisy copies of a template two
// ways (Karcher mean by dynamic programming and the Bayesian posterior
// mean), then aligns one pair with and without tempering.

#include <cstdio>
#include <vector>

#include "elastica/elastica.hpp"

using namespace elastica;

int main() {
  const ExampleSrvf truth(Example::I);
  const Srvf mu = truth.sampled();
  Rng rng = make_rng(2024);
  const std::vector<Srvf> qs = simulate_sample(truth, 10, 0.1, 1.0, 10, rng);

  const KarcherResult quotient = karcher_mean(qs);
  std::printf("Karcher mean: %d iterations, objective %.5f -> %.5f\n", quotient.iterations,
              quotient.objective_trace.front(), quotient.objective_trace.back());

  ModelConfig cfg;
  cfg.M = 10;
  cfg.n_iter = 6000;
  cfg.burn_in = 3000;
  cfg.seed = 7;
  const BayesResult ambient = register_multiple(qs, cfg);
  std::printf("Posterior mean: warp acceptance %.2f, average band width %.4f\n", ambient.summary.accept.warp,
              ambient.summary.mean_band_width());

  std::printf("squared elastic distance to the truth: quotient %.5f, ambient %.5f\n",
              std::pow(elastic_distance(quotient.mean, mu), 2),
              std::pow(elastic_distance(*ambient.summary.mean_function, mu), 2));

  // Pairwise registration, plain and with a tuned four-level ladder.
  ModelConfig pair_cfg = cfg;
  pair_cfg.n_iter = 4000;
  pair_cfg.burn_in = 2000;
  const BayesResult plain = register_pair(qs[0], qs[1], pair_cfg);
  TuneConfig tc;
  tc.pre_iters = 4000;
  const auto [ladder, report] = tune_pairwise(qs[0], qs[1], pair_cfg, 4, tc);
  const TemperedResult tempered = tempered_register(qs[0], qs[1], pair_cfg, ladder);
  std::printf("pair: plain residual %.4f, tempered residual %.4f (swap acceptance %.2f, delta %.3f)\n",
              residual_ss(qs[0], qs[1], plain.summary.warps[0].mean),
              residual_ss(qs[0], qs[1], tempered.summary.warps[0].mean), tempered.chain.accept.swap,
              ladder.delta);
  std::printf("mean warp knots:");
  for (double k : tempered.summary.warps[0].mean.knots()) std::printf(" %.3f", k);
  std::printf("\n");
  return 0;
}
