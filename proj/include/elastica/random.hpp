// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace elastica {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; maps (seed, stream) to a well-mixed seed so that
/// parallel chains and repetitions get independent, reproducible streams.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed,
                                               std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

[[nodiscard]] inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

[[nodiscard]] inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma draw with shape/rate parameterization.
[[nodiscard]] inline double gamma_rate(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

/// Symmetric Dirichlet(a) draw of dimension m via normalized Gamma variates.
[[nodiscard]] inline std::vector<double> dirichlet(double a, int m, Rng& rng) {
  std::gamma_distribution<double> g(a, 1.0);
  std::vector<double> x(static_cast<std::size_t>(m));
  double total = 0.0;
  for (auto& v : x) {
    v = g(rng);
    total += v;
  }
  for (auto& v : x) v /= total;
  return x;
}

}  // namespace elastica
