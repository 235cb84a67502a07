// Apache License, Version 2.0, refer to LICENSE.txt
//
// Nearest-mean classification of planar landmark curves with the
// Procrustes metric and with the elastic metric (Karcher group means).

#include <cstdio>

#include "elastica/elastica.hpp"

using namespace elastica;

int main() {
  Rng rng = make_rng(5);
  const LandmarkDataset data = synthetic_landmark_dataset(15, 0.05, rng);

  ClassifierConfig cfg;
  for (ShapeMetric metric : {ShapeMetric::procrustes, ShapeMetric::elastic}) {
    cfg.metric = metric;
    cfg.elastic_mean = ElasticMean::karcher;
    const auto reports = resampled_accuracy(data, cfg, 3, 0.3, 11);
    std::printf("%s metric:\n", metric == ShapeMetric::procrustes ? "Procrustes" : "elastic");
    for (const auto& r : reports) {
      std::printf("  accuracy %.3f, confusion", r.accuracy());
      for (const auto& row : r.confusion) {
        std::printf(" [");
        for (long c : row) std::printf(" %ld", c);
        std::printf(" ]");
      }
      std::printf("\n");
    }
  }

  const GpaResult gpa = gpa_mean(data.configs);
  std::printf("GPA over all curves: %d iterations, objective %.5f -> %.5f\n", gpa.iterations,
              gpa.objective_trace.front(), gpa.objective_trace.back());
  return 0;
}
