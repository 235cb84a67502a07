// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <sstream>
#include <vector>

#include "elastica/simulation.hpp"
#include "support/stats.hpp"

using namespace elastica;

namespace {

std::vector<double> column(const Srvf& q) {
  return {q.values().data(), q.values().data() + q.size()};
}

int local_maxima(const std::vector<double>& v) {
  int count = 0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] > v[i - 1] && v[i] >= v[i + 1]) ++count;
  }
  return count;
}

double trapezoid(const Srvf& q) {
  const auto& t = q.grid().points();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    s += 0.5 * (t[i + 1] - t[i]) *
         (q.values()(static_cast<Eigen::Index>(i), 0) + q.values()(static_cast<Eigen::Index>(i) + 1, 0));
  }
  return s;
}

}  // namespace

TEST_CASE("example means have unit norm and the expected shapes", "[simulation]") {
  for (Example e : {Example::I, Example::II, Example::III, Example::IV}) {
    const Srvf mu = example_mean(e);
    CHECK(mu.size() == example_points(e));
    CHECK(l2_norm(mu) == Catch::Approx(1.0).margin(1e-8));
    CHECK(l2_norm(example_mean(e, 200)) == Catch::Approx(1.0).margin(1e-8));
  }
  const std::vector<double> one = column(example_mean(Example::I, 101));
  CHECK(std::max_element(one.begin(), one.end()) - one.begin() == 40);
  CHECK(local_maxima(one) == 1);
  const std::vector<double> four = column(example_mean(Example::IV, 101));
  CHECK(local_maxima(four) == 2);
  CHECK(four[25] > four[75]);
  CHECK(local_maxima(column(example_mean(Example::II, 201))) == 3);
  // Biphasic: positive rise then a negative dip.
  const std::vector<double> three = column(example_mean(Example::III));
  CHECK(*std::max_element(three.begin(), three.end()) > 0.0);
  CHECK(*std::min_element(three.begin(), three.end()) < 0.0);

  CHECK(parse_example("3") == Example::III);
  CHECK(parse_example("IV") == Example::IV);
  CHECK(example_name(Example::II) == "II");
  CHECK_THROWS_AS(parse_example("V"), Error);
}

TEST_CASE("symmetric mixture gives a symmetric example II", "[simulation]") {
  const std::vector<NormalComponent> mix{{0.3, 0.25, 0.07}, {0.4, 0.5, 0.08}, {0.3, 0.75, 0.07}};
  const std::vector<double> v = column(example_mean(Example::II, 101, mix));
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == Catch::Approx(v[v.size() - 1 - i]).margin(1e-12));
}

TEST_CASE("example III integrates back near its start", "[simulation]") {
  // Antiderivative on unit time: F(t) = c h(32 t) / 32 with h the
  // double-Gamma response, evaluated with independent Gamma densities.
  const boost::math::gamma_distribution<double> g6(6.0), g16(16.0);
  auto h = [&](double s) { return boost::math::pdf(g6, s) - boost::math::pdf(g16, s) / 6.0; };
  const ExampleSrvf mu(Example::III, 2001);
  const Srvf q = mu.sampled();
  const double c = mu(0.2) / example_function(Example::III, 0.2);
  const double exact = c * (h(32.0) - h(1e-300)) / 32.0;
  CHECK(trapezoid(q) == Catch::Approx(exact).margin(1e-4));
  CHECK(std::abs(trapezoid(example_mean(Example::III))) < 0.1);
}

TEST_CASE("warp draws follow the Dirichlet moments", "[simulation]") {
  Rng rng = make_rng(60);
  const int M = 10, draws = 10000;
  std::vector<double> sums(M, 0.0);
  for (int d = 0; d < draws; ++d) {
    const WarpFunction g = sample_warp(1.0, M, rng);
    const auto p = g.increments();
    REQUIRE(p.size() == static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
      REQUIRE(p[static_cast<std::size_t>(i)] > 0.0);
      sums[static_cast<std::size_t>(i)] += p[static_cast<std::size_t>(i)];
    }
    REQUIRE(g.knots().front() == 0.0);
    REQUIRE(g.knots().back() == 1.0);
  }
  // Var p_i = (1/M)(1 - 1/M) / (M a + 1).
  const double sd = std::sqrt(0.1 * 0.9 / 11.0 / draws);
  for (double s : sums) CHECK(std::abs(s / draws - 0.1) < 3.0 * sd);

  for (double v : sample_warp(1e6, M, rng).increments()) CHECK(std::abs(v - 0.1) < 1e-2);
  CHECK_THROWS_AS(sample_warp(0.0, M, rng), Error);
  CHECK_THROWS_AS(sample_warp(1.0, 0, rng), Error);
}

TEST_CASE("simulated samples", "[simulation]") {
  const ExampleSrvf exact(Example::I);
  const Srvf mu = exact.sampled();
  Rng rng = make_rng(61);

  SECTION("noise-free near-identity warps return the mean") {
    for (const Srvf& q : simulate_sample(mu, 4, 0.0, 1e12, 10, rng)) {
      CHECK((q.values() - mu.values()).cwiseAbs().maxCoeff() < 1e-4);
    }
  }

  SECTION("noise-free draws are the warped mean") {
    std::vector<WarpFunction> gs;
    const auto qs = simulate_sample(exact, 3, 0.0, 1.0, 10, rng, &gs);
    REQUIRE(gs.size() == 3);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      for (Eigen::Index j = 0; j < qs[i].size(); ++j) {
        const double t = qs[i].grid()[j];
        CHECK(qs[i].values()(j, 0) == Catch::Approx(std::sqrt(gs[i].derivative(t)) * exact(gs[i](t))));
      }
    }
  }

  SECTION("noise calibration") {
    const double sigma = 0.3;
    const int draws = 1000;
    const auto qs = simulate_sample(mu, draws, sigma, 1e12, 10, rng);
    double pooled = 0.0;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
      std::vector<double> e;
      for (const auto& q : qs) e.push_back(q.values()(j, 0) - mu.values()(j, 0));
      const double sd = std::sqrt(testing::variance(e));
      // Relative standard error of a sample SD is about 1 / sqrt(2 (N - 1)).
      CHECK(std::abs(sd / sigma - 1.0) < 4.5 / std::sqrt(2.0 * (draws - 1)));
      pooled += sd / static_cast<double>(mu.size());
    }
    CHECK(std::abs(pooled / sigma - 1.0) < 0.05);
  }

  SECTION("Dirichlet(1) draws differ") {
    const auto qs = simulate_sample(exact, 5, 0.05, 1.0, 10, rng);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      for (std::size_t j = i + 1; j < qs.size(); ++j) CHECK(l2_distance(qs[i], qs[j]) > 0.0);
    }
  }

  CHECK_THROWS_AS(simulate_sample(mu, 0, 0.1, 1.0, 10, rng), Error);
  CHECK_THROWS_AS(simulate_sample(mu, 2, -0.1, 1.0, 10, rng), Error);
}

TEST_CASE("study tables are reproducible and schedule independent", "[simulation]") {
  StudyConfig cfg;
  cfg.n_values = {3, 4};
  cfg.sigma_values = {0.3};
  cfg.reps = 2;
  cfg.n_iter = 300;
  cfg.burn_in = 100;
  cfg.seed = 62;
  const StudyResult a = run_study(cfg);
  cfg.workers = 3;
  const StudyResult b = run_study(cfg);
  REQUIRE(a.cells.size() == 2);
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    CHECK(a.cells[c].quotient == b.cells[c].quotient);
    CHECK(a.cells[c].ambient == b.cells[c].ambient);
    for (double d : a.cells[c].quotient) CHECK(d >= 0.0);
    for (double d : a.cells[c].ambient) CHECK(d >= 0.0);
  }
  CHECK(a.cell(4, 0.3).n == 4);
  CHECK_THROWS_AS(a.cell(5, 0.3), Error);
  // Repetitions use separate streams.
  CHECK(a.cells[0].quotient[0] != a.cells[0].quotient[1]);

  std::ostringstream csv, plot;
  write_study_csv(csv, a);
  write_study_plot(plot, a);
  const std::string text = csv.str();
  CHECK(text.rfind("example,n,sigma,estimator,mean_sq_dist,se\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  CHECK(plot.str().find("I,0.3,ambient,") != std::string::npos);

  StudyConfig bad;
  bad.reps = 0;
  CHECK_THROWS_AS(run_study(bad), Error);
  bad = StudyConfig{};
  bad.sigma_values = {0.0};
  CHECK_THROWS_AS(run_study(bad), Error);
}
