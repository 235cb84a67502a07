// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("elastica_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run cli(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = env + " " + std::string(ELASTICA_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

/// Two-peak curve sampled at 101 times in [20, 220] minutes, peaks shifted by `shift`.
void write_two_peak(std::ostream& os, const std::string& id, double shift) {
  for (int i = 0; i <= 100; ++i) {
    const double t = 20.0 + 2.0 * i;
    const double v = std::exp(-std::pow((t - 90.0 - shift) / 12.0, 2)) +
                     0.6 * std::exp(-std::pow((t - 150.0 - 0.5 * shift) / 10.0, 2)) +
                     0.8 * std::exp(-std::pow((t - 185.0 - 0.3 * shift) / 8.0, 2));
    os << id << ',' << t << ',' << v << '\n';
  }
}

}  // namespace

TEST_CASE("register-pair on identical inputs gives a near-identity warp", "[cli]") {
  const fs::path dir = work_dir("pair");
  {
    std::ofstream a(dir / "a.csv"), b(dir / "b.csv");
    a << "t,v\n";
    b << "t,v\n";
    for (int i = 0; i <= 100; ++i) {
      const double t = 20.0 + 2.0 * i, v = std::exp(-std::pow((t - 110.0) / 20.0, 2));
      a << t << ',' << v << '\n';
      b << t << ',' << v << '\n';
    }
  }
  const std::string args = "register-pair -i " + (dir / "a.csv").string() + " -i " + (dir / "b.csv").string() +
                           " --desk --seed 11 -o ";
  const Run r = cli(dir, args + (dir / "out").string());
  REQUIRE(r.code == 0);
  const json res = read_json(dir / "out" / "result.json");
  CHECK(res["mean_warp_identity_deviation"].get<double>() < 0.02);
  CHECK(res["untuned_ladder"] == false);
  for (const char* f : {"chain.csv", "bands.csv", "registered.csv", "summary.json"}) {
    CHECK(fs::exists(dir / "out" / f));
  }
  CHECK(slurp(dir / "out" / "bands.csv").rfind("id,t,gamma_mean,lower,upper,t_original", 0) == 0);

  // Fixed seed: identical numeric outputs; the environment seed is a fallback.
  REQUIRE(cli(dir, args + (dir / "again").string()).code == 0);
  CHECK(slurp(dir / "out" / "chain.csv") == slurp(dir / "again" / "chain.csv"));
  CHECK(slurp(dir / "out" / "summary.json") == slurp(dir / "again" / "summary.json"));
  const std::string no_seed = "register-pair -i " + (dir / "a.csv").string() + " -i " + (dir / "b.csv").string() +
                              " --desk -o ";
  REQUIRE(cli(dir, no_seed + (dir / "env").string(), "ELASTICA_SEED=11").code == 0);
  CHECK(slurp(dir / "out" / "chain.csv") == slurp(dir / "env" / "chain.csv"));
  REQUIRE(cli(dir, no_seed + (dir / "other").string(), "ELASTICA_SEED=12").code == 0);
  CHECK(slurp(dir / "out" / "chain.csv") != slurp(dir / "other" / "chain.csv"));
}

TEST_CASE("errors are reported as JSON with exit codes", "[cli]") {
  const fs::path dir = work_dir("errors");
  std::ofstream(dir / "dup.csv") << "t,v\n0,1\n1,2\n1,3\n";
  std::ofstream(dir / "ok.csv") << "t,v\n0,1\n1,2\n2,3\n";
  std::ofstream(dir / "zero.csv") << "t,v\n0,0\n1,0\n2,0\n3,0\n";

  Run r = cli(dir, "register-pair -i " + (dir / "dup.csv").string() + " -i " + (dir / "ok.csv").string() + " --desk");
  CHECK(r.code == 2);
  json e = json::parse(r.err)["error"];
  CHECK(e["module"] == "ingest_preprocess");
  CHECK(e["invariant"] == "duplicate_t");
  CHECK(e["message"].get<std::string>().find("line 4") != std::string::npos);

  r = cli(dir, "register-pair -i " + (dir / "ok.csv").string() + " --desk");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"]["invariant"] == "input_count");

  r = cli(dir, "register-pair --knots");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"]["module"] == "cli");

  std::ofstream(dir / "bad.json") << R"({"no-such-flag": 1})";
  r = cli(dir, "simulate --config " + (dir / "bad.json").string());
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"]["invariant"] == "config_key");

  // A zero function has no unit-norm SRVF: numeric failure.
  r = cli(dir, "register-pair -i " + (dir / "zero.csv").string() + " -i " + (dir / "ok.csv").string() +
                   " --unit-norm --desk -o " + (dir / "o").string());
  CHECK(r.code == 3);
  CHECK(json::parse(r.err)["error"]["kind"] == "numeric_failure");
}

TEST_CASE("simulate writes one row per example, n, sigma and estimator", "[cli]") {
  const fs::path dir = work_dir("simulate");
  // Desk grid of n and sigma, shortened chains.
  std::ofstream(dir / "cfg.json") << R"({"reps": 1, "iters": 300, "burn-in": 150})";
  const Run r = cli(dir, "simulate --desk --seed 3 --config " + (dir / "cfg.json").string() + " -o " +
                             (dir / "out").string());
  REQUIRE(r.code == 0);
  std::istringstream table(slurp(dir / "out" / "study.csv"));
  std::string line;
  std::getline(table, line);
  CHECK(line == "example,n,sigma,estimator,mean_sq_dist,se");
  int rows = 0;
  while (std::getline(table, line)) {
    ++rows;
    CHECK(line.rfind("I,", 0) == 0);
  }
  CHECK(rows == 3 * 2 * 2);
  CHECK(fs::exists(dir / "out" / "study_plot.csv"));
}

TEST_CASE("flags override the config file", "[cli]") {
  const fs::path dir = work_dir("config");
  std::ofstream(dir / "cfg.json") << R"({"reps": 1, "iters": 300, "burn-in": 150, "n-values": [3], "sigma-values": [0.2, 0.4]})";
  const Run r = cli(dir, "simulate --seed 3 --config " + (dir / "cfg.json").string() + " --sigma-values 0.3 -o " +
                             (dir / "out").string());
  REQUIRE(r.code == 0);
  const std::string table = slurp(dir / "out" / "study.csv");
  CHECK(table.find("I,3,0.3,quotient") != std::string::npos);
  CHECK(table.find("0.2") == std::string::npos);
}

TEST_CASE("a strong warp prior narrows the credible bands", "[cli]") {
  const fs::path dir = work_dir("prior");
  {
    std::ofstream f(dir / "multi.csv");
    f << "id,t,v\n";
    const double shifts[] = {-9.0, -3.0, 4.0, 10.0};
    for (int s = 0; s < 4; ++s) write_two_peak(f, "s" + std::to_string(s), shifts[s]);
  }
  const std::string base = "register-multi -i " + (dir / "multi.csv").string() + " --desk --knots 10 --seed 21";
  REQUIRE(cli(dir, base + " --prior-a 1 -o " + (dir / "a1").string()).code == 0);
  REQUIRE(cli(dir, base + " --prior-a 100 -o " + (dir / "a100").string()).code == 0);
  const double w1 = read_json(dir / "a1" / "result.json")["mean_band_width"].get<double>();
  const double w100 = read_json(dir / "a100" / "result.json")["mean_band_width"].get<double>();
  CHECK(w100 < w1);
  CHECK(fs::exists(dir / "a1" / "mean_srvf.csv"));
}

TEST_CASE("spike tables and karcher-mean outputs", "[cli]") {
  const fs::path dir = work_dir("spikes");
  {
    std::ofstream f(dir / "multi.csv");
    f << "id,t,v\n";
    write_two_peak(f, "x", -6.0);
    write_two_peak(f, "y", 6.0);
  }
  std::ofstream(dir / "key.csv") << "id,position\nx,84\ny,96\n";
  const Run r = cli(dir, "karcher-mean -i " + (dir / "multi.csv").string() + " --spikes " +
                             (dir / "key.csv").string() + " -o " + (dir / "out").string());
  REQUIRE(r.code == 0);
  const json res = read_json(dir / "out" / "result.json");
  const auto trace = res["objective_trace"].get<std::vector<double>>();
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
  // Both first peaks land at the same aligned time.
  std::istringstream table(slurp(dir / "out" / "spikes.csv"));
  std::string line;
  std::getline(table, line);
  CHECK(line == "id,spike,original,original_index,aligned,aligned_index");
  std::vector<double> aligned;
  while (std::getline(table, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 5; ++c) std::getline(ss, cell, ',');
    aligned.push_back(std::stod(cell));
  }
  REQUIRE(aligned.size() == 2);
  CHECK(std::abs(aligned[0] - aligned[1]) < 4.0);
}

TEST_CASE("classify and preprocess", "[cli]") {
  const fs::path dir = work_dir("classify");
  Run r = cli(dir, "classify --synthetic 8 --metric procrustes --splits 2 --seed 4 -o " + (dir / "out").string());
  REQUIRE(r.code == 0);
  const json res = read_json(dir / "out" / "result.json");
  CHECK(res["split_accuracy"].size() == 2);
  CHECK(res["accuracy"].get<double>() >= 0.9);
  CHECK(slurp(dir / "out" / "confusion.csv").rfind("true\\predicted,", 0) == 0);
  CHECK(fs::exists(dir / "out" / "aligned.csv"));

  {
    std::ofstream f(dir / "tic.csv");
    f << "t,v\n";
    for (int i = 0; i <= 200; ++i) {
      const double t = 20.0 + i;
      f << t << ',' << 5.0 + 0.01 * t + 3.0 * std::exp(-std::pow((t - 100.0) / 2.0, 2)) << '\n';
    }
  }
  r = cli(dir, "preprocess -i " + (dir / "tic.csv").string() + " --points 100 --format json -o " +
                   (dir / "pre").string());
  REQUIRE(r.code == 0);
  const json pre = read_json(dir / "pre" / "preprocessed.json");
  const auto values = pre["items"][0]["values"].get<std::vector<double>>();
  CHECK(values.size() == 101);
  CHECK(std::distance(values.begin(), std::max_element(values.begin(), values.end())) == 40);
  for (double v : values) CHECK(v >= 0.0);
}
