// Apache License, Version 2.0, refer to LICENSE.txt
//
// elastica-cli: registration, mean estimation, simulation, classification
// and preprocessing jobs. Exit codes: 0 success, 2 invalid input, 3 numeric
// failure. Failures print a JSON error record on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "elastica/elastica.hpp"

namespace fs = std::filesystem;
using namespace elastica;
using nlohmann::json;

namespace {

constexpr int exit_invalid = 2;
constexpr int exit_numeric = 3;

Error cli_error(const std::string& invariant, const std::string& msg) {
  return {ErrorKind::invalid_input, "cli", invariant, msg};
}

struct Options {
  std::vector<std::string> inputs;
  std::string output = ".";
  std::string config;
  std::uint64_t seed = 1;
  int workers = 0;
  bool desk = false;

  // Bayesian model and tempering.
  double prior_a = 1.0, alpha = 1.0, beta = 1000.0;
  int knots = 20, iters = 50000, burn_in = 25000, thin = 10;
  int temper = 10;
  double delta = 0.0;  // 0: 1 / sqrt(T)
  bool no_tune = false;
  int tune_iters = 50000;
  std::string rotation = "on";
  bool unit_norm = false;
  int points = 0;  // resampling intervals; 0 keeps a common grid
  std::string spikes;

  // Simulation.
  std::string example = "I";
  std::vector<int> n_values{5, 10, 20, 30, 50, 100, 200};
  std::vector<double> sigma_values{0.1, 0.3, 0.5, 1.0};
  int reps = 100;
  double warp_a = 1.0;

  // Classification.
  std::string metric = "elastic";
  std::string elastic_mean = "bayesian";
  int splits = 10;
  double test_fraction = 0.3;
  int synthetic = 0;  // per-class count of a synthetic dataset
  double noise = 0.05;

  // Preprocessing.
  double lambda_base = 1e6, lambda_smooth = 10.0, tail_start = 0.75;
  std::string format = "csv";
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--input,-i", o.inputs, "Input file(s)");
  sub->add_option("--output,-o", o.output, "Output directory")->capture_default_str();
  sub->add_option("--config", o.config, "JSON file of flag values (flags override it)");
  sub->add_option("--seed", o.seed, "RNG seed (fallback: ELASTICA_SEED, then 1)");
  sub->add_option("--workers", o.workers, "Worker threads (0: all cores)")->capture_default_str();
  sub->add_flag("--desk", o.desk, "Desk-scale defaults for unset run-length flags");
}

void add_model(CLI::App* sub, Options& o) {
  sub->add_option("--prior-a", o.prior_a, "Dirichlet concentration a")->capture_default_str();
  sub->add_option("--alpha", o.alpha, "Gamma shape for kappa")->capture_default_str();
  sub->add_option("--beta", o.beta, "Gamma scale for kappa")->capture_default_str();
  sub->add_option("--knots", o.knots, "Warp segments M")->capture_default_str();
  sub->add_option("--iters", o.iters, "MCMC sweeps")->capture_default_str();
  sub->add_option("--burn-in", o.burn_in, "Burn-in sweeps")->capture_default_str();
  sub->add_option("--thin", o.thin, "Thinning interval")->capture_default_str();
  sub->add_option("--rotation", o.rotation, "Rotation for curves")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  sub->add_flag("--unit-norm", o.unit_norm, "Scale SRVFs to unit norm");
  sub->add_option("--points", o.points, "Resample inputs to this many intervals");
  sub->add_option("--spikes", o.spikes, "Spike answer key CSV (id,position in original units)");
}

void add_tempering(CLI::App* sub, Options& o) {
  sub->add_option("--temper", o.temper, "Tempering levels T (1 disables)")->capture_default_str();
  sub->add_option("--delta", o.delta, "Initial ladder spacing (default 1/sqrt(T))");
  sub->add_flag("--no-tune", o.no_tune, "Use the equal-weight ladder without tuning");
  sub->add_option("--tune-iters", o.tune_iters, "Sweeps per tuning pre-run")->capture_default_str();
}

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

/// Fills options not given on the command line from the JSON config.
void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw cli_error("config_json", path + ": " + e.what());
  }
  if (!j.is_object()) throw cli_error("config_json", path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw cli_error("config_key", path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(json_scalar(v));
    } else {
      opt->add_result(json_scalar(value));
    }
    opt->run_callback();
  }
}

/// Sets an option to `value` unless the user or the config already did.
template <typename T>
void default_if_unset(CLI::App* sub, const std::string& name, T& field, T value) {
  if (sub->get_option(name)->count() == 0) field = value;
}

void finish_options(CLI::App* sub, Options& o) {
  if (!o.config.empty()) apply_config(sub, o.config);
  if (sub->get_option("--seed")->count() == 0) {
    if (const char* env = std::getenv("ELASTICA_SEED")) {
      try {
        std::size_t used = 0;
        o.seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw cli_error("seed", "ELASTICA_SEED is not an unsigned integer");
      }
    }
  }
  if (!o.desk) return;
  auto has = [&](const std::string& n) { return sub->get_option_no_throw(n) != nullptr; };
  if (has("--iters")) default_if_unset(sub, "--iters", o.iters, 10000);
  if (has("--burn-in")) default_if_unset(sub, "--burn-in", o.burn_in, 5000);
  if (has("--thin")) default_if_unset(sub, "--thin", o.thin, 10);
  if (has("--temper")) default_if_unset(sub, "--temper", o.temper, 1);
  if (has("--tune-iters")) default_if_unset(sub, "--tune-iters", o.tune_iters, 5000);
  if (has("--reps")) default_if_unset(sub, "--reps", o.reps, 20);
  if (has("--n-values")) default_if_unset(sub, "--n-values", o.n_values, std::vector<int>{5, 10, 20});
  if (has("--sigma-values")) default_if_unset(sub, "--sigma-values", o.sigma_values, std::vector<double>{0.1, 0.5});
  if (has("--splits")) default_if_unset(sub, "--splits", o.splits, 10);
}

// ---------------------------------------------------------------------------
// Shared helpers.

fs::path output_dir(const Options& o) {
  fs::path dir(o.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw cli_error("output_dir", "cannot create '" + o.output + "'");
  return dir;
}

std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw cli_error("output_dir", "cannot write '" + p.string() + "'");
  return out;
}

void write_json(const fs::path& p, const json& j) { open_output(p) << j.dump(2) << '\n'; }

Dataset load_inputs(const Options& o) {
  if (o.inputs.empty()) throw cli_error("input", "--input is required");
  Dataset d;
  for (const auto& path : o.inputs) {
    Dataset part = load_functions(path);
    for (auto& it : part.items) d.items.push_back(std::move(it));
    d.meta.source += (d.meta.source.empty() ? "" : ";") + part.meta.source;
  }
  d.meta.range = d.items.front().time;
  for (const auto& it : d.items) {
    d.meta.range.t0 = std::min(d.meta.range.t0, it.time.t0);
    d.meta.range.t1 = std::max(d.meta.range.t1, it.time.t1);
  }
  d.validate();
  // Registration needs one grid: resample when asked or when grids differ.
  int intervals = o.points;
  if (intervals == 0) {
    bool same = true;
    Eigen::Index longest = 0;
    for (const auto& it : d.items) {
      same = same && it.f.grid() == d.items[0].f.grid();
      longest = std::max(longest, it.f.size());
    }
    if (!same) intervals = static_cast<int>(longest) - 1;
  }
  return intervals > 0 ? resample(d, intervals, o.workers) : d;
}

std::vector<Srvf> to_srvfs(const Dataset& d, bool unit) {
  std::vector<Srvf> qs;
  for (const auto& it : d.items) {
    Srvf q = srvf_transform(it.f);
    qs.push_back(unit ? normalized(q) : q);
  }
  return qs;
}

std::vector<std::string> ids_of(const Dataset& d) {
  std::vector<std::string> ids;
  for (const auto& it : d.items) ids.push_back(it.id);
  return ids;
}

ModelConfig model_config(const Options& o) {
  ModelConfig cfg;
  cfg.a = o.prior_a;
  cfg.alpha = o.alpha;
  cfg.beta = o.beta;
  cfg.M = o.knots;
  cfg.n_iter = o.iters;
  cfg.burn_in = o.burn_in;
  cfg.thin = o.thin;
  cfg.rotation = o.rotation == "on";
  cfg.seed = o.seed;
  return cfg;
}

double identity_deviation(const WarpFunction& g) {
  double d = 0.0;
  for (int k = 0; k <= g.segments(); ++k) d = std::max(d, std::abs(g.knot(k) - static_cast<double>(k) / g.segments()));
  return d;
}

void write_srvf_csv(const fs::path& p, const Srvf& q) {
  std::ofstream out = open_output(p);
  out.precision(17);
  out << "t";
  for (int c = 0; c < q.dim(); ++c) out << ",q" << c + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    out << q.grid()[i];
    for (int c = 0; c < q.dim(); ++c) out << ',' << q.values()(i, c);
    out << '\n';
  }
}

void write_spikes_if_requested(const Options& o, const fs::path& dir, const Dataset& d,
                               const std::vector<WarpFunction>& warps) {
  if (o.spikes.empty()) return;
  std::ifstream in = open_input(o.spikes);
  const SpikeKey key = parse_spike_key(in, o.spikes);
  std::ofstream out = open_output(dir / "spikes.csv");
  write_spike_table(out, d, warps, key);
}

/// Bayesian registration, tempered when T > 1. `pairwise` registers item 1
/// onto item 0; otherwise all items onto a common mean.
int run_bayes(const Options& o, bool pairwise) {
  const Dataset d = load_inputs(o);
  if (pairwise && d.items.size() != 2) {
    throw cli_error("input_count", "register-pair needs exactly two functions, got " + std::to_string(d.items.size()));
  }
  const std::vector<Srvf> qs = to_srvfs(d, o.unit_norm);
  const ModelConfig cfg = model_config(o);
  const fs::path dir = output_dir(o);
  BayesSampler sampler = pairwise ? BayesSampler::pairwise(qs[0], qs[1], cfg) : BayesSampler::multiple(qs, cfg);

  json result{{"command", pairwise ? "register-pair" : "register-multi"}, {"seed", o.seed}, {"ids", ids_of(d)}};
  McmcChain chain;
  PosteriorSummary summary;
  if (o.temper > 1) {
    const double delta = o.delta > 0.0 ? o.delta : 1.0 / std::sqrt(static_cast<double>(o.temper));
    TemperingLadder ladder = build_ladder(o.temper, delta);
    if (!o.no_tune) {
      TuneConfig tc;
      tc.pre_iters = o.tune_iters;
      Rng tune_rng = make_rng(o.seed, 1);
      BayesSampler target = sampler;
      auto [tuned, report] = tune(ladder, target, tc, tune_rng);
      write_json(dir / "tuning.json", tuning_to_json(tuned, report));
      ladder = std::move(tuned);
    }
    TemperedResult r = pairwise ? tempered_register(qs[0], qs[1], cfg, ladder) : tempered_register(qs, cfg, ladder);
    chain = std::move(r.chain);
    summary = std::move(r.summary);
    result["tempering"] = {{"ladder", ladder_to_json(r.ladder)}, {"occupancy", r.occupancy}};
  } else {
    Rng rng = make_rng(cfg.seed);
    chain = run_sampler(sampler, cfg, rng);
    summary = summarize(chain);
  }

  std::vector<std::string> band_ids;
  std::vector<TimeMap> maps;
  std::vector<WarpFunction> warps;
  if (pairwise) {
    band_ids = {d.items[1].id};
    maps = {d.items[1].time};
    warps = {WarpFunction::identity(cfg.M), summary.warps[0].mean};
  } else {
    band_ids = ids_of(d);
    for (std::size_t i = 0; i < d.items.size(); ++i) {
      maps.push_back(d.items[i].time);
      warps.push_back(summary.warps[i].mean);
    }
  }
  {
    std::ofstream out = open_output(dir / "chain.csv");
    write_chain_csv(out, chain);
  }
  {
    std::ofstream out = open_output(dir / "bands.csv");
    write_band_csv(out, summary, band_ids, maps);
  }
  {
    std::ofstream out = open_output(dir / "registered.csv");
    write_functions_csv(out, registered_functions(d, warps));
  }
  if (summary.mean_function) write_srvf_csv(dir / "mean_srvf.csv", *summary.mean_function);
  write_json(dir / "summary.json", summary_to_json(summary, band_ids));
  write_spikes_if_requested(o, dir, d, warps);

  double deviation = 0.0;
  for (const auto& w : summary.warps) deviation = std::max(deviation, identity_deviation(w.mean));
  result["mean_warp_identity_deviation"] = deviation;
  result["mean_band_width"] = summary.mean_band_width();
  result["kappa_mean"] = summary.kappa_mean;
  result["accept"] = {{"warp", summary.accept.warp}, {"rotation", summary.accept.rotation}, {"swap", summary.accept.swap}};
  result["untuned_ladder"] = chain.untuned_ladder;
  result["samples"] = chain.size();
  write_json(dir / "result.json", result);
  std::cout << result.dump(2) << '\n';
  if (chain.untuned_ladder) std::cerr << "warning: tempering ladder was not tuned (equal weights)\n";
  return 0;
}

int run_karcher(const Options& o, CLI::App* sub) {
  const Dataset d = load_inputs(o);
  const std::vector<Srvf> qs = to_srvfs(d, o.unit_norm);
  DpConfig dp;
  dp.rotation_enabled = o.rotation == "on";
  dp.workers = o.workers;
  if (sub->get_option("--knots")->count() > 0) dp.knots = o.knots;
  const KarcherResult k = karcher_mean(qs, dp);
  const fs::path dir = output_dir(o);
  write_srvf_csv(dir / "mean_srvf.csv", k.mean);
  {
    std::ofstream out = open_output(dir / "warps.csv");
    out.precision(17);
    out << "id,t,gamma\n";
    for (std::size_t i = 0; i < k.warps.size(); ++i) {
      for (int j = 0; j <= k.warps[i].segments(); ++j) {
        out << d.items[i].id << ',' << static_cast<double>(j) / k.warps[i].segments() << ',' << k.warps[i].knot(j) << '\n';
      }
    }
  }
  {
    std::ofstream out = open_output(dir / "registered.csv");
    write_functions_csv(out, registered_functions(d, k.warps));
  }
  write_spikes_if_requested(o, dir, d, k.warps);
  std::vector<double> angles;
  for (const auto& r : k.rotations) angles.push_back(r.angle().value_or(0.0));
  json result{{"command", "karcher-mean"},
              {"ids", ids_of(d)},
              {"objective_trace", k.objective_trace},
              {"iterations", k.iterations}};
  if (qs[0].dim() == 2) result["angles"] = angles;
  write_json(dir / "result.json", result);
  std::cout << result.dump(2) << '\n';
  return 0;
}

int run_simulate(const Options& o, CLI::App* sub) {
  StudyConfig cfg;
  cfg.example = parse_example(o.example);
  cfg.n_values = o.n_values;
  cfg.sigma_values = o.sigma_values;
  cfg.reps = o.reps;
  cfg.a = o.warp_a;
  cfg.seed = o.seed;
  cfg.n_iter = o.iters;
  cfg.burn_in = o.burn_in;
  cfg.thin = o.thin;
  cfg.workers = o.workers;
  if (sub->get_option("--knots")->count() > 0) cfg.M = o.knots;
  if (sub->get_option("--points")->count() > 0) cfg.k = o.points + 1;
  const StudyResult r = run_study(cfg);
  const fs::path dir = output_dir(o);
  {
    std::ofstream out = open_output(dir / "study.csv");
    write_study_csv(out, r);
  }
  {
    std::ofstream out = open_output(dir / "study_plot.csv");
    write_study_plot(out, r);
  }
  write_study_csv(std::cout, r);
  return 0;
}

int run_classify(const Options& o) {
  LandmarkDataset data;
  if (o.synthetic > 0) {
    Rng rng = make_rng(o.seed, 7);
    data = synthetic_landmark_dataset(o.synthetic, o.noise, rng);
  } else {
    if (o.inputs.size() != 1) throw cli_error("input", "classify needs one manifest (--input) or --synthetic N");
    data = load_landmark_manifest(o.inputs[0]);
  }
  ClassifierConfig cfg;
  cfg.metric = o.metric == "elastic" ? ShapeMetric::elastic : ShapeMetric::procrustes;
  cfg.elastic_mean = o.elastic_mean == "karcher" ? ElasticMean::karcher : ElasticMean::bayesian;
  cfg.model = model_config(o);
  cfg.model.M = o.knots;
  cfg.dp.rotation_enabled = o.rotation == "on";
  cfg.workers = o.workers;
  const auto reports = resampled_accuracy(data, cfg, o.splits, o.test_fraction, o.seed);

  const fs::path dir = output_dir(o);
  ClassificationReport total;
  total.confusion.assign(data.group_names.size(), std::vector<long>(data.group_names.size(), 0));
  std::vector<double> acc;
  for (std::size_t s = 0; s < reports.size(); ++s) {
    std::ofstream out = open_output(dir / ("confusion_split" + std::to_string(s) + ".csv"));
    write_confusion_csv(out, reports[s], data.group_names);
    for (std::size_t i = 0; i < total.confusion.size(); ++i) {
      for (std::size_t j = 0; j < total.confusion.size(); ++j) total.confusion[i][j] += reports[s].confusion[i][j];
    }
    total.correct += reports[s].correct;
    total.total += reports[s].total;
    acc.push_back(reports[s].accuracy());
  }
  {
    std::ofstream out = open_output(dir / "confusion.csv");
    write_confusion_csv(out, total, data.group_names);
  }
  // Aligned coordinates of every configuration for external learners.
  {
    const GpaResult g = gpa_mean(data.configs, 100, 1e-8, o.workers);
    std::ofstream out = open_output(dir / "aligned.csv");
    out.precision(17);
    out << "index,group,landmark";
    for (Eigen::Index c = 0; c < g.aligned[0].coords().cols(); ++c) out << ",z" << c + 1;
    out << '\n';
    for (std::size_t i = 0; i < g.aligned.size(); ++i) {
      const Matrix& z = g.aligned[i].coords();
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        out << i << ',' << data.group_names[static_cast<std::size_t>(data.labels[i])] << ',' << r;
        for (Eigen::Index c = 0; c < z.cols(); ++c) out << ',' << z(r, c);
        out << '\n';
      }
    }
  }
  json result{{"command", "classify"},
              {"metric", o.metric},
              {"splits", o.splits},
              {"split_accuracy", acc},
              {"accuracy", total.accuracy()},
              {"groups", data.group_names},
              {"confusion", total.confusion}};
  write_json(dir / "result.json", result);
  std::cout << result.dump(2) << '\n';
  return 0;
}

int run_preprocess(const Options& o) {
  if (o.inputs.empty()) throw cli_error("input", "--input is required");
  Dataset d;
  for (const auto& path : o.inputs) {
    Dataset part = load_functions(path);
    for (auto& it : part.items) d.items.push_back(std::move(it));
    d.meta.source = part.meta.source;
  }
  d.validate();
  if (o.points > 0) d = resample(d, o.points, o.workers);
  PreprocessConfig pc;
  pc.lambda_base = o.lambda_base;
  pc.lambda_smooth = o.lambda_smooth;
  pc.tail_start = o.tail_start;
  d = baseline_and_smooth(d, pc, o.workers);
  const fs::path dir = output_dir(o);
  const bool as_json = o.format == "json";
  const fs::path out = dir / (as_json ? "preprocessed.json" : "preprocessed.csv");
  save_functions(d, out, as_json ? FileFormat::json : FileFormat::csv);
  std::cout << json{{"command", "preprocess"}, {"items", d.items.size()}, {"output", out.string()}}.dump(2) << '\n';
  return 0;
}

int report_error(const Error& e) {
  const json j{{"error",
                {{"kind", e.kind() == ErrorKind::invalid_input ? "invalid_input" : "numeric_failure"},
                 {"module", e.module()},
                 {"invariant", e.invariant()},
                 {"message", e.what()}}}};
  std::cerr << j.dump() << '\n';
  return e.kind() == ErrorKind::invalid_input ? exit_invalid : exit_numeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elastic alignment, mean estimation and shape classification"};
  app.require_subcommand(1);
  Options o;

  auto* pair = app.add_subcommand("register-pair", "Align one function to another with the Dirichlet warp model");
  auto* multi = app.add_subcommand("register-multi", "Align several functions to a common mean with the Dirichlet warp model");
  auto* karcher = app.add_subcommand("karcher-mean", "Quotient-space Karcher mean by dynamic programming");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of the two mean estimators");
  auto* classify = app.add_subcommand("classify", "Nearest-mean classification of landmark curves");
  auto* preprocess = app.add_subcommand("preprocess", "Baseline removal, smoothing and resampling");

  for (auto* sub : {pair, multi, karcher, simulate, classify, preprocess}) add_common(sub, o);
  for (auto* sub : {pair, multi, karcher, simulate, classify}) add_model(sub, o);
  for (auto* sub : {pair, multi}) add_tempering(sub, o);

  simulate->add_option("--example", o.example, "Example I, II, III or IV")->capture_default_str();
  simulate->add_option("--n-values", o.n_values, "Sample sizes")->capture_default_str();
  simulate->add_option("--sigma-values", o.sigma_values, "Noise standard deviations")->capture_default_str();
  simulate->add_option("--reps", o.reps, "Monte Carlo repetitions")->capture_default_str();
  simulate->add_option("--warp-a", o.warp_a, "Dirichlet concentration of the generating warps")->capture_default_str();

  classify->add_option("--metric", o.metric, "Nearest-mean metric")
      ->check(CLI::IsMember({"elastic", "procrustes"}))
      ->capture_default_str();
  classify->add_option("--elastic-mean", o.elastic_mean, "Group mean for the elastic metric")
      ->check(CLI::IsMember({"bayesian", "karcher"}))
      ->capture_default_str();
  classify->add_option("--splits", o.splits, "Resampling splits")->capture_default_str();
  classify->add_option("--test-fraction", o.test_fraction, "Held-out fraction per group")->capture_default_str();
  classify->add_option("--synthetic", o.synthetic, "Use a synthetic 3-class dataset with N curves per class");
  classify->add_option("--noise", o.noise, "Landmark noise SD of the synthetic dataset")->capture_default_str();

  preprocess->add_option("--lambda-base", o.lambda_base, "Baseline roughness penalty")->capture_default_str();
  preprocess->add_option("--lambda-smooth", o.lambda_smooth, "Tail smoothing penalty")->capture_default_str();
  preprocess->add_option("--tail-start", o.tail_start, "Start of the smoothed tail in unit time")->capture_default_str();
  preprocess->add_option("--points", o.points, "Resample to this many intervals first");
  preprocess->add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(cli_error("arguments", e.what()));
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    finish_options(sub, o);
    if (sub == pair) return run_bayes(o, true);
    if (sub == multi) return run_bayes(o, false);
    if (sub == karcher) return run_karcher(o, sub);
    if (sub == simulate) return run_simulate(o, sub);
    if (sub == classify) return run_classify(o);
    return run_preprocess(o);
  } catch (const Error& e) {
    return report_error(e);
  } catch (const CLI::ParseError& e) {
    return report_error(cli_error("config_value", e.what()));
  } catch (const std::exception& e) {
    return report_error(Error(ErrorKind::numeric_failure, "cli", "unexpected", e.what()));
  }
}
