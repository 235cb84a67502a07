// Apache License, Version 2.0, refer to LICENSE.txt
//
// Loading sampled functions and landmark sets from CSV/JSON, resampling to a
// common grid, and baseline removal and smoothing of chromatogram-like
// signals.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "elastica/error.hpp"
#include "elastica/parallel.hpp"
#include "elastica/procrustes.hpp"
#include "elastica/srvf.hpp"

namespace elastica {

/// Affine map between original time units [t0, t1] and unit time [0, 1].
struct TimeMap {
  double t0 = 0.0, t1 = 1.0;

  [[nodiscard]] double to_unit(double t) const { return (t - t0) / (t1 - t0); }
  [[nodiscard]] double to_original(double u) const { return t0 + u * (t1 - t0); }
};

struct DatasetItem {
  std::string id;
  std::optional<std::string> group;
  SampledFunction f;                // on unit time
  TimeMap time;                     // original units of this item
  std::vector<double> original_t;   // time stamps as read (or mapped back)
};

struct DatasetMeta {
  std::string source;
  TimeMap range;  // union of the items' original ranges
};

struct Dataset {
  std::vector<DatasetItem> items;
  DatasetMeta meta;

  /// Shared dimension and unique identifiers.
  void validate() const {
    detail::require(!items.empty(), "ingest_preprocess", "nonempty", "dataset has no items");
    std::vector<std::string> ids;
    for (const auto& it : items) {
      detail::require(it.f.dim() == items[0].f.dim(), "ingest_preprocess", "common_dimension",
                      "item '" + it.id + "' has a different dimension");
      ids.push_back(it.id);
    }
    std::sort(ids.begin(), ids.end());
    const auto dup = std::adjacent_find(ids.begin(), ids.end());
    detail::require(dup == ids.end(), "ingest_preprocess", "unique_ids",
                    dup == ids.end() ? "" : "duplicate identifier '" + *dup + "'");
  }

  [[nodiscard]] std::vector<Srvf> srvfs() const {
    std::vector<Srvf> out;
    for (const auto& it : items) out.push_back(srvf_transform(it.f));
    return out;
  }
};

enum class FileFormat { csv, json };

namespace detail {

inline Error ingest_error(const std::string& invariant, const std::string& msg) {
  return {ErrorKind::invalid_input, "ingest_preprocess", invariant, msg};
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct CsvTable {
  std::vector<std::string> header;         // empty when the file has none
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;   // 1-based, for messages
};

inline CsvTable read_csv(std::istream& in, const std::string& name) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::vector<std::string> cells = split_csv_line(line);
    const bool numeric_first = parse_number(cells[0]).has_value();
    if (t.rows.empty() && t.header.empty() && !numeric_first) {
      t.header = std::move(cells);
      continue;
    }
    const std::size_t width = t.header.empty() ? (t.rows.empty() ? cells.size() : t.rows[0].size())
                                                : t.header.size();
    if (cells.size() != width) {
      throw ingest_error("ragged_rows", name + ": line " + std::to_string(line_no) + " has " +
                                            std::to_string(cells.size()) + " fields, expected " +
                                            std::to_string(width));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (t.rows.empty()) throw ingest_error("nonempty", name + ": no data rows");
  return t;
}

inline double cell_number(const CsvTable& t, std::size_t r, std::size_t c, const std::string& name) {
  const auto v = parse_number(t.rows[r][c]);
  if (!v) {
    throw ingest_error("numeric_field", name + ": line " + std::to_string(t.line_numbers[r]) +
                                            " field " + std::to_string(c + 1) + " is not a finite number");
  }
  return *v;
}

/// Builds an item from time stamps in original units; `where(i)` names the
/// source of sample i in error messages.
template <typename Where>
DatasetItem make_item(std::string id, std::optional<std::string> group, std::vector<double> t,
                      Matrix values, Where&& where) {
  if (t.size() < 2) throw ingest_error("grid_length", "item '" + id + "' needs at least two samples");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] == t[i - 1]) throw ingest_error("duplicate_t", "duplicate t at " + where(i));
    if (t[i] < t[i - 1]) throw ingest_error("monotone_t", "t decreases at " + where(i));
  }
  const TimeMap map{t.front(), t.back()};
  std::vector<double> u(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) u[i] = map.to_unit(t[i]);
  u.front() = 0.0;
  u.back() = 1.0;
  return {std::move(id), std::move(group), SampledFunction(Grid(std::move(u)), std::move(values)), map,
          std::move(t)};
}

inline DatasetMeta meta_for(const std::vector<DatasetItem>& items, std::string source) {
  DatasetMeta m;
  m.source = std::move(source);
  m.range = items.front().time;
  for (const auto& it : items) {
    m.range.t0 = std::min(m.range.t0, it.time.t0);
    m.range.t1 = std::max(m.range.t1, it.time.t1);
  }
  return m;
}

}  // namespace detail

/// Reads functions from CSV text. Two layouts are accepted:
///  - t,v1[,v2,...]: one function (identifier `default_id`), header optional;
///  - id,t,v1[,...] with a header whose first column is "id": several
///    functions, rows of one identifier contiguous.
/// Time is rescaled per item onto [0, 1].
[[nodiscard]] inline Dataset parse_functions_csv(std::istream& in, const std::string& name,
                                                 const std::string& default_id = "f") {
  const detail::CsvTable t = detail::read_csv(in, name);
  const bool long_format = !t.header.empty() && t.header[0] == "id";
  const std::size_t first_value = long_format ? 2 : 1;
  const std::size_t width = t.rows[0].size();
  if (width < first_value + 1) {
    throw detail::ingest_error("columns", name + ": expected columns " +
                                              std::string(long_format ? "id,t,v1[,...]" : "t,v1[,...]"));
  }
  std::vector<DatasetItem> items;
  std::size_t r = 0;
  while (r < t.rows.size()) {
    const std::string id = long_format ? t.rows[r][0] : default_id;
    std::size_t end = r;
    while (end < t.rows.size() && (!long_format || t.rows[end][0] == id)) ++end;
    for (const auto& it : items) {
      if (it.id == id) {
        throw detail::ingest_error("unique_ids", name + ": rows of '" + id + "' are not contiguous (line " +
                                                     std::to_string(t.line_numbers[r]) + ")");
      }
    }
    std::vector<double> times;
    Matrix values(static_cast<Eigen::Index>(end - r), static_cast<Eigen::Index>(width - first_value));
    for (std::size_t i = r; i < end; ++i) {
      times.push_back(detail::cell_number(t, i, first_value - 1, name));
      for (std::size_t c = first_value; c < width; ++c) {
        values(static_cast<Eigen::Index>(i - r), static_cast<Eigen::Index>(c - first_value)) =
            detail::cell_number(t, i, c, name);
      }
    }
    items.push_back(detail::make_item(id, std::nullopt, std::move(times), std::move(values),
                                      [&](std::size_t i) {
                                        return name + " line " + std::to_string(t.line_numbers[r + i]);
                                      }));
    r = end;
  }
  Dataset d{std::move(items), {}};
  d.meta = detail::meta_for(d.items, name);
  d.validate();
  return d;
}

/// Reads {"source": ..., "items": [{"id", "group"?, "t": [...],
/// "values": [v, ...] or [[v1, v2], ...]}]}.
[[nodiscard]] inline Dataset parse_functions_json(const nlohmann::json& j, const std::string& name) {
  try {
    std::vector<DatasetItem> items;
    const auto& arr = j.at("items");
    if (!arr.is_array() || arr.empty()) throw detail::ingest_error("nonempty", name + ": 'items' is empty");
    for (std::size_t n = 0; n < arr.size(); ++n) {
      const auto& it = arr[n];
      const std::string id = it.contains("id") ? it.at("id").get<std::string>() : "item" + std::to_string(n);
      std::optional<std::string> group;
      if (it.contains("group") && !it.at("group").is_null()) group = it.at("group").get<std::string>();
      std::vector<double> t = it.at("t").get<std::vector<double>>();
      const auto& v = it.at("values");
      if (v.size() != t.size()) {
        throw detail::ingest_error("ragged_rows", name + ": item '" + id + "' has " + std::to_string(t.size()) +
                                                      " times but " + std::to_string(v.size()) + " values");
      }
      const Eigen::Index m = v.empty() || !v[0].is_array() ? 1 : static_cast<Eigen::Index>(v[0].size());
      Matrix values(static_cast<Eigen::Index>(v.size()), m);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].is_array()) {
          if (static_cast<Eigen::Index>(v[i].size()) != m) {
            throw detail::ingest_error("ragged_rows", name + ": item '" + id + "' sample " + std::to_string(i) +
                                                          " has the wrong dimension");
          }
          for (Eigen::Index c = 0; c < m; ++c) values(static_cast<Eigen::Index>(i), c) = v[i][static_cast<std::size_t>(c)].get<double>();
        } else {
          if (m != 1) throw detail::ingest_error("ragged_rows", name + ": item '" + id + "' mixes scalars and vectors");
          values(static_cast<Eigen::Index>(i), 0) = v[i].get<double>();
        }
      }
      items.push_back(detail::make_item(id, group, std::move(t), std::move(values), [&](std::size_t i) {
        return name + " item '" + id + "' sample " + std::to_string(i);
      }));
    }
    Dataset d{std::move(items), {}};
    d.meta = detail::meta_for(d.items, j.value("source", name));
    d.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw detail::ingest_error("json_schema", name + ": " + e.what());
  }
}

[[nodiscard]] inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw detail::ingest_error("file_exists", "cannot open '" + path.string() + "'");
  return in;
}

[[nodiscard]] inline Dataset load_functions(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in = open_input(path);
  if (format == FileFormat::csv) return parse_functions_csv(in, path.string(), path.stem().string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw detail::ingest_error("json_parse", path.string() + ": " + e.what());
  }
  return parse_functions_json(j, path.string());
}

/// Format from the extension (.json, otherwise CSV).
[[nodiscard]] inline Dataset load_functions(const std::filesystem::path& path) {
  return load_functions(path, path.extension() == ".json" ? FileFormat::json : FileFormat::csv);
}

/// JSON form read back by parse_functions_json; doubles round-trip exactly.
[[nodiscard]] inline nlohmann::json functions_to_json(const Dataset& d) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : d.items) {
    nlohmann::json values = nlohmann::json::array();
    for (Eigen::Index i = 0; i < it.f.size(); ++i) {
      if (it.f.dim() == 1) {
        values.push_back(it.f.values()(i, 0));
      } else {
        std::vector<double> row(static_cast<std::size_t>(it.f.dim()));
        for (Eigen::Index c = 0; c < it.f.dim(); ++c) row[static_cast<std::size_t>(c)] = it.f.values()(i, c);
        values.push_back(row);
      }
    }
    nlohmann::json item{{"id", it.id}, {"t", it.original_t}, {"values", values}};
    if (it.group) item["group"] = *it.group;
    items.push_back(std::move(item));
  }
  return {{"source", d.meta.source}, {"items", items}};
}

/// Long CSV: id,t,v1[,...] in original time units.
inline void write_functions_csv(std::ostream& os, const Dataset& d) {
  os << "id,t";
  for (int c = 0; c < d.items.front().f.dim(); ++c) os << ",v" << c + 1;
  os << '\n';
  os.precision(17);
  for (const auto& it : d.items) {
    for (Eigen::Index i = 0; i < it.f.size(); ++i) {
      os << it.id << ',' << it.original_t[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < it.f.dim(); ++c) os << ',' << it.f.values()(i, c);
      os << '\n';
    }
  }
}

inline void save_functions(const Dataset& d, const std::filesystem::path& path, FileFormat format) {
  std::ofstream out(path);
  if (!out) throw detail::ingest_error("file_writable", "cannot write '" + path.string() + "'");
  if (format == FileFormat::json) {
    out << functions_to_json(d).dump(1) << '\n';
  } else {
    write_functions_csv(out, d);
  }
}

// ---------------------------------------------------------------------------
// Resampling.

/// Linear interpolation onto the uniform grid with `intervals` + 1 points.
[[nodiscard]] inline SampledFunction resample(const SampledFunction& f, int intervals) {
  detail::require(intervals >= 2, "ingest_preprocess", "resample_size", "need at least 2 intervals");
  const Grid g = Grid::uniform(intervals + 1);
  if (g == f.grid()) return f;
  Matrix v(g.size(), f.dim());
  for (Eigen::Index i = 0; i < g.size(); ++i) detail::interpolate_row(f.grid(), f.values(), g[i], v.row(i));
  return {g, std::move(v)};
}

/// Every item resampled; original time stamps follow the new grid.
[[nodiscard]] inline Dataset resample(const Dataset& d, int intervals, int workers = 1) {
  Dataset out = d;
  parallel_for(out.items.size(), workers, [&](std::size_t i) {
    DatasetItem& it = out.items[i];
    it.f = resample(d.items[i].f, intervals);
    it.original_t.resize(static_cast<std::size_t>(it.f.size()));
    for (Eigen::Index j = 0; j < it.f.size(); ++j) {
      it.original_t[static_cast<std::size_t>(j)] = it.time.to_original(it.f.grid()[j]);
    }
    it.original_t.back() = it.time.t1;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Baseline removal and smoothing.

namespace detail {

/// Sparse D^T D for the second-difference operator D on n samples.
inline Eigen::SparseMatrix<double> second_difference_gram(Eigen::Index n) {
  Eigen::SparseMatrix<double> d(n - 2, n);
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i + 2 < n; ++i) {
    trip.emplace_back(i, i, 1.0);
    trip.emplace_back(i, i + 1, -2.0);
    trip.emplace_back(i, i + 2, 1.0);
  }
  d.setFromTriplets(trip.begin(), trip.end());
  return Eigen::SparseMatrix<double>(d.transpose() * d);
}

/// argmin_z sum w_i (y_i - z_i)^2 + lambda sum (second difference of z)^2.
inline Eigen::VectorXd whittaker(const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda,
                                 const Eigen::SparseMatrix<double>& dtd) {
  Eigen::SparseMatrix<double> a = lambda * dtd;
  for (Eigen::Index i = 0; i < y.size(); ++i) a.coeffRef(i, i) += w[i];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::numeric_failure, "ingest_preprocess", "smoother_factorization",
                "penalized least-squares system could not be factorized");
  }
  return solver.solve(w.cwiseProduct(y));
}

}  // namespace detail

struct PreprocessConfig {
  double lambda_base = 1e6;     // baseline roughness penalty
  double asymmetry = 0.01;      // weight of samples above the baseline
  int baseline_iters = 20;
  double lambda_smooth = 10.0;  // tail smoothing penalty; 0 disables smoothing
  double tail_start = 0.75;     // smoothing applies to t >= tail_start

  void validate() const {
    detail::require(lambda_base > 0.0, "ingest_preprocess", "lambda_base", "lambda_base must be positive");
    detail::require(lambda_smooth >= 0.0, "ingest_preprocess", "lambda_smooth",
                    "lambda_smooth must be non-negative");
    detail::require(asymmetry > 0.0 && asymmetry < 1.0, "ingest_preprocess", "asymmetry",
                    "asymmetry must be in (0, 1)");
    detail::require(baseline_iters >= 1, "ingest_preprocess", "baseline_iters", "baseline_iters must be positive");
    detail::require(tail_start >= 0.0 && tail_start <= 1.0, "ingest_preprocess", "tail_start",
                    "tail_start must be in [0, 1]");
  }
};

/// Baseline by asymmetric least squares: a second-difference-penalized fit
/// whose weights are `asymmetry` above the current fit and 1 - asymmetry
/// below, so peaks barely pull it up. Penalties act on sample index.
[[nodiscard]] inline Eigen::VectorXd estimate_baseline(const Eigen::VectorXd& y, double lambda,
                                                       double asymmetry = 0.01, int iters = 20) {
  detail::require(y.size() >= 3, "ingest_preprocess", "grid_length", "need at least 3 samples");
  const auto dtd = detail::second_difference_gram(y.size());
  Eigen::VectorXd w = Eigen::VectorXd::Ones(y.size());
  Eigen::VectorXd z = detail::whittaker(y, w, lambda, dtd);
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd next_w(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) next_w[i] = y[i] > z[i] ? asymmetry : 1.0 - asymmetry;
    if (next_w == w) break;
    w = next_w;
    z = detail::whittaker(y, w, lambda, dtd);
  }
  return z;
}

/// Whittaker smoothing (second-difference penalty) of samples [first, end).
[[nodiscard]] inline Eigen::VectorXd smooth_segment(const Eigen::VectorXd& y, Eigen::Index first,
                                                    double lambda) {
  Eigen::VectorXd out = y;
  const Eigen::Index n = y.size() - first;
  if (lambda <= 0.0 || n < 3) return out;
  const Eigen::VectorXd seg = y.tail(n);
  out.tail(n) = detail::whittaker(seg, Eigen::VectorXd::Ones(n), lambda, detail::second_difference_gram(n));
  return out;
}

/// Subtracts the baseline, clips at 0, then smooths the samples with
/// t >= tail_start; smoothing can undershoot beside a spike, so the result
/// is clipped again. Grid points are never moved or dropped.
[[nodiscard]] inline SampledFunction baseline_and_smooth(const SampledFunction& f,
                                                         const PreprocessConfig& cfg = {}) {
  cfg.validate();
  detail::require(f.dim() == 1, "ingest_preprocess", "scalar_signal",
                  "baseline removal needs a scalar function (m = 1)");
  const Eigen::VectorXd y = f.values().col(0);
  Eigen::VectorXd r = (y - estimate_baseline(y, cfg.lambda_base, cfg.asymmetry, cfg.baseline_iters)).cwiseMax(0.0);
  const auto& t = f.grid().points();
  const auto first = static_cast<Eigen::Index>(std::lower_bound(t.begin(), t.end(), cfg.tail_start) - t.begin());
  r = smooth_segment(r, first, cfg.lambda_smooth).cwiseMax(0.0);
  return {f.grid(), Matrix(r)};
}

[[nodiscard]] inline Dataset baseline_and_smooth(const Dataset& d, const PreprocessConfig& cfg = {},
                                                 int workers = 1) {
  Dataset out = d;
  parallel_for(out.items.size(), workers,
               [&](std::size_t i) { out.items[i].f = baseline_and_smooth(d.items[i].f, cfg); });
  return out;
}

// ---------------------------------------------------------------------------
// Landmark sets.

/// One configuration per CSV file: rows x[,y], header optional.
[[nodiscard]] inline Matrix load_landmarks_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const detail::CsvTable t = detail::read_csv(in, path.string());
  Matrix x(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.rows[0].size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = detail::cell_number(t, r, c, path.string());
    }
  }
  return x;
}

/// Manifest {"items": [{"file": "a.csv", "group": "g"}, ...]}; files are
/// relative to the manifest. Groups are numbered in order of appearance.
[[nodiscard]] inline LandmarkDataset load_landmark_manifest(const std::filesystem::path& manifest) {
  std::ifstream in = open_input(manifest);
  LandmarkDataset d;
  try {
    nlohmann::json j;
    in >> j;
    std::map<std::string, int> index;
    for (const auto& item : j.at("items")) {
      const std::string group = item.at("group").get<std::string>();
      auto [it, inserted] = index.emplace(group, static_cast<int>(index.size()));
      if (inserted) d.group_names.push_back(group);
      d.configs.push_back(load_landmarks_csv(manifest.parent_path() / item.at("file").get<std::string>()));
      d.labels.push_back(it->second);
    }
  } catch (const nlohmann::json::exception& e) {
    throw detail::ingest_error("json_schema", manifest.string() + ": " + e.what());
  }
  d.validate();
  return d;
}

}  // namespace elastica
