// Apache License, Version 2.0, refer to LICENSE.txt
//
// Machine-readable outputs: chains, posterior summaries, credible bands,
// tuning reports, registered functions and spike alignment tables.

#pragma once

#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elastica/bayes.hpp"
#include "elastica/ingest.hpp"
#include "elastica/procrustes.hpp"
#include "elastica/tempering.hpp"

namespace elastica {

namespace detail {

inline void full_precision(std::ostream& os) { os.precision(17); }

}  // namespace detail

/// Wide CSV of recorded samples: iteration,observation,kappa,angle,log_post,g0..gM.
inline void write_chain_csv(std::ostream& os, const McmcChain& chain) {
  detail::full_precision(os);
  const int M = chain.size() ? chain.warps[0][0].segments() : 0;
  os << "iteration,observation,kappa,angle,log_post";
  for (int k = 0; k <= M; ++k) os << ",g" << k;
  os << '\n';
  for (std::size_t s = 0; s < chain.size(); ++s) {
    for (std::size_t i = 0; i < chain.warps[s].size(); ++i) {
      os << chain.iterations[s] << ',' << i << ',' << chain.kappa[s] << ',';
      if (s < chain.angles.size() && i < chain.angles[s].size()) os << chain.angles[s][i];
      os << ',' << chain.log_post[s];
      for (double v : chain.warps[s][i].knots()) os << ',' << v;
      os << '\n';
    }
  }
}

/// Long-format credible bands of gamma at the knots, one row per
/// (observation, knot). `maps` (optional, one per observation) adds the
/// knot location and band values in original time units.
inline void write_band_csv(std::ostream& os, const PosteriorSummary& s, const std::vector<std::string>& ids,
                           const std::vector<TimeMap>& maps = {}) {
  detail::full_precision(os);
  os << "id,t,gamma_mean,lower,upper";
  if (!maps.empty()) os << ",t_original,gamma_mean_original,lower_original,upper_original";
  os << '\n';
  for (std::size_t i = 0; i < s.warps.size(); ++i) {
    const WarpBand& b = s.warps[i];
    const int M = b.mean.segments();
    for (int k = 0; k <= M; ++k) {
      const double t = static_cast<double>(k) / M;
      const auto kk = static_cast<std::size_t>(k);
      os << (i < ids.size() ? ids[i] : std::to_string(i)) << ',' << t << ',' << b.mean.knot(k) << ','
         << b.lower[kk] << ',' << b.upper[kk];
      if (!maps.empty()) {
        const TimeMap& m = maps[i];
        os << ',' << m.to_original(t) << ',' << m.to_original(b.mean.knot(k)) << ','
           << m.to_original(b.lower[kk]) << ',' << m.to_original(b.upper[kk]);
      }
      os << '\n';
    }
  }
}

[[nodiscard]] inline nlohmann::json summary_to_json(const PosteriorSummary& s, const std::vector<std::string>& ids) {
  nlohmann::json warps = nlohmann::json::array();
  for (std::size_t i = 0; i < s.warps.size(); ++i) {
    warps.push_back({{"id", i < ids.size() ? ids[i] : std::to_string(i)},
                     {"mean_knots", s.warps[i].mean.knots()},
                     {"lower", s.warps[i].lower},
                     {"upper", s.warps[i].upper}});
  }
  nlohmann::json j{{"warps", warps},
                   {"kappa_mean", s.kappa_mean},
                   {"map_index", s.map_index},
                   {"map_log_post", s.map_log_post},
                   {"mean_band_width", s.mean_band_width()},
                   {"accept", {{"warp", s.accept.warp}, {"rotation", s.accept.rotation}, {"swap", s.accept.swap}}}};
  if (!s.mean_angles.empty()) j["mean_angles"] = s.mean_angles;
  if (s.mean_function) {
    std::vector<double> v(s.mean_function->values().data(),
                          s.mean_function->values().data() + s.mean_function->values().size());
    j["mean_function"] = {{"t", s.mean_function->grid().points()}, {"dim", s.mean_function->dim()},
                          {"values_column_major", v}};
  }
  return j;
}

[[nodiscard]] inline nlohmann::json ladder_to_json(const TemperingLadder& l) {
  return {{"T", l.T}, {"delta", l.delta}, {"betas", l.betas}, {"log_weights", l.log_weights}, {"tuned", l.tuned}};
}

[[nodiscard]] inline nlohmann::json tuning_to_json(const TemperingLadder& l, const TuningReport& r) {
  return {{"ladder", ladder_to_json(l)},
          {"counts", r.counts},
          {"swap_accept_rate", r.swap_accept_rate},
          {"K", r.K},
          {"N_T", r.N_T},
          {"pre_run_iters", r.pre_run_iters},
          {"pre_runs", r.pre_runs}};
}

/// f_i(gamma_i(t)) on each item's own grid, in original time units.
[[nodiscard]] inline Dataset registered_functions(const Dataset& d, const std::vector<WarpFunction>& warps) {
  detail::require(warps.size() == d.items.size(), "cli", "warp_count", "one warp per item is required");
  Dataset out = d;
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    const SampledFunction& f = d.items[i].f;
    Matrix v(f.size(), f.dim());
    for (Eigen::Index j = 0; j < f.size(); ++j) {
      detail::interpolate_row(f.grid(), f.values(), warps[i](f.grid()[j]), v.row(j));
    }
    out.items[i].f = SampledFunction(f.grid(), std::move(v));
  }
  return out;
}

/// Spike answer key: id -> positions in original time units.
using SpikeKey = std::map<std::string, std::vector<double>>;

/// Reads CSV rows id,position (header optional).
[[nodiscard]] inline SpikeKey parse_spike_key(std::istream& in, const std::string& name) {
  const detail::CsvTable t = detail::read_csv(in, name);
  detail::require(t.rows[0].size() == 2, "ingest_preprocess", "columns", name + ": expected columns id,position");
  SpikeKey key;
  for (std::size_t r = 0; r < t.rows.size(); ++r) key[t.rows[r][0]].push_back(detail::cell_number(t, r, 1, name));
  return key;
}

/// One row per (item, spike): a feature at unit time s of item i appears at
/// gamma_i^{-1}(s) in the registered function f_i o gamma_i. Indices are the
/// nearest sample of the item's grid.
inline void write_spike_table(std::ostream& os, const Dataset& d, const std::vector<WarpFunction>& warps,
                              const SpikeKey& key) {
  detail::require(warps.size() == d.items.size(), "cli", "warp_count", "one warp per item is required");
  detail::full_precision(os);
  auto nearest = [](const Grid& g, double u) {
    const auto& p = g.points();
    const auto it = std::lower_bound(p.begin(), p.end(), u);
    if (it == p.begin()) return std::size_t{0};
    if (it == p.end()) return p.size() - 1;
    const auto hi = static_cast<std::size_t>(it - p.begin());
    return (u - p[hi - 1] <= p[hi] - u) ? hi - 1 : hi;
  };
  os << "id,spike,original,original_index,aligned,aligned_index\n";
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    const auto found = key.find(d.items[i].id);
    if (found == key.end()) continue;
    const DatasetItem& it = d.items[i];
    for (std::size_t k = 0; k < found->second.size(); ++k) {
      const double s = std::clamp(it.time.to_unit(found->second[k]), 0.0, 1.0);
      const double a = warps[i].inverse_at(s);
      os << it.id << ',' << k << ',' << found->second[k] << ',' << nearest(it.f.grid(), s) << ','
         << it.time.to_original(a) << ',' << nearest(it.f.grid(), a) << '\n';
    }
  }
}

/// Confusion matrix with group names; rows are true labels.
inline void write_confusion_csv(std::ostream& os, const ClassificationReport& r,
                                const std::vector<std::string>& names) {
  os << "true\\predicted";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    os << (i < names.size() ? names[i] : std::to_string(i));
    for (auto c : r.confusion[i]) os << ',' << c;
    os << '\n';
  }
}

}  // namespace elastica
