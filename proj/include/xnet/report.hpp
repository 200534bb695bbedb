#pragma once

// JSON and CSV renderings of the verification and accounting reports.
// Objects use nlohmann::ordered_json so field order is fixed.

#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "xnet/accounting.hpp"
#include "xnet/connectivity.hpp"
#include "xnet/spectral.hpp"

namespace xnet {

using Json = nlohmann::ordered_json;

inline Json to_json(const MixingCheckReport& r) {
  return Json{{"kind", "mixing"},
              {"s_size", r.s_size},
              {"t_size", r.t_size},
              {"observed_edges", r.observed_edges},
              {"expected", r.expected},
              {"deviation", r.deviation},
              {"bound_paper", r.bound_paper},
              {"bound_standard", r.bound_standard},
              {"pass_paper", r.pass_paper},
              {"pass_standard", r.pass_standard}};
}

inline Json to_json(const MixingSweepSummary& s) {
  return Json{{"kind", "mixing-sweep"},
              {"pairs", s.pairs},
              {"standard_violations", s.standard_violations},
              {"paper_violations", s.paper_violations},
              {"paper_pass_rate", s.paper_pass_rate()},
              {"worst_standard_ratio", s.worst_standard_ratio}};
}

inline Json to_json(const ExpansionCheckReport& r) {
  return Json{{"kind", "expansion"},
              {"subset", r.subset},
              {"subset_size", r.subset_size},
              {"neighborhood_size", r.neighborhood_size},
              {"claimed_lower_bound", r.claimed_lower_bound},
              {"satisfied", r.satisfied},
              {"mode", to_string(r.mode)}};
}

inline Json to_json(const PathCountReport& r) {
  return Json{{"kind", "paths"},
              {"s_size", r.s_size},
              {"t_size", r.t_size},
              {"depth", r.depth},
              {"exact_count", r.exact_count.str()},
              {"expected", r.expected},
              {"gamma_min", r.gamma_min},
              {"bound", r.bound},
              {"absolute_deviation", r.absolute_deviation},
              {"relative_deviation", r.relative_deviation},
              {"within_bound", r.within_bound}};
}

/// {graph_id, method, lambda2, gamma, checks: [...]}
inline Json spectral_json(const std::string& graph_id, const SpectralReport& spec, Json checks = Json::array()) {
  return Json{{"graph_id", graph_id},
              {"method", to_string(spec.method)},
              {"degree", spec.degree},
              {"lambda2", spec.lambda2},
              {"gamma", spec.gamma},
              {"iterations", spec.iterations},
              {"residual", spec.residual},
              {"checks", std::move(checks)}};
}

inline Json sensitivity_json(const SensitivityReport& r) {
  Json j{{"n", r.n}, {"depth_tested", r.depth_tested}};
  if (r.fully_sensitive_at) {
    j["fully_sensitive_at"] = *r.fully_sensitive_at;
  } else {
    j["fully_sensitive_at"] = "not achieved";
  }
  if (r.growth_ok) {
    j["growth_ok"] = *r.growth_ok;
  } else {
    j["growth_ok"] = nullptr;
  }
  std::size_t min_final = r.n, max_final = 0;
  for (const auto& f : r.frontier_sizes) {
    min_final = std::min(min_final, f.back());
    max_final = std::max(max_final, f.back());
  }
  j["min_final_frontier"] = min_final;
  j["max_final_frontier"] = max_final;
  return j;
}

/// One row per source vertex: source,f1,f2,...,ft.
inline std::string frontier_csv(const SensitivityReport& r) {
  std::ostringstream out;
  out << "source";
  for (std::size_t t = 1; t <= r.depth_tested; ++t) out << ",f" << t;
  out << '\n';
  for (std::size_t u = 0; u < r.frontier_sizes.size(); ++u) {
    out << u;
    for (auto s : r.frontier_sizes[u]) out << ',' << s;
    out << '\n';
  }
  return out.str();
}

inline Json to_json(const CostReport& c) {
  return Json{{"params", c.params}, {"macs", c.macs}, {"flops_multadd", c.flops_multadd}, {"flops_2x", c.flops_2x}};
}

inline Json accounting_json(const std::vector<LayerSpec>& specs, const CountOptions& opt = {}) {
  Json layers = Json::array();
  for (const auto& s : specs) {
    Json row{{"name", s.name}, {"kind", to_string(s.kind)}, {"c_in", s.c_in}, {"c_out", s.c_out}};
    row.update(to_json(count(s, opt)));
    layers.push_back(std::move(row));
  }
  return Json{{"convention", "macs = multiply-accumulates; flops_multadd = macs; flops_2x = 2 * macs"},
              {"include_bias", opt.include_bias},
              {"layers", std::move(layers)},
              {"total", to_json(count_model(specs, opt))}};
}

inline std::string accounting_csv(const std::vector<LayerSpec>& specs, const CountOptions& opt = {}) {
  std::ostringstream out;
  out << "name,kind,c_in,c_out,params,macs,flops_multadd,flops_2x\n";
  for (const auto& s : specs) {
    const auto c = count(s, opt);
    out << s.name << ',' << to_string(s.kind) << ',' << s.c_in << ',' << s.c_out << ',' << c.params << ','
        << c.macs << ',' << c.flops_multadd << ',' << c.flops_2x << '\n';
  }
  const auto t = count_model(specs, opt);
  out << "total,,,," << t.params << ',' << t.macs << ',' << t.flops_multadd << ',' << t.flops_2x << '\n';
  return out.str();
}

}  // namespace xnet
