#pragma once

// Reachability and path statistics through a stack of bipartite layers:
// frontier growth from a single input, full input-to-output sensitivity,
// and exact layered path counts between vertex sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "xnet/error.hpp"
#include "xnet/graph.hpp"
#include "xnet/parallel.hpp"
#include "xnet/spectral.hpp"

namespace xnet {

using BigInt = boost::multiprecision::cpp_int;

/// |N_1(u)|, |N_2(u)|, ...: N_i(u) is the neighbourhood of N_{i-1}(u) in layer i.
inline std::vector<std::size_t> reach_frontiers(const LayeredNetwork& net, std::size_t source) {
  detail::require(source < net.input_width(), "source vertex out of range");
  std::vector<std::size_t> sizes;
  sizes.reserve(net.depth());
  std::vector<Vertex> frontier{static_cast<Vertex>(source)};
  for (const auto& layer : net.layers()) {
    std::vector<char> seen(layer.n_right(), 0);
    std::vector<Vertex> next;
    for (Vertex u : frontier) {
      for (Vertex v : layer.neighbors(u)) {
        if (!seen[v]) {
          seen[v] = 1;
          next.push_back(v);
        }
      }
    }
    frontier = std::move(next);
    sizes.push_back(frontier.size());
  }
  return sizes;
}

struct SensitivityReport {
  std::size_t n = 0;
  std::size_t depth_tested = 0;
  std::vector<std::vector<std::size_t>> frontier_sizes;  // [source][layer]
  /// Smallest t such that every input reaches every output through layers 1..t.
  std::optional<std::size_t> fully_sensitive_at;
  /// Whether |N_i| >= (1 + gamma_i)|N_{i-1}| held while |N_{i-1}| <= n/2, for
  /// every source. Empty when no per-layer gaps were supplied.
  std::optional<bool> growth_ok;
};

/// All n^2 input/output pairs checked by forward frontiers. `layer_gamma`
/// (one spectral gap per layer, optional) enables the growth audit.
inline SensitivityReport sensitivity_depth(const LayeredNetwork& net,
                                           std::span<const double> layer_gamma = {},
                                           std::size_t threads = 1) {
  detail::require(net.uniform_width(), "sensitivity requires every layer to have the same width");
  detail::require(layer_gamma.empty() || layer_gamma.size() == net.depth(),
                  "one spectral gap per layer is required");
  const std::size_t n = net.input_width();
  SensitivityReport report;
  report.n = n;
  report.depth_tested = net.depth();
  report.frontier_sizes.resize(n);
  std::vector<char> growth(n, 1);
  parallel_for(n, threads, [&](std::size_t u) {
    report.frontier_sizes[u] = reach_frontiers(net, u);
    if (layer_gamma.empty()) return;
    std::size_t prev = 1;
    for (std::size_t i = 0; i < net.depth(); ++i) {
      const std::size_t cur = report.frontier_sizes[u][i];
      if (2 * prev > n) break;
      if (double(cur) + 1e-9 < (1.0 + layer_gamma[i]) * double(prev)) {
        growth[u] = 0;
        break;
      }
      prev = cur;
    }
  });
  for (std::size_t t = 0; t < net.depth(); ++t) {
    const bool all_full = std::all_of(report.frontier_sizes.begin(), report.frontier_sizes.end(),
                                      [&](const auto& f) { return f[t] == n; });
    if (all_full) {
      report.fully_sensitive_at = t + 1;
      break;
    }
  }
  if (!layer_gamma.empty()) {
    report.growth_ok = std::all_of(growth.begin(), growth.end(), [](char c) { return c != 0; });
  }
  return report;
}

/// Meet-in-the-middle test for a single pair: grow forward from `input`
/// through layers [0, split) and backward from `output` through layers
/// [split, depth) and intersect. Agrees with the forward closure for any split.
inline bool connected_meet_in_middle(const LayeredNetwork& net, std::size_t input, std::size_t output,
                                     std::size_t split) {
  detail::require(split <= net.depth(), "split beyond network depth");
  detail::require(input < net.input_width() && output < net.output_width(), "vertex out of range");
  std::vector<char> fwd(net.input_width(), 0);
  fwd[input] = 1;
  for (std::size_t i = 0; i < split; ++i) {
    const auto& layer = net.layer(i);
    std::vector<char> next(layer.n_right(), 0);
    for (std::size_t u = 0; u < layer.n_left(); ++u)
      if (fwd[u])
        for (Vertex v : layer.neighbors(u)) next[v] = 1;
    fwd = std::move(next);
  }
  std::vector<char> bwd(net.output_width(), 0);
  bwd[output] = 1;
  for (std::size_t i = net.depth(); i-- > split;) {
    const auto& layer = net.layer(i);
    std::vector<char> prev(layer.n_left(), 0);
    for (std::size_t u = 0; u < layer.n_left(); ++u)
      for (Vertex v : layer.neighbors(u))
        if (bwd[v]) {
          prev[u] = 1;
          break;
        }
    bwd = std::move(prev);
  }
  for (std::size_t x = 0; x < fwd.size(); ++x)
    if (fwd[x] && bwd[x]) return true;
  return false;
}

struct PathCountReport {
  std::size_t s_size = 0;
  std::size_t t_size = 0;
  std::size_t depth = 0;
  BigInt exact_count = 0;
  double expected = 0;            // D^t |S||T| / n
  double gamma_min = 0;
  double bound = 0;               // (D (1 - gamma_min))^t sqrt(|S||T|)
  double absolute_deviation = 0;  // |count - expected|
  double relative_deviation = 0;  // |count / expected - 1|
  bool within_bound = false;
  bool used_big_integers = false;
};

namespace detail {

// Propagates path multiplicities layer by layer. Returns false on overflow.
inline bool propagate_u64(const LayeredNetwork& net, std::span<const Vertex> s, std::span<const char> in_t,
                          std::uint64_t& total) {
  std::vector<std::uint64_t> cur(net.input_width(), 0);
  for (Vertex u : s) cur[u] = 1;
  for (const auto& layer : net.layers()) {
    std::vector<std::uint64_t> next(layer.n_right(), 0);
    for (std::size_t u = 0; u < layer.n_left(); ++u) {
      if (!cur[u]) continue;
      for (Vertex v : layer.neighbors(u)) {
        if (__builtin_add_overflow(next[v], cur[u], &next[v])) return false;
      }
    }
    cur = std::move(next);
  }
  total = 0;
  for (std::size_t v = 0; v < cur.size(); ++v)
    if (in_t[v] && __builtin_add_overflow(total, cur[v], &total)) return false;
  return true;
}

inline BigInt propagate_big(const LayeredNetwork& net, std::span<const Vertex> s, std::span<const char> in_t) {
  std::vector<BigInt> cur(net.input_width(), 0);
  for (Vertex u : s) cur[u] = 1;
  for (const auto& layer : net.layers()) {
    std::vector<BigInt> next(layer.n_right(), 0);
    for (std::size_t u = 0; u < layer.n_left(); ++u) {
      if (cur[u] == 0) continue;
      for (Vertex v : layer.neighbors(u)) next[v] += cur[u];
    }
    cur = std::move(next);
  }
  BigInt total = 0;
  for (std::size_t v = 0; v < cur.size(); ++v)
    if (in_t[v]) total += cur[v];
  return total;
}

}  // namespace detail

/// Number of layered paths from S (inputs) to T (outputs): the entry sum of
/// A_t ... A_1 restricted to (T, S). Exact; falls back to arbitrary
/// precision when 64 bits overflow. `layer_gamma` gives each layer's gap;
/// when empty the gaps are estimated by power iteration.
inline PathCountReport count_paths(const LayeredNetwork& net, std::span<const Vertex> s,
                                   std::span<const Vertex> t, std::span<const double> layer_gamma = {}) {
  detail::membership(s, net.input_width(), "S");
  const auto in_t = detail::membership(t, net.output_width(), "T");
  const std::size_t d = net.layer(0).degree();
  for (const auto& layer : net.layers()) {
    detail::require(layer.degree() == d, "path statistics require every layer to share degree D");
  }
  detail::require(layer_gamma.empty() || layer_gamma.size() == net.depth(),
                  "one spectral gap per layer is required");

  PathCountReport r;
  r.s_size = s.size();
  r.t_size = t.size();
  r.depth = net.depth();

  std::uint64_t small = 0;
  if (detail::propagate_u64(net, s, in_t, small)) {
    r.exact_count = small;
  } else {
    r.exact_count = detail::propagate_big(net, s, in_t);
    r.used_big_integers = true;
  }

  std::vector<double> gammas(layer_gamma.begin(), layer_gamma.end());
  if (gammas.empty()) {
    for (const auto& layer : net.layers()) gammas.push_back(estimate_second_eigenvalue(layer).gamma);
  }
  r.gamma_min = *std::min_element(gammas.begin(), gammas.end());

  const double depth = static_cast<double>(r.depth);
  const double st = double(s.size()) * double(t.size());
  r.expected = std::pow(double(d), depth) * st / double(net.output_width());
  r.bound = std::pow(double(d) * (1.0 - r.gamma_min), depth) * std::sqrt(st);
  const double count = r.exact_count.convert_to<double>();
  r.absolute_deviation = std::abs(count - r.expected);
  r.relative_deviation = r.expected > 0 ? std::abs(count / r.expected - 1.0) : 0.0;
  r.within_bound = detail::within(r.absolute_deviation, r.bound);
  return r;
}

}  // namespace xnet
