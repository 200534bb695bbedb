#pragma once

// Graph families used throughout: D-regular bipartite layers, XOR Cayley
// graphs over {0,1}^k, their bipartite double covers and layered stacks.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xnet/error.hpp"
#include "xnet/random.hpp"

namespace xnet {

using Vertex = std::uint32_t;

enum class Construction { union_of_permutations, cayley_double_cover, explicit_edges };

inline const char* to_string(Construction c) {
  switch (c) {
    case Construction::union_of_permutations: return "union-of-permutations";
    case Construction::cayley_double_cover: return "cayley-double-cover";
    case Construction::explicit_edges: return "explicit";
  }
  return "unknown";
}

/// How parallel edges are handled by the random permutation construction.
enum class EdgeMode {
  keep_parallel,  // plain union of d shuffles, duplicates kept and flagged
  dedup,          // each new permutation is repaired to avoid existing edges
};

namespace detail {

inline std::uint64_t fnv1a(std::span<const Vertex> data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (Vertex v : data) {
    for (int b = 0; b < 4; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace detail

/// D-regular (on the left) bipartite graph stored as a flat n_left x D
/// neighbour table. Rows are sorted; repeated entries are parallel edges.
/// Immutable after construction.
class BipartiteGraph {
 public:
  BipartiteGraph(std::size_t n_left, std::size_t n_right, std::size_t degree,
                 std::vector<Vertex> flat_adjacency,
                 Construction construction = Construction::explicit_edges,
                 std::uint64_t seed = 0)
      : n_left_(n_left), n_right_(n_right), degree_(degree),
        adjacency_(std::move(flat_adjacency)), construction_(construction), seed_(seed) {
    detail::require(n_left > 0 && n_right > 0, "bipartite graph needs vertices on both sides");
    detail::require(degree > 0, "bipartite graph degree must be positive");
    detail::require(adjacency_.size() == n_left * degree,
                    "adjacency size does not equal n_left * degree");
    for (std::size_t u = 0; u < n_left_; ++u) {
      auto row = mutable_row(u);
      std::sort(row.begin(), row.end());
      for (Vertex v : row) {
        detail::require(v < n_right_, "neighbour index out of range");
      }
      if (std::adjacent_find(row.begin(), row.end()) != row.end()) parallel_ = true;
    }
  }

  static BipartiteGraph from_rows(std::size_t n_right, const std::vector<std::vector<Vertex>>& rows,
                                  Construction construction = Construction::explicit_edges,
                                  std::uint64_t seed = 0) {
    detail::require(!rows.empty(), "bipartite graph needs at least one left vertex");
    const std::size_t d = rows.front().size();
    std::vector<Vertex> flat;
    flat.reserve(rows.size() * d);
    for (const auto& r : rows) {
      detail::require(r.size() == d, "every left vertex must have the same degree");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return BipartiteGraph(rows.size(), n_right, d, std::move(flat), construction, seed);
  }

  std::size_t n_left() const noexcept { return n_left_; }
  std::size_t n_right() const noexcept { return n_right_; }
  std::size_t degree() const noexcept { return degree_; }
  std::size_t edge_count() const noexcept { return adjacency_.size(); }
  Construction construction() const noexcept { return construction_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool has_parallel_edges() const noexcept { return parallel_; }

  std::span<const Vertex> neighbors(std::size_t u) const {
    return {adjacency_.data() + u * degree_, degree_};
  }
  std::span<const Vertex> flat() const noexcept { return adjacency_; }

  /// Degree of every right vertex, counting parallel edges.
  std::vector<std::size_t> right_degrees() const {
    std::vector<std::size_t> deg(n_right_, 0);
    for (Vertex v : adjacency_) ++deg[v];
    return deg;
  }

  /// Right degree if every right vertex has the same degree.
  std::optional<std::size_t> right_regular_degree() const {
    const auto deg = right_degrees();
    if (std::adjacent_find(deg.begin(), deg.end(), std::not_equal_to<>()) != deg.end()) {
      return std::nullopt;
    }
    return deg.front();
  }

  /// Content-addressed identifier, stable across runs and platforms.
  std::string id() const {
    std::uint64_t h = detail::fnv1a(adjacency_);
    return "bg-" + std::to_string(n_left_) + "x" + std::to_string(n_right_) + "-d" +
           std::to_string(degree_) + "-" + detail::hex64(h);
  }

  friend bool operator==(const BipartiteGraph& a, const BipartiteGraph& b) {
    return a.n_left_ == b.n_left_ && a.n_right_ == b.n_right_ && a.degree_ == b.degree_ &&
           a.adjacency_ == b.adjacency_;
  }

 private:
  std::span<Vertex> mutable_row(std::size_t u) { return {adjacency_.data() + u * degree_, degree_}; }

  std::size_t n_left_;
  std::size_t n_right_;
  std::size_t degree_;
  std::vector<Vertex> adjacency_;
  Construction construction_;
  std::uint64_t seed_;
  bool parallel_ = false;
};

/// Undirected multigraph in CSR form. Each edge {u,v} appears in both rows.
class UndirectedGraph {
 public:
  UndirectedGraph(std::size_t n, std::vector<std::vector<Vertex>> rows) : n_(n) {
    detail::require(rows.size() == n, "row count must equal vertex count");
    offsets_.reserve(n + 1);
    offsets_.push_back(0);
    for (auto& r : rows) {
      std::sort(r.begin(), r.end());
      for (Vertex v : r) detail::require(v < n, "neighbour index out of range");
      targets_.insert(targets_.end(), r.begin(), r.end());
      offsets_.push_back(targets_.size());
    }
    // Symmetry: multiplicity of v in row u equals multiplicity of u in row v.
    for (std::size_t u = 0; u < n; ++u) {
      auto nu = neighbors(u);
      for (auto it = nu.begin(); it != nu.end();) {
        const Vertex v = *it;
        const auto run = std::upper_bound(it, nu.end(), v);
        auto nv = neighbors(v);
        const auto back = std::equal_range(nv.begin(), nv.end(), static_cast<Vertex>(u));
        detail::require(run - it == back.second - back.first,
                        "undirected adjacency is not symmetric");
        it = run;
      }
    }
  }

  static UndirectedGraph from_edges(std::size_t n, std::span<const std::pair<Vertex, Vertex>> edges) {
    std::vector<std::vector<Vertex>> rows(n);
    for (auto [u, v] : edges) {
      detail::require(u < n && v < n, "edge endpoint out of range");
      rows[u].push_back(v);
      if (u != v) rows[v].push_back(u);
    }
    return UndirectedGraph(n, std::move(rows));
  }

  static UndirectedGraph complete(std::size_t n) {
    std::vector<std::vector<Vertex>> rows(n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        if (u != v) rows[u].push_back(static_cast<Vertex>(v));
    return UndirectedGraph(n, std::move(rows));
  }

  static UndirectedGraph cycle(std::size_t n) {
    detail::require(n >= 3, "cycle needs at least 3 vertices");
    std::vector<std::vector<Vertex>> rows(n);
    for (std::size_t u = 0; u < n; ++u) {
      rows[u] = {static_cast<Vertex>((u + 1) % n), static_cast<Vertex>((u + n - 1) % n)};
    }
    return UndirectedGraph(n, std::move(rows));
  }

  std::size_t vertex_count() const noexcept { return n_; }
  std::span<const Vertex> neighbors(std::size_t u) const {
    return {targets_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }

  std::optional<std::size_t> regular_degree() const {
    const std::size_t d = offsets_[1] - offsets_[0];
    for (std::size_t u = 1; u < n_; ++u)
      if (offsets_[u + 1] - offsets_[u] != d) return std::nullopt;
    return d;
  }

  /// Undirected edge count (each {u,v} once).
  std::size_t edge_count() const noexcept { return targets_.size() / 2; }

 private:
  std::size_t n_;
  std::vector<std::size_t> offsets_;
  std::vector<Vertex> targets_;
};

using Word = std::uint64_t;

/// Cayley graph of ({0,1}^k, XOR) with generator set H. Neighbours are
/// computed on demand: N(x) = { x ^ h : h in H }.
class CayleyGraph {
 public:
  static constexpr unsigned kMaxDimension = 62;

  CayleyGraph(unsigned dimension, std::vector<Word> generators)
      : dimension_(dimension), generators_(std::move(generators)) {
    detail::require(dimension >= 1 && dimension <= kMaxDimension, "dimension out of range");
    detail::require(!generators_.empty(), "at least one generator is required");
    const Word limit = Word{1} << dimension;
    for (Word h : generators_) {
      detail::require(h != 0, "zero generator would create self-loops");
      detail::require(h < limit, "generator does not fit in k bits");
    }
    auto sorted = generators_;
    std::sort(sorted.begin(), sorted.end());
    detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                    "generators must be distinct");
  }

  unsigned dimension() const noexcept { return dimension_; }
  std::span<const Word> generators() const noexcept { return generators_; }
  std::size_t degree() const noexcept { return generators_.size(); }
  Word vertex_count() const noexcept { return Word{1} << dimension_; }

  std::vector<Word> neighbors(Word x) const {
    std::vector<Word> out;
    out.reserve(generators_.size());
    for (Word h : generators_) out.push_back(x ^ h);
    std::sort(out.begin(), out.end());
    return out;
  }

  UndirectedGraph to_undirected() const {
    detail::require(dimension_ <= 24, "graph too large to materialise");
    const auto n = static_cast<std::size_t>(vertex_count());
    std::vector<std::vector<Vertex>> rows(n);
    for (std::size_t x = 0; x < n; ++x) {
      rows[x].reserve(generators_.size());
      for (Word h : generators_) rows[x].push_back(static_cast<Vertex>(x ^ h));
    }
    return UndirectedGraph(n, std::move(rows));
  }

 private:
  unsigned dimension_;
  std::vector<Word> generators_;
};

/// Generator budget |H| = ceil(c * k^2 / eps^2) for a target spectral gap 1 - eps.
struct ExpanderBudget {
  static constexpr double kDefaultConstant = 0.35;

  double epsilon = 0.5;
  double constant = kDefaultConstant;
  std::size_t generator_count = 1;

  static ExpanderBudget for_dimension(unsigned k, double epsilon,
                                      double constant = kDefaultConstant) {
    detail::require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
    detail::require(constant > 0.0, "budget constant must be positive");
    detail::require(k >= 1 && k <= CayleyGraph::kMaxDimension, "dimension out of range");
    const double raw = constant * double(k) * double(k) / (epsilon * epsilon);
    // Guard against 255.99999... style rounding of exact products.
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    ExpanderBudget b{epsilon, constant, std::max<std::size_t>(count, 1)};
    detail::require(b.generator_count < (std::size_t{1} << k),
                    "generator budget " + std::to_string(b.generator_count) +
                        " must be below 2^k = " + std::to_string(std::size_t{1} << k));
    return b;
  }

  static ExpanderBudget with_count(std::size_t count) {
    detail::require(count >= 1, "generator count must be positive");
    return ExpanderBudget{0.0, 0.0, count};
  }
};

/// Ordered stack of bipartite layers; layer i feeds layer i+1.
class LayeredNetwork {
 public:
  explicit LayeredNetwork(std::vector<BipartiteGraph> layers) : layers_(std::move(layers)) {
    detail::require(!layers_.empty(), "layered network needs at least one layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      detail::require(layers_[i].n_right() == layers_[i + 1].n_left(),
                      "layer " + std::to_string(i) + " output width does not match next input width");
    }
  }

  std::size_t depth() const noexcept { return layers_.size(); }
  const BipartiteGraph& layer(std::size_t i) const { return layers_.at(i); }
  std::span<const BipartiteGraph> layers() const noexcept { return layers_; }
  std::size_t input_width() const { return layers_.front().n_left(); }
  std::size_t output_width() const { return layers_.back().n_right(); }

  bool uniform_width() const {
    return std::all_of(layers_.begin(), layers_.end(), [&](const BipartiteGraph& g) {
      return g.n_left() == input_width() && g.n_right() == input_width();
    });
  }

 private:
  std::vector<BipartiteGraph> layers_;
};

namespace detail {

// Kuhn augmenting path over the complement of `taken` (row u may not use a
// right vertex already in taken[u]).
inline bool has_edge(const std::vector<Vertex>& row, Vertex v) {
  return std::find(row.begin(), row.end(), v) != row.end();
}

inline bool augment(std::size_t u, const std::vector<std::vector<Vertex>>& taken,
                    std::vector<std::int64_t>& match_right, std::vector<char>& visited,
                    std::span<const Vertex> order) {
  for (Vertex v : order) {
    if (visited[v] || has_edge(taken[u], v)) continue;
    visited[v] = 1;
    if (match_right[v] < 0 ||
        augment(static_cast<std::size_t>(match_right[v]), taken, match_right, visited, order)) {
      match_right[v] = static_cast<std::int64_t>(u);
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Union of d independent uniform permutations of [0,n): left u is joined to
/// perm_j[u] for j = 0..d-1, each permutation drawn with Rng::shuffle in
/// sequence from a single Rng(seed). Both sides are exactly d-regular.
///
/// In dedup mode a permutation that would repeat an existing edge is repaired
/// by augmenting paths in the complement graph, which always admits a perfect
/// matching because it is (n - j)-regular.
inline BipartiteGraph build_random_regular_bipartite(std::size_t n, std::size_t d, std::uint64_t seed,
                                                     EdgeMode mode = EdgeMode::keep_parallel) {
  detail::require(n > 0, "n must be positive");
  detail::require(d >= 1 && d <= n, "degree must satisfy 1 <= d <= n");
  detail::require(n <= (std::size_t{1} << 31), "n too large");
  Rng rng(seed);
  std::vector<std::vector<Vertex>> rows(n);
  for (auto& r : rows) r.reserve(d);

  for (std::size_t j = 0; j < d; ++j) {
    auto perm = rng.permutation(static_cast<std::uint32_t>(n));
    if (mode == EdgeMode::dedup) {
      std::vector<std::int64_t> match_right(n, -1);
      std::vector<std::size_t> unmatched;
      for (std::size_t u = 0; u < n; ++u) {
        if (!detail::has_edge(rows[u], perm[u])) {
          match_right[perm[u]] = static_cast<std::int64_t>(u);
        } else {
          unmatched.push_back(u);
        }
      }
      std::vector<char> visited(n);
      for (std::size_t u : unmatched) {
        std::fill(visited.begin(), visited.end(), 0);
        // The shuffled order gives a seeded, deterministic search order.
        const bool ok = detail::augment(u, rows, match_right, visited, perm);
        if (!ok) throw InvalidState("complement matching failed; graph state corrupted");
      }
      for (std::size_t v = 0; v < n; ++v) {
        perm[static_cast<std::size_t>(match_right[v])] = static_cast<Vertex>(v);
      }
    }
    for (std::size_t u = 0; u < n; ++u) rows[u].push_back(perm[u]);
  }
  return BipartiteGraph::from_rows(n, rows, Construction::union_of_permutations, seed);
}

/// Left u joined to right u. Degree 1, spectral gap 0.
inline BipartiteGraph identity_matching(std::size_t n) {
  std::vector<Vertex> flat(n);
  for (std::size_t u = 0; u < n; ++u) flat[u] = static_cast<Vertex>(u);
  return BipartiteGraph(n, n, 1, std::move(flat));
}

inline BipartiteGraph complete_bipartite(std::size_t n_left, std::size_t n_right) {
  std::vector<Vertex> flat;
  flat.reserve(n_left * n_right);
  for (std::size_t u = 0; u < n_left; ++u)
    for (std::size_t v = 0; v < n_right; ++v) flat.push_back(static_cast<Vertex>(v));
  return BipartiteGraph(n_left, n_right, n_right, std::move(flat));
}

/// `budget.generator_count` distinct nonzero k-bit words, sorted ascending.
/// Sampling is a partial Fisher-Yates over the 2^k - 1 nonzero words with a
/// sparse swap table, so memory is O(count) regardless of k.
inline std::vector<Word> sample_generators(unsigned k, const ExpanderBudget& budget, std::uint64_t seed) {
  detail::require(k >= 1 && k <= CayleyGraph::kMaxDimension, "dimension out of range");
  const Word available = (Word{1} << k) - 1;
  detail::require(budget.generator_count <= available,
                  "requested " + std::to_string(budget.generator_count) + " generators but only " +
                      std::to_string(available) + " nonzero words exist");
  Rng rng(seed);
  std::unordered_map<Word, Word> swapped;
  auto at = [&](Word i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<Word> out;
  out.reserve(budget.generator_count);
  for (Word i = 0; i < budget.generator_count; ++i) {
    const Word j = i + rng.uniform_below(available - i);
    const Word vi = at(i);
    const Word vj = at(j);
    swapped[j] = vi;
    swapped[i] = vj;
    out.push_back(vj + 1);  // slots index the nonzero words 1..2^k-1
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline CayleyGraph build_cayley_xor_graph(unsigned k, std::vector<Word> generators) {
  return CayleyGraph(k, std::move(generators));
}

/// Bipartite double cover: left u joined to right v iff {u,v} is an edge.
inline BipartiteGraph bipartite_double_cover(const UndirectedGraph& g) {
  const auto d = g.regular_degree();
  detail::require(d.has_value() && *d > 0, "double cover requires a regular graph of positive degree");
  std::vector<Vertex> flat;
  flat.reserve(g.vertex_count() * *d);
  for (std::size_t u = 0; u < g.vertex_count(); ++u) {
    auto nb = g.neighbors(u);
    flat.insert(flat.end(), nb.begin(), nb.end());
  }
  return BipartiteGraph(g.vertex_count(), g.vertex_count(), *d, std::move(flat),
                        Construction::explicit_edges);
}

inline BipartiteGraph bipartite_double_cover(const CayleyGraph& g) {
  const auto n = static_cast<std::size_t>(g.vertex_count());
  detail::require(g.dimension() <= 24, "graph too large to materialise");
  std::vector<Vertex> flat;
  flat.reserve(n * g.degree());
  for (std::size_t x = 0; x < n; ++x) {
    for (Word y : g.neighbors(x)) flat.push_back(static_cast<Vertex>(y));
  }
  return BipartiteGraph(n, n, g.degree(), std::move(flat), Construction::cayley_double_cover);
}

/// Network of `depth` independent random layers, layer i seeded with seed + i.
inline LayeredNetwork random_layered_network(std::size_t n, std::size_t d, std::size_t depth,
                                             std::uint64_t seed,
                                             EdgeMode mode = EdgeMode::keep_parallel) {
  detail::require(depth >= 1, "depth must be at least 1");
  std::vector<BipartiteGraph> layers;
  layers.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    layers.push_back(build_random_regular_bipartite(n, d, seed + i, mode));
  }
  return LayeredNetwork(std::move(layers));
}

}  // namespace xnet
