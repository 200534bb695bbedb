#pragma once

// Layer connectivity masks. A mask lists, for every output unit, the sorted
// input indices it is connected to. Conv masks carry a kernel size and are
// replicated across every spatial position of the kernel.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "xnet/error.hpp"
#include "xnet/graph.hpp"
#include "xnet/graph_io.hpp"
#include "xnet/random.hpp"

namespace xnet {

enum class MaskKind { expander, group, dense };

inline const char* to_string(MaskKind k) {
  switch (k) {
    case MaskKind::expander: return "expander";
    case MaskKind::group: return "group";
    case MaskKind::dense: return "dense";
  }
  return "unknown";
}

struct Kernel {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t area() const noexcept { return height * width; }
  friend bool operator==(const Kernel&, const Kernel&) = default;
};

class ConnectivityMask {
 public:
  ConnectivityMask(std::size_t n_out, std::size_t n_in, std::size_t fan_in, MaskKind kind,
                   std::vector<Vertex> flat_rows, std::optional<Kernel> kernel = std::nullopt,
                   std::size_t group_count = 1, std::string source_graph_id = {})
      : n_out_(n_out), n_in_(n_in), fan_in_(fan_in), kind_(kind), rows_(std::move(flat_rows)),
        kernel_(kernel), group_count_(group_count), source_graph_id_(std::move(source_graph_id)) {
    detail::require(n_out > 0 && n_in > 0, "mask dimensions must be positive");
    detail::require(fan_in >= 1 && fan_in <= n_in, "fan_in must satisfy 1 <= fan_in <= n_in");
    detail::require(rows_.size() == n_out * fan_in, "mask rows do not hold n_out * fan_in entries");
    detail::require((kind_ == MaskKind::dense) == (fan_in_ == n_in_),
                    "a mask is dense exactly when fan_in equals n_in");
    if (kernel_) detail::require(kernel_->area() > 0, "kernel dimensions must be positive");
    if (kind_ == MaskKind::group) {
      detail::require(group_count_ >= 2 && n_in % group_count_ == 0 && n_out % group_count_ == 0,
                      "group count must divide both channel counts");
    }
    const std::size_t out_block = n_out / group_count_;
    const std::size_t in_block = n_in / group_count_;
    for (std::size_t i = 0; i < n_out_; ++i) {
      auto r = row(i);
      detail::require(std::is_sorted(r.begin(), r.end()) &&
                          std::adjacent_find(r.begin(), r.end()) == r.end(),
                      "mask rows must be strictly ascending");
      detail::require(r.back() < n_in_, "mask index out of range");
      if (kind_ == MaskKind::group) {
        const std::size_t block = i / out_block;
        detail::require(r.front() >= block * in_block && r.back() < (block + 1) * in_block,
                        "group mask row leaves its block");
      }
    }
  }

  std::size_t n_out() const noexcept { return n_out_; }
  std::size_t n_in() const noexcept { return n_in_; }
  std::size_t fan_in() const noexcept { return fan_in_; }
  MaskKind kind() const noexcept { return kind_; }
  const std::optional<Kernel>& kernel() const noexcept { return kernel_; }
  std::size_t group_count() const noexcept { return group_count_; }
  const std::string& source_graph_id() const noexcept { return source_graph_id_; }

  std::span<const Vertex> row(std::size_t i) const { return {rows_.data() + i * fan_in_, fan_in_}; }
  std::span<const Vertex> flat() const noexcept { return rows_; }

  /// Output-by-input connection count (ignores the kernel).
  std::size_t active_connections() const noexcept { return n_out_ * fan_in_; }
  /// Active weights, including kernel replication.
  std::size_t active_parameters() const noexcept {
    return active_connections() * (kernel_ ? kernel_->area() : 1);
  }
  std::size_t dense_parameters() const noexcept {
    return n_out_ * n_in_ * (kernel_ ? kernel_->area() : 1);
  }

  bool contains(std::size_t out, std::size_t in) const {
    auto r = row(out);
    return std::binary_search(r.begin(), r.end(), static_cast<Vertex>(in));
  }

  /// Number of outputs connected to each input.
  std::vector<std::size_t> column_degrees() const {
    std::vector<std::size_t> deg(n_in_, 0);
    for (Vertex v : rows_) ++deg[v];
    return deg;
  }

  /// Row-major n_out x n_in 0/1 matrix.
  std::vector<std::uint8_t> to_dense() const {
    std::vector<std::uint8_t> m(n_out_ * n_in_, 0);
    for (std::size_t i = 0; i < n_out_; ++i)
      for (Vertex j : row(i)) m[i * n_in_ + j] = 1;
    return m;
  }

  friend bool operator==(const ConnectivityMask& a, const ConnectivityMask& b) {
    return a.n_out_ == b.n_out_ && a.n_in_ == b.n_in_ && a.fan_in_ == b.fan_in_ &&
           a.kind_ == b.kind_ && a.rows_ == b.rows_ && a.kernel_ == b.kernel_ &&
           a.group_count_ == b.group_count_;
  }

 private:
  std::size_t n_out_;
  std::size_t n_in_;
  std::size_t fan_in_;
  MaskKind kind_;
  std::vector<Vertex> rows_;
  std::optional<Kernel> kernel_;
  std::size_t group_count_;
  std::string source_graph_id_;
};

inline ConnectivityMask dense_mask(std::size_t n_out, std::size_t n_in,
                                   std::optional<Kernel> kernel = std::nullopt) {
  std::vector<Vertex> flat;
  flat.reserve(n_out * n_in);
  for (std::size_t i = 0; i < n_out; ++i)
    for (std::size_t j = 0; j < n_in; ++j) flat.push_back(static_cast<Vertex>(j));
  return ConnectivityMask(n_out, n_in, n_in, MaskKind::dense, std::move(flat), kernel);
}

/// Where an expander mask's rows come from: an existing graph or a seed.
using MaskSource = std::variant<std::uint64_t, std::reference_wrapper<const BipartiteGraph>>;

namespace detail {

// Rectangular layout: input indices are dealt out from a stream of seeded
// permutations of [0, n_in), fan_in per output row. Each full permutation
// adds one to every column, so column degrees differ by at most one. When a
// row straddles two permutations, entries of the new permutation's prefix that
// repeat the row's tail are swapped with later entries of that permutation.
inline std::vector<Vertex> balanced_rows(std::size_t n_out, std::size_t n_in, std::size_t fan_in,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vertex> flat;
  flat.reserve(n_out * fan_in);
  std::vector<Vertex> perm;
  std::size_t pos = n_in;  // forces a fresh permutation on first use
  std::vector<char> in_row(n_in, 0);
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::size_t row_start = flat.size();
    while (flat.size() - row_start < fan_in) {
      if (pos == n_in) {
        perm = rng.permutation(static_cast<std::uint32_t>(n_in));
        pos = 0;
        const std::size_t need = fan_in - (flat.size() - row_start);
        // Prefix positions [0, need) must avoid values already in the row.
        std::size_t spare = need;
        for (std::size_t p = 0; p < need; ++p) {
          if (!in_row[perm[p]]) continue;
          while (in_row[perm[spare]]) ++spare;
          std::swap(perm[p], perm[spare]);
          ++spare;
        }
      }
      const Vertex v = perm[pos++];
      in_row[v] = 1;
      flat.push_back(v);
    }
    for (std::size_t k = row_start; k < flat.size(); ++k) in_row[flat[k]] = 0;
    std::sort(flat.begin() + static_cast<std::ptrdiff_t>(row_start), flat.end());
  }
  return flat;
}

inline ConnectivityMask expander_mask(std::size_t n_out, std::size_t n_in, std::size_t fan_in,
                                      const MaskSource& source, std::optional<Kernel> kernel) {
  detail::require(n_out > 0 && n_in > 0, "mask dimensions must be positive");
  detail::require(fan_in >= 1 && fan_in <= n_in, "fan_in must satisfy 1 <= fan_in <= n_in");
  if (fan_in == n_in) return dense_mask(n_out, n_in, kernel);

  if (const auto* graph = std::get_if<std::reference_wrapper<const BipartiteGraph>>(&source)) {
    const BipartiteGraph& g = graph->get();
    detail::require(g.n_left() == n_out && g.n_right() == n_in && g.degree() == fan_in,
                    "source graph shape does not match the requested mask");
    detail::require(!g.has_parallel_edges(), "source graph has parallel edges");
    std::vector<Vertex> flat(g.flat().begin(), g.flat().end());
    return ConnectivityMask(n_out, n_in, fan_in, MaskKind::expander, std::move(flat), kernel, 1, g.id());
  }
  const auto seed = std::get<std::uint64_t>(source);
  if (n_out == n_in) {
    const auto g = build_random_regular_bipartite(n_in, fan_in, seed, EdgeMode::dedup);
    std::vector<Vertex> flat(g.flat().begin(), g.flat().end());
    return ConnectivityMask(n_out, n_in, fan_in, MaskKind::expander, std::move(flat), kernel, 1, g.id());
  }
  auto flat = balanced_rows(n_out, n_in, fan_in, seed);
  return ConnectivityMask(n_out, n_in, fan_in, MaskKind::expander, std::move(flat), kernel);
}

}  // namespace detail

/// X-Linear mask: each of n_out outputs sees fan_in of n_in inputs.
/// Square masks come from a D-regular bipartite graph (the supplied one or a
/// seeded dedup union of permutations); rectangular ones are column balanced.
inline ConnectivityMask xlinear_mask(std::size_t n_out, std::size_t n_in, std::size_t fan_in,
                                     const MaskSource& source) {
  return detail::expander_mask(n_out, n_in, fan_in, source, std::nullopt);
}

/// X-Conv mask: a channel-level xlinear mask replicated over the kernel.
inline ConnectivityMask xconv_mask(std::size_t c_out, std::size_t c_in, std::size_t fan_in, Kernel kernel,
                                   const MaskSource& source) {
  detail::require(kernel.area() > 0, "kernel dimensions must be positive");
  return detail::expander_mask(c_out, c_in, fan_in, source, kernel);
}

/// Block-diagonal mask of g groups.
inline ConnectivityMask group_mask(std::size_t c_out, std::size_t c_in, std::size_t g,
                                   std::optional<Kernel> kernel = std::nullopt) {
  detail::require(g >= 1, "group count must be positive");
  detail::require(c_in % g == 0 && c_out % g == 0, "group count must divide both channel counts");
  if (g == 1) return dense_mask(c_out, c_in, kernel);
  const std::size_t in_block = c_in / g;
  const std::size_t out_block = c_out / g;
  std::vector<Vertex> flat;
  flat.reserve(c_out * in_block);
  for (std::size_t i = 0; i < c_out; ++i) {
    const std::size_t base = (i / out_block) * in_block;
    for (std::size_t j = 0; j < in_block; ++j) flat.push_back(static_cast<Vertex>(base + j));
  }
  return ConnectivityMask(c_out, c_in, in_block, MaskKind::group, std::move(flat), kernel, g);
}

/// Channel shuffle: view channels as a g x (channels/g) matrix, transpose,
/// flatten. Entry i is the source channel placed at position i.
inline std::vector<Vertex> shuffle_permutation(std::size_t channels, std::size_t g) {
  detail::require(g >= 1 && channels >= 1, "channels and groups must be positive");
  detail::require(channels % g == 0, "group count must divide the channel count");
  const std::size_t per_group = channels / g;
  std::vector<Vertex> perm(channels);
  for (std::size_t i = 0; i < channels; ++i) {
    perm[i] = static_cast<Vertex>((i % g) * per_group + i / g);
  }
  return perm;
}

/// Boolean reachability matrix (row-major n_out x n_in) of a stack of masks,
/// optionally with a channel permutation applied between consecutive masks
/// (`between[i]` sits after mask i; an empty vector means no permutation).
inline std::vector<std::uint8_t> compose_reachability(std::span<const ConnectivityMask> masks,
                                                      std::span<const std::vector<Vertex>> between = {}) {
  detail::require(!masks.empty(), "at least one mask is required");
  const std::size_t n_in = masks.front().n_in();
  // reach[c][x]: channel c of the current stage depends on network input x.
  std::vector<std::vector<std::uint8_t>> reach(n_in, std::vector<std::uint8_t>(n_in, 0));
  for (std::size_t x = 0; x < n_in; ++x) reach[x][x] = 1;
  for (std::size_t m = 0; m < masks.size(); ++m) {
    const auto& mask = masks[m];
    detail::require(mask.n_in() == reach.size(), "consecutive masks do not chain");
    std::vector<std::vector<std::uint8_t>> next(mask.n_out(), std::vector<std::uint8_t>(n_in, 0));
    for (std::size_t o = 0; o < mask.n_out(); ++o)
      for (Vertex i : mask.row(o))
        for (std::size_t x = 0; x < n_in; ++x) next[o][x] |= reach[i][x];
    if (m < between.size() && !between[m].empty()) {
      const auto& perm = between[m];
      detail::require(perm.size() == next.size(), "permutation size does not match channels");
      std::vector<std::vector<std::uint8_t>> permuted(next.size());
      for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = next[perm[i]];
      next = std::move(permuted);
    }
    reach = std::move(next);
  }
  std::vector<std::uint8_t> out;
  out.reserve(reach.size() * n_in);
  for (const auto& r : reach) out.insert(out.end(), r.begin(), r.end());
  return out;
}

// ---------------------------------------------------------------------------
// XMASK text format:
//
//   XMASK 1 <n_out> <n_in> <fan_in> [<Kh> <Kw>] [group=<g>]
//   <fan_in ascending input indices of output 0>
//   ...
//
// Kind is implied: group=<g> marks a group mask, fan_in == n_in a dense one,
// anything else an expander mask.

inline std::string write_xmask(const ConnectivityMask& m) {
  std::string out = "XMASK 1 " + std::to_string(m.n_out()) + " " + std::to_string(m.n_in()) + " " +
                    std::to_string(m.fan_in());
  if (m.kernel()) out += " " + std::to_string(m.kernel()->height) + " " + std::to_string(m.kernel()->width);
  if (m.kind() == MaskKind::group) out += " group=" + std::to_string(m.group_count());
  out += '\n';
  for (std::size_t i = 0; i < m.n_out(); ++i) {
    bool first = true;
    for (Vertex v : m.row(i)) {
      if (!first) out += ' ';
      out += std::to_string(v);
      first = false;
    }
    out += '\n';
  }
  return out;
}

inline ConnectivityMask read_xmask(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw FormatError("empty XMASK input", 1);
  auto header = detail::split_spaces(lines[0]);
  if (header.size() < 5 || header[0] != "XMASK") throw FormatError("bad XMASK header", 1);
  if (header[1] != "1") throw FormatError("unsupported XMASK version", 1);
  std::size_t group = 1;
  if (header.back().starts_with("group=")) {
    group = detail::parse_number<std::size_t>(header.back().substr(6), 1);
    if (group < 2) throw FormatError("group count must be at least 2", 1);
    header.pop_back();
  }
  if (header.size() != 5 && header.size() != 7) throw FormatError("bad XMASK header field count", 1);
  const auto n_out = detail::parse_number<std::size_t>(header[2], 1);
  const auto n_in = detail::parse_number<std::size_t>(header[3], 1);
  const auto fan_in = detail::parse_number<std::size_t>(header[4], 1);
  if (n_out == 0 || n_in == 0 || fan_in == 0 || fan_in > n_in) {
    throw FormatError("invalid XMASK dimensions", 1);
  }
  std::optional<Kernel> kernel;
  if (header.size() == 7) {
    kernel = Kernel{detail::parse_number<std::size_t>(header[5], 1),
                    detail::parse_number<std::size_t>(header[6], 1)};
    if (kernel->area() == 0) throw FormatError("zero kernel dimension", 1);
  }
  if (lines.size() != n_out + 1) {
    throw FormatError("expected " + std::to_string(n_out) + " mask rows", lines.size());
  }
  std::vector<Vertex> flat;
  flat.reserve(n_out * fan_in);
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::size_t line_no = i + 2;
    const auto tokens = detail::split_spaces(lines[i + 1]);
    if (tokens.size() != fan_in) throw FormatError("expected " + std::to_string(fan_in) + " indices", line_no);
    for (std::size_t k = 0; k < fan_in; ++k) {
      const auto v = detail::parse_number<Vertex>(tokens[k], line_no);
      if (v >= n_in) throw FormatError("mask index out of range", line_no);
      if (k > 0 && v <= flat.back()) throw FormatError("mask row not strictly ascending", line_no);
      flat.push_back(v);
    }
  }
  const MaskKind kind = group > 1 ? MaskKind::group : (fan_in == n_in ? MaskKind::dense : MaskKind::expander);
  try {
    return ConnectivityMask(n_out, n_in, fan_in, kind, std::move(flat), kernel, group);
  } catch (const InvalidParameter& e) {
    throw FormatError(e.what(), 1);
  }
}

inline ConnectivityMask load_xmask(const std::string& path) { return read_xmask(detail::read_file(path)); }

inline void save_xmask(const ConnectivityMask& m, const std::string& path) {
  detail::write_file(path, write_xmask(m));
}

}  // namespace xnet
