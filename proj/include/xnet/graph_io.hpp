#pragma once

// XGRAPH text format:
//
//   XGRAPH 1 <n_left> <n_right> <D>
//   <D ascending neighbour indices of left vertex 0, single-space separated>
//   ...
//
// One line per left vertex, '\n' line endings. Writing the result of a read
// reproduces the input byte for byte.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xnet/error.hpp"
#include "xnet/graph.hpp"

namespace xnet {

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw FormatError("expected an unsigned integer, got '" + std::string(token) + "'", line_no);
  }
  return value;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidParameter("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameter("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// Splits on '\n'. The text must end with '\n'; no empty trailing line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      throw FormatError("missing trailing newline", lines.size() + 1);
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace detail

inline std::string write_xgraph(const BipartiteGraph& g) {
  std::string out = "XGRAPH 1 " + std::to_string(g.n_left()) + " " + std::to_string(g.n_right()) +
                    " " + std::to_string(g.degree()) + "\n";
  for (std::size_t u = 0; u < g.n_left(); ++u) {
    bool first = true;
    for (Vertex v : g.neighbors(u)) {
      if (!first) out += ' ';
      out += std::to_string(v);
      first = false;
    }
    out += '\n';
  }
  return out;
}

inline BipartiteGraph read_xgraph(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw FormatError("empty XGRAPH input", 1);
  const auto header = detail::split_spaces(lines[0]);
  if (header.size() != 5 || header[0] != "XGRAPH") throw FormatError("bad XGRAPH header", 1);
  if (header[1] != "1") throw FormatError("unsupported XGRAPH version", 1);
  const auto n_left = detail::parse_number<std::size_t>(header[2], 1);
  const auto n_right = detail::parse_number<std::size_t>(header[3], 1);
  const auto d = detail::parse_number<std::size_t>(header[4], 1);
  if (n_left == 0 || n_right == 0 || d == 0) throw FormatError("zero dimension in header", 1);
  if (lines.size() != n_left + 1) {
    throw FormatError("expected " + std::to_string(n_left) + " adjacency lines, found " +
                          std::to_string(lines.size() - 1),
                      lines.size());
  }
  std::vector<Vertex> flat;
  flat.reserve(n_left * d);
  for (std::size_t u = 0; u < n_left; ++u) {
    const std::size_t line_no = u + 2;
    const auto tokens = detail::split_spaces(lines[u + 1]);
    if (tokens.size() != d) throw FormatError("expected " + std::to_string(d) + " neighbours", line_no);
    Vertex prev = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto v = detail::parse_number<Vertex>(tokens[i], line_no);
      if (v >= n_right) throw FormatError("neighbour index out of range", line_no);
      if (i > 0 && v < prev) throw FormatError("neighbour list not ascending", line_no);
      prev = v;
      flat.push_back(v);
    }
  }
  return BipartiteGraph(n_left, n_right, d, std::move(flat), Construction::explicit_edges);
}

inline BipartiteGraph load_xgraph(const std::string& path) { return read_xgraph(detail::read_file(path)); }

inline void save_xgraph(const BipartiteGraph& g, const std::string& path) {
  detail::write_file(path, write_xgraph(g));
}

}  // namespace xnet
