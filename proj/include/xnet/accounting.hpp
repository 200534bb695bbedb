#pragma once

// Parameter and multiply-accumulate counts for the layer kinds used by
// grouped, shuffled, depthwise-separable and expander-masked networks.
// Bias terms and activation costs are excluded unless requested.

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xnet/error.hpp"
#include "xnet/graph_io.hpp"

namespace xnet {

enum class LayerKind {
  dense_conv,
  depthwise_separable,
  grouped_pointwise,
  non_bt_1d,
  masked_linear,
  masked_conv,
  linear,
  deconv,
};

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense_conv: return "dense_conv";
    case LayerKind::depthwise_separable: return "depthwise_separable";
    case LayerKind::grouped_pointwise: return "grouped_pointwise";
    case LayerKind::non_bt_1d: return "non_bt_1d";
    case LayerKind::masked_linear: return "masked_linear";
    case LayerKind::masked_conv: return "masked_conv";
    case LayerKind::linear: return "linear";
    case LayerKind::deconv: return "deconv";
  }
  return "unknown";
}

inline std::optional<LayerKind> parse_layer_kind(std::string_view s) {
  for (auto k : {LayerKind::dense_conv, LayerKind::depthwise_separable, LayerKind::grouped_pointwise,
                 LayerKind::non_bt_1d, LayerKind::masked_linear, LayerKind::masked_conv, LayerKind::linear,
                 LayerKind::deconv}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

/// One layer. `out_h` x `out_w` is the output resolution; for deconv the
/// input resolution is the output divided by `stride`.
struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  std::uint64_t c_in = 1;
  std::uint64_t c_out = 1;
  std::uint64_t kernel_h = 1;
  std::uint64_t kernel_w = 1;
  std::uint64_t out_h = 1;
  std::uint64_t out_w = 1;
  std::uint64_t groups = 1;
  std::uint64_t fan_in = 0;  // masked kinds only
  std::uint64_t stride = 1;  // deconv only
  std::string name;
};

struct CostReport {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops_multadd = 0;  // = macs
  std::uint64_t flops_2x = 0;       // = 2 * macs

  CostReport& operator+=(const CostReport& o) {
    params += o.params;
    macs += o.macs;
    flops_multadd += o.flops_multadd;
    flops_2x += o.flops_2x;
    return *this;
  }
  friend bool operator==(const CostReport&, const CostReport&) = default;
};

struct CountOptions {
  bool include_bias = false;
};

namespace detail {

inline std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw InvalidParameter("layer cost overflows 64 bits");
  return r;
}

inline std::uint64_t mul(std::initializer_list<std::uint64_t> xs) {
  std::uint64_t r = 1;
  for (auto x : xs) r = mul(r, x);
  return r;
}

}  // namespace detail

inline void validate(const LayerSpec& s) {
  using detail::require;
  require(s.c_in > 0 && s.c_out > 0, "channel counts must be positive");
  require(s.kernel_h > 0 && s.kernel_w > 0, "kernel dimensions must be positive");
  require(s.out_h > 0 && s.out_w > 0, "spatial dimensions must be positive");
  require(s.groups > 0, "group count must be positive");
  require(s.stride > 0, "stride must be positive");
  switch (s.kind) {
    case LayerKind::dense_conv:
    case LayerKind::deconv:
    case LayerKind::grouped_pointwise:
      require(s.c_in % s.groups == 0 && s.c_out % s.groups == 0, "groups must divide both channel counts");
      break;
    case LayerKind::depthwise_separable:
      require(s.c_in % s.groups == 0 && s.c_out % s.groups == 0,
              "groups must divide both pointwise channel counts");
      break;
    case LayerKind::non_bt_1d:
      require(s.c_in == s.c_out, "non-bottleneck-1D keeps the channel count");
      require(s.groups == 1, "non-bottleneck-1D has no groups");
      break;
    case LayerKind::masked_linear:
    case LayerKind::masked_conv:
      require(s.fan_in >= 1 && s.fan_in <= s.c_in, "fan_in must satisfy 1 <= fan_in <= c_in");
      break;
    case LayerKind::linear:
      break;
  }
  if (s.kind == LayerKind::grouped_pointwise) require(s.kernel_h == 1 && s.kernel_w == 1, "pointwise kernel is 1x1");
  if (s.kind == LayerKind::deconv) {
    require(s.out_h % s.stride == 0 && s.out_w % s.stride == 0, "output resolution must be a multiple of stride");
  }
}

/// Per-layer counts:
///   dense_conv           params = Kh Kw c_in c_out / g            macs = params H W
///   depthwise_separable  params = Kh Kw c_in + c_in c_out / g     macs = params H W
///   grouped_pointwise    params = c_in c_out / g                  macs = params H W
///   non_bt_1d            params = 2 (Kh + Kw) c^2  (Kh x 1 and 1 x Kw, twice)
///   masked_linear        params = c_out fan_in                    macs = params H W
///   masked_conv          params = c_out fan_in Kh Kw              macs = params H W
///   linear               params = c_in c_out                      macs = params H W
///   deconv               params = Kh Kw c_in c_out / g            macs = params (H/s)(W/s)
inline CostReport count(const LayerSpec& s, const CountOptions& opt = {}) {
  validate(s);
  using detail::mul;
  const std::uint64_t k2 = mul(s.kernel_h, s.kernel_w);
  const std::uint64_t hw = mul(s.out_h, s.out_w);
  std::uint64_t params = 0;
  std::uint64_t positions = hw;
  std::uint64_t bias = s.c_out;
  switch (s.kind) {
    case LayerKind::dense_conv:
      params = mul({k2, s.c_in, s.c_out}) / s.groups;
      break;
    case LayerKind::depthwise_separable:
      params = mul(k2, s.c_in) + mul(s.c_in, s.c_out) / s.groups;
      bias = s.c_in + s.c_out;
      break;
    case LayerKind::grouped_pointwise:
      params = mul(s.c_in, s.c_out) / s.groups;
      break;
    case LayerKind::non_bt_1d:
      params = mul({2, s.kernel_h + s.kernel_w, s.c_in, s.c_in});
      bias = 4 * s.c_out;
      break;
    case LayerKind::masked_linear:
      params = mul(s.c_out, s.fan_in);
      break;
    case LayerKind::masked_conv:
      params = mul({s.c_out, s.fan_in, k2});
      break;
    case LayerKind::linear:
      params = mul(s.c_in, s.c_out);
      break;
    case LayerKind::deconv:
      params = mul({k2, s.c_in, s.c_out}) / s.groups;
      positions = mul(s.out_h / s.stride, s.out_w / s.stride);
      break;
  }
  CostReport r;
  r.macs = mul(params, positions);
  r.params = params + (opt.include_bias ? bias : 0);
  r.flops_multadd = r.macs;
  r.flops_2x = mul(2, r.macs);
  return r;
}

inline CostReport count_model(std::span<const LayerSpec> specs, const CountOptions& opt = {}) {
  detail::require(!specs.empty(), "model has no layers");
  CostReport total;
  for (const auto& s : specs) total += count(s, opt);
  return total;
}

/// Exact nonnegative fraction in lowest terms.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Ratio of(std::uint64_t num, std::uint64_t den) {
    detail::require(den != 0, "zero denominator");
    const auto g = std::gcd(num, den);
    return g ? Ratio{num / g, den / g} : Ratio{0, 1};
  }
  Ratio operator+(const Ratio& o) const {
    return of(detail::mul(num, o.den) + detail::mul(o.num, den), detail::mul(den, o.den));
  }
  double value() const { return double(num) / double(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// The dense KxK convolution a depthwise-separable or grouped layer replaces.
inline LayerSpec dense_equivalent(const LayerSpec& s) {
  LayerSpec d = s;
  d.kind = LayerKind::dense_conv;
  d.groups = 1;
  d.fan_in = 0;
  if (s.kind == LayerKind::masked_linear || s.kind == LayerKind::linear) d.kind = LayerKind::linear;
  if (s.kind == LayerKind::deconv) d.kind = LayerKind::deconv;
  return d;
}

// ---------------------------------------------------------------------------
// Layer spec text files: one layer per line,
//
//   <kind> <c_in> <c_out> <K> <H> <W> <g> <D> [stride=<s>] [name=<label>]
//
// K is a square size ("3") or "<Kh>x<Kw>" ("3x1"). D is the masked fan-in
// (0 for unmasked kinds). '#' starts a comment; blank lines are ignored.

inline std::vector<LayerSpec> parse_layer_specs(std::string_view text) {
  std::vector<LayerSpec> specs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::string cleaned(line);
    for (char& c : cleaned)
      if (c == '\t' || c == '\r') c = ' ';
    const auto tokens = detail::split_spaces(cleaned);
    if (tokens.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (tokens.size() < 8) throw FormatError("layer line needs 8 fields", line_no);
    LayerSpec s;
    const auto kind = parse_layer_kind(tokens[0]);
    if (!kind) throw FormatError("unknown layer kind '" + std::string(tokens[0]) + "'", line_no);
    s.kind = *kind;
    s.c_in = detail::parse_number<std::uint64_t>(tokens[1], line_no);
    s.c_out = detail::parse_number<std::uint64_t>(tokens[2], line_no);
    if (auto x = tokens[3].find('x'); x != std::string_view::npos) {
      s.kernel_h = detail::parse_number<std::uint64_t>(tokens[3].substr(0, x), line_no);
      s.kernel_w = detail::parse_number<std::uint64_t>(tokens[3].substr(x + 1), line_no);
    } else {
      s.kernel_h = s.kernel_w = detail::parse_number<std::uint64_t>(tokens[3], line_no);
    }
    s.out_h = detail::parse_number<std::uint64_t>(tokens[4], line_no);
    s.out_w = detail::parse_number<std::uint64_t>(tokens[5], line_no);
    s.groups = detail::parse_number<std::uint64_t>(tokens[6], line_no);
    s.fan_in = detail::parse_number<std::uint64_t>(tokens[7], line_no);
    for (std::size_t i = 8; i < tokens.size(); ++i) {
      const auto tok = tokens[i];
      if (tok.starts_with("stride=")) {
        s.stride = detail::parse_number<std::uint64_t>(tok.substr(7), line_no);
      } else if (tok.starts_with("name=")) {
        s.name = std::string(tok.substr(5));
      } else {
        throw FormatError("unknown layer attribute '" + std::string(tok) + "'", line_no);
      }
    }
    try {
      validate(s);
    } catch (const InvalidParameter& e) {
      throw FormatError(e.what(), line_no);
    }
    specs.push_back(std::move(s));
    if (end == text.size()) break;
  }
  return specs;
}

inline std::vector<LayerSpec> load_layer_specs(const std::string& path) {
  return parse_layer_specs(detail::read_file(path));
}

}  // namespace xnet
