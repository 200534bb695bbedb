#pragma once

// Model checkpoint, little-endian binary:
//
//   "XNETCKPT"                      8 bytes
//   u32 version (= 1)
//   u32 layer count
//   per layer:
//     u32 n_out, u32 n_in, u8 activation (0 none, 1 relu), f64 alpha
//     u32 length, bytes   mask file name, relative to the checkpoint's directory
//     f64 weights[n_out * n_in]   row-major
//     f64 bias[n_out]
//
// Masks are stored next to the checkpoint as XMASK files.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "xnet/error.hpp"
#include "xnet/graph_io.hpp"
#include "xnet/mask.hpp"
#include "xnet/nn/model.hpp"

namespace xnet::nn {

inline constexpr std::string_view kCheckpointMagic = "XNETCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace io {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xffu));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xffu));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(bytes_[pos_ + i])} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("truncated checkpoint", pos_);
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace io

/// Writes the checkpoint to `path` and each layer's mask to
/// `<path>.layer<i>.xmask`.
inline void save_checkpoint(const Model& model, const std::string& path) {
  namespace fs = std::filesystem;
  std::string out(kCheckpointMagic);
  io::put_u32(out, kCheckpointVersion);
  io::put_u32(out, static_cast<std::uint32_t>(model.size()));
  const fs::path base(path);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& l = model.layer(i);
    const std::string mask_name = base.filename().string() + ".layer" + std::to_string(i) + ".xmask";
    save_xmask(l.mask(), (base.parent_path() / mask_name).string());
    io::put_u32(out, static_cast<std::uint32_t>(l.n_out()));
    io::put_u32(out, static_cast<std::uint32_t>(l.n_in()));
    out.push_back(l.activation() == Activation::relu ? 1 : 0);
    io::put_f64(out, l.alpha());
    io::put_u32(out, static_cast<std::uint32_t>(mask_name.size()));
    out += mask_name;
    for (Eigen::Index r = 0; r < l.weights().rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights().cols(); ++c) io::put_f64(out, l.weights()(r, c));
    for (Eigen::Index r = 0; r < l.bias().size(); ++r) io::put_f64(out, l.bias()(r));
  }
  detail::write_file(path, out);
}

inline Model load_checkpoint(const std::string& path) {
  namespace fs = std::filesystem;
  const std::string bytes = detail::read_file(path);
  io::Reader in(bytes);
  if (in.take(kCheckpointMagic.size()) != kCheckpointMagic) throw FormatError("bad checkpoint magic", 0);
  if (in.uint(4) != kCheckpointVersion) throw FormatError("unsupported checkpoint version", 8);
  const auto layers = in.uint(4);
  Model model;
  for (std::uint64_t i = 0; i < layers; ++i) {
    const auto n_out = static_cast<Eigen::Index>(in.uint(4));
    const auto n_in = static_cast<Eigen::Index>(in.uint(4));
    const auto act_offset = in.offset();
    const auto act = in.uint(1);
    if (act > 1) throw FormatError("unknown activation code", act_offset);
    const double alpha = in.f64();
    const auto name_len = in.uint(4);
    const std::string mask_name(in.take(name_len));
    auto mask = load_xmask((fs::path(path).parent_path() / mask_name).string());
    if (mask.n_out() != static_cast<std::size_t>(n_out) || mask.n_in() != static_cast<std::size_t>(n_in)) {
      throw FormatError("mask file shape does not match checkpoint layer", in.offset());
    }
    Eigen::MatrixXd w(n_out, n_in);
    for (Eigen::Index r = 0; r < n_out; ++r)
      for (Eigen::Index c = 0; c < n_in; ++c) w(r, c) = in.f64();
    Eigen::VectorXd b(n_out);
    for (Eigen::Index r = 0; r < n_out; ++r) b(r) = in.f64();
    model.add(MaskedLinearLayer(std::move(mask), act ? Activation::relu : Activation::none, std::move(w),
                                std::move(b), alpha));
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint", in.offset());
  return model;
}

}  // namespace xnet::nn
