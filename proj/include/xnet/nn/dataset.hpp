#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "xnet/error.hpp"
#include "xnet/graph_io.hpp"
#include "xnet/random.hpp"

namespace xnet::nn {

struct Dataset {
  Eigen::MatrixXd features;  // one sample per row
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(features.cols()); }

  Dataset rows(std::span<const std::size_t> idx) const {
    Dataset out;
    out.num_classes = num_classes;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    out.labels.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(idx[k]));
      out.labels.push_back(labels[idx[k]]);
    }
    return out;
  }
};

/// `classes` Gaussian blobs in `dim` dimensions. Centres are N(0, separation^2)
/// per coordinate, samples add N(0, 1) noise; labels cycle 0,1,..,classes-1.
inline Dataset gaussian_mixture(std::size_t classes, std::size_t dim, std::size_t samples, double separation,
                                std::uint64_t seed) {
  detail::require(classes >= 2 && dim >= 1 && samples >= 1, "invalid mixture shape");
  Rng rng(seed);
  Eigen::MatrixXd centres(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim));
  for (Eigen::Index c = 0; c < centres.rows(); ++c)
    for (Eigen::Index j = 0; j < centres.cols(); ++j) centres(c, j) = separation * rng.normal();
  Dataset d;
  d.num_classes = classes;
  d.features.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(dim));
  d.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const int label = static_cast<int>(i % classes);
    d.labels[i] = label;
    for (Eigen::Index j = 0; j < centres.cols(); ++j) {
      d.features(static_cast<Eigen::Index>(i), j) = centres(label, j) + rng.normal();
    }
  }
  return d;
}

/// Parity of `bits` random +-1 inputs (two classes).
inline Dataset parity(std::size_t bits, std::size_t samples, std::uint64_t seed) {
  detail::require(bits >= 1 && bits <= 63 && samples >= 1, "invalid parity shape");
  Rng rng(seed);
  Dataset d;
  d.num_classes = 2;
  d.features.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(bits));
  d.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::uint64_t word = rng.next();
    for (std::size_t b = 0; b < bits; ++b) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = (word >> b & 1u) ? 1.0 : -1.0;
    }
    d.labels[i] = std::popcount(word & ((std::uint64_t{1} << bits) - 1)) % 2;
  }
  return d;
}

/// Seeded shuffle, then the first `train_fraction` of samples go to training.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  detail::require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0,1)");
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  const auto cut = static_cast<std::size_t>(std::round(train_fraction * double(d.size())));
  detail::require(cut > 0 && cut < d.size(), "split leaves an empty side");
  return {d.rows(std::span(idx).first(cut)), d.rows(std::span(idx).subspan(cut))};
}

// ---------------------------------------------------------------------------
// IDX files: big-endian magic 0x00000801 (unsigned byte, 1-D: labels) or
// 0x00000803 (unsigned byte, 3-D: images), one big-endian u32 per dimension,
// then the raw bytes.

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

inline IdxArray read_idx(std::string_view bytes) {
  auto u32 = [&](std::size_t offset) -> std::uint32_t {
    if (offset + 4 > bytes.size()) throw FormatError("truncated IDX header", offset);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(bytes[offset + i]);
    return v;
  };
  if (bytes.size() < 4) throw FormatError("truncated IDX magic", 0);
  const std::uint32_t magic = u32(0);
  std::size_t rank = 0;
  if (magic == 0x00000801u) {
    rank = 1;
  } else if (magic == 0x00000803u) {
    rank = 3;
  } else {
    throw FormatError("bad IDX magic", 0);
  }
  IdxArray a;
  std::size_t total = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    a.dims.push_back(u32(4 + 4 * k));
    total *= a.dims.back();
  }
  const std::size_t data_offset = 4 + 4 * rank;
  if (bytes.size() < data_offset + total) throw FormatError("truncated IDX data", bytes.size());
  if (bytes.size() > data_offset + total) throw FormatError("trailing bytes after IDX data", data_offset + total);
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_offset), bytes.end());
  return a;
}

/// Images scaled to [0,1] (byte / 255), labels as class indices.
inline Dataset idx_dataset(std::string_view image_bytes, std::string_view label_bytes) {
  const auto images = read_idx(image_bytes);
  const auto labels = read_idx(label_bytes);
  if (images.dims.size() != 3) throw FormatError("image file must be 3-dimensional", 0);
  if (labels.dims.size() != 1) throw FormatError("label file must be 1-dimensional", 0);
  if (images.dims[0] != labels.dims[0]) throw FormatError("image and label counts differ", 4);
  const std::size_t n = images.dims[0];
  const std::size_t width = std::size_t{images.dims[1]} * images.dims[2];
  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j)
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = images.data[i * width + j] / 255.0;
  int max_label = 0;
  for (auto l : labels.data) {
    d.labels.push_back(l);
    max_label = std::max<int>(max_label, l);
  }
  d.num_classes = static_cast<std::size_t>(max_label) + 1;
  return d;
}

inline Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
  return idx_dataset(detail::read_file(images_path), detail::read_file(labels_path));
}

}  // namespace xnet::nn
