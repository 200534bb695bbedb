#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "xnet/error.hpp"

namespace xnet::nn {

enum class AlphaCurve { linear, cosine };

/// Multiplier on off-mask weights, decayed from 1 to 0 over `decay_epochs`
/// and held at 0 for `finetune_epochs`. Epochs are 0-based; the value for
/// epoch e applies to the whole epoch.
struct AlphaSchedule {
  std::size_t decay_epochs = 1;
  std::size_t finetune_epochs = 0;
  AlphaCurve curve = AlphaCurve::linear;

  /// Linear decay over the first half of `total_epochs`, fine-tune for the rest.
  static AlphaSchedule halves(std::size_t total_epochs, AlphaCurve curve = AlphaCurve::linear) {
    detail::require(total_epochs >= 1, "schedule needs at least one epoch");
    const std::size_t decay = std::max<std::size_t>(1, total_epochs / 2);
    return AlphaSchedule{decay, total_epochs - decay, curve};
  }

  std::size_t total_epochs() const noexcept { return decay_epochs + finetune_epochs; }

  double value(std::size_t epoch) const {
    detail::require(decay_epochs >= 1, "decay phase needs at least one epoch");
    if (epoch >= decay_epochs) return 0.0;
    const double x = double(epoch) / double(decay_epochs);
    switch (curve) {
      case AlphaCurve::linear: return 1.0 - x;
      case AlphaCurve::cosine: return 0.5 * (1.0 + std::cos(std::numbers::pi * x));
    }
    return 0.0;
  }
};

}  // namespace xnet::nn
