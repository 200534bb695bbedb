#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "xnet/accounting.hpp"
#include "xnet/error.hpp"
#include "xnet/nn/layer.hpp"

namespace xnet::nn {

/// Feed-forward stack of masked layers ending in logits.
class Model {
 public:
  Model() = default;
  explicit Model(std::vector<MaskedLinearLayer> layers) : layers_(std::move(layers)) { check_chain(); }

  void add(MaskedLinearLayer layer) {
    layers_.push_back(std::move(layer));
    check_chain();
  }

  std::size_t size() const noexcept { return layers_.size(); }
  MaskedLinearLayer& layer(std::size_t i) { return layers_.at(i); }
  const MaskedLinearLayer& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t input_width() const { return layers_.front().n_in(); }
  std::size_t output_width() const { return layers_.back().n_out(); }

  /// alpha is one global scalar shared by every layer.
  void set_alpha(double alpha) {
    for (auto& l : layers_) l.set_alpha(alpha);
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
    require_layers();
    Eigen::MatrixXd h = x;
    for (auto& l : layers_) h = l.forward(h);
    return h;
  }

  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& x) const {
    require_layers();
    Eigen::MatrixXd h = x;
    for (const auto& l : layers_) h = l.evaluate(h);
    return h;
  }

  /// Backpropagates dL/d(output) through every layer (last to first).
  std::vector<LayerGradients> backward(const Eigen::MatrixXd& upstream) const {
    require_layers();
    std::vector<LayerGradients> grads(layers_.size());
    Eigen::MatrixXd g = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      grads[i] = layers_[i].backward(g);
      g = grads[i].input;
    }
    return grads;
  }

  /// Computes on-mask products only. Every layer must be at alpha == 0.
  Eigen::MatrixXd grouped_inference(const Eigen::MatrixXd& x) const {
    require_layers();
    for (const auto& l : layers_) {
      if (l.alpha() != 0.0) throw InvalidState("grouped inference requires alpha == 0 on every layer");
    }
    Eigen::MatrixXd h = x;
    for (const auto& l : layers_) h = l.grouped_forward(h);
    return h;
  }

  /// Layer specs for the accounting module at the current alpha: masked
  /// layers count as masked_linear once alpha reaches 0, as linear before.
  std::vector<LayerSpec> layer_specs() const {
    std::vector<LayerSpec> specs;
    for (const auto& l : layers_) {
      LayerSpec s;
      s.c_in = l.n_in();
      s.c_out = l.n_out();
      if (l.alpha() > 0.0 || l.mask().kind() == MaskKind::dense) {
        s.kind = LayerKind::linear;
      } else {
        s.kind = LayerKind::masked_linear;
        s.fan_in = l.mask().fan_in();
      }
      specs.push_back(s);
    }
    return specs;
  }

  std::size_t active_parameters() const {
    std::size_t total = 0;
    for (const auto& l : layers_) total += l.active_parameters();
    return total;
  }

 private:
  void check_chain() const {
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      detail::require(layers_[i].n_out() == layers_[i + 1].n_in(), "layer widths do not chain");
    }
  }
  void require_layers() const {
    if (layers_.empty()) throw InvalidState("model has no layers");
  }

  std::vector<MaskedLinearLayer> layers_;
};

struct LossResult {
  double loss = 0;
  Eigen::MatrixXd gradient;  // dL/dlogits, batch x classes
};

/// Mean softmax cross-entropy over the batch.
inline LossResult softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  detail::require(static_cast<std::size_t>(logits.rows()) == labels.size(), "label count does not match batch");
  const Eigen::Index n = logits.rows();
  LossResult r;
  r.gradient.resize(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    const double z = e.sum();
    const int y = labels[static_cast<std::size_t>(i)];
    detail::require(y >= 0 && y < logits.cols(), "label out of range");
    total += -(logits(i, y) - m - std::log(z));
    r.gradient.row(i) = e / z;
    r.gradient(i, y) -= 1.0;
  }
  r.loss = total / double(n);
  r.gradient /= double(n);
  return r;
}

using MaskFactory = std::function<ConnectivityMask(std::size_t n_out, std::size_t n_in)>;

/// Hidden layers get `hidden_mask(n_out, n_in)` and ReLU; the classifier is dense.
/// Weights are drawn layer by layer from Rng(seed).
inline Model build_mlp(std::span<const std::size_t> widths, const MaskFactory& hidden_mask, std::uint64_t seed) {
  detail::require(widths.size() >= 2, "an MLP needs at least input and output widths");
  Rng rng(seed);
  Model model;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    auto mask = last ? dense_mask(widths[i + 1], widths[i]) : hidden_mask(widths[i + 1], widths[i]);
    model.add(MaskedLinearLayer(std::move(mask), last ? Activation::none : Activation::relu, rng));
  }
  return model;
}

inline double accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  detail::require(static_cast<std::size_t>(logits.rows()) == labels.size(), "label count does not match batch");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    correct += (arg == labels[static_cast<std::size_t>(i)]);
  }
  return double(correct) / double(labels.size());
}

}  // namespace xnet::nn
