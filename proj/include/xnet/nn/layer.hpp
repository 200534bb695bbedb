#pragma once

// Dense layer whose weights outside a connectivity mask are scaled by alpha:
//
//   W_eff = M o W + alpha (1 - M) o W,     y = act(x W_eff^T + b)
//
// At alpha = 1 this is a plain dense layer; at alpha = 0 only on-mask weights
// contribute and the layer can be evaluated in its grouped / gathered form.
// Batches are row-major: one sample per row.

#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "xnet/error.hpp"
#include "xnet/mask.hpp"
#include "xnet/random.hpp"

namespace xnet::nn {

enum class Activation { none, relu };

struct LayerGradients {
  Eigen::MatrixXd weights;  // n_out x n_in
  Eigen::VectorXd bias;     // n_out
  Eigen::MatrixXd input;    // batch x n_in
};

class MaskedLinearLayer {
 public:
  /// He-normal weights drawn from `rng`, zero bias.
  MaskedLinearLayer(ConnectivityMask mask, Activation activation, Rng& rng)
      : mask_(std::move(mask)), activation_(activation) {
    const auto rows = static_cast<Eigen::Index>(mask_.n_out());
    const auto cols = static_cast<Eigen::Index>(mask_.n_in());
    weights_.resize(rows, cols);
    const double scale = std::sqrt(2.0 / double(mask_.fan_in()));
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) weights_(i, j) = scale * rng.normal();
    bias_ = Eigen::VectorXd::Zero(rows);
    build_mask_matrix();
  }

  MaskedLinearLayer(ConnectivityMask mask, Activation activation, Eigen::MatrixXd weights,
                    Eigen::VectorXd bias, double alpha = 1.0)
      : mask_(std::move(mask)), activation_(activation), weights_(std::move(weights)), bias_(std::move(bias)) {
    detail::require(weights_.rows() == static_cast<Eigen::Index>(mask_.n_out()) &&
                        weights_.cols() == static_cast<Eigen::Index>(mask_.n_in()),
                    "weight matrix shape does not match the mask");
    detail::require(bias_.size() == weights_.rows(), "bias length does not match output width");
    build_mask_matrix();
    set_alpha(alpha);
  }

  std::size_t n_in() const noexcept { return mask_.n_in(); }
  std::size_t n_out() const noexcept { return mask_.n_out(); }
  const ConnectivityMask& mask() const noexcept { return mask_; }
  Activation activation() const noexcept { return activation_; }
  double alpha() const noexcept { return alpha_; }

  void set_alpha(double alpha) {
    detail::require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0,1]");
    alpha_ = alpha;
    scale_ = mask_matrix_.array() + alpha_ * (1.0 - mask_matrix_.array());
  }

  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  const Eigen::VectorXd& bias() const noexcept { return bias_; }
  Eigen::MatrixXd& weights() noexcept { return weights_; }
  Eigen::VectorXd& bias() noexcept { return bias_; }

  /// M + alpha (1 - M), elementwise.
  const Eigen::MatrixXd& weight_scale() const noexcept { return scale_; }
  Eigen::MatrixXd effective_weights() const { return weights_.cwiseProduct(scale_); }

  /// Forward pass that keeps what backward() needs.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
    check_input(x);
    cached_input_ = x;
    Eigen::MatrixXd z = pre_activation(x);
    cached_pre_ = z;
    return activate(std::move(z));
  }

  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& x) const {
    check_input(x);
    return activate(pre_activation(x));
  }

  /// Gradients of the effective-weight parameterisation; alpha is a constant.
  LayerGradients backward(const Eigen::MatrixXd& upstream) const {
    if (!cached_input_ || !cached_pre_) throw InvalidState("backward called without a cached forward pass");
    detail::require(upstream.rows() == cached_pre_->rows() && upstream.cols() == cached_pre_->cols(),
                    "upstream gradient shape does not match the layer output");
    Eigen::MatrixXd dz = upstream;
    if (activation_ == Activation::relu) {
      dz = dz.cwiseProduct((cached_pre_->array() > 0.0).cast<double>().matrix());
    }
    LayerGradients g;
    g.weights = (dz.transpose() * *cached_input_).cwiseProduct(scale_);
    g.bias = dz.colwise().sum().transpose();
    g.input = dz * effective_weights();
    return g;
  }

  /// Evaluates only on-mask products: per-group dense blocks for group masks,
  /// per-row gathers otherwise. Requires alpha == 0.
  Eigen::MatrixXd grouped_forward(const Eigen::MatrixXd& x) const {
    if (alpha_ != 0.0) throw InvalidState("grouped inference requires alpha == 0");
    check_input(x);
    const Eigen::Index batch = x.rows();
    Eigen::MatrixXd z(batch, static_cast<Eigen::Index>(n_out()));
    if (mask_.kind() == MaskKind::dense) {
      z = x * weights_.transpose();
    } else if (mask_.kind() == MaskKind::group) {
      const auto g = static_cast<Eigen::Index>(mask_.group_count());
      const auto in_block = static_cast<Eigen::Index>(n_in()) / g;
      const auto out_block = static_cast<Eigen::Index>(n_out()) / g;
      for (Eigen::Index b = 0; b < g; ++b) {
        z.middleCols(b * out_block, out_block) =
            x.middleCols(b * in_block, in_block) *
            weights_.block(b * out_block, b * in_block, out_block, in_block).transpose();
      }
    } else {
      for (std::size_t i = 0; i < n_out(); ++i) {
        const auto row = mask_.row(i);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(batch);
        for (Vertex j : row) acc += weights_(static_cast<Eigen::Index>(i), j) * x.col(j);
        z.col(static_cast<Eigen::Index>(i)) = acc;
      }
    }
    z.rowwise() += bias_.transpose();
    return activate(std::move(z));
  }

  /// Weights that take part in the forward pass at the current alpha.
  std::size_t active_parameters() const noexcept {
    return alpha_ > 0.0 ? n_out() * n_in() : mask_.active_connections();
  }

  void clear_cache() {
    cached_input_.reset();
    cached_pre_.reset();
  }

 private:
  void build_mask_matrix() {
    mask_matrix_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_out()), static_cast<Eigen::Index>(n_in()));
    for (std::size_t i = 0; i < n_out(); ++i)
      for (Vertex j : mask_.row(i)) mask_matrix_(static_cast<Eigen::Index>(i), j) = 1.0;
    detail::require(!mask_.kernel() || mask_.kernel()->area() == 1, "trainer layers take 1x1 masks only");
    scale_ = Eigen::MatrixXd::Ones(mask_matrix_.rows(), mask_matrix_.cols());
  }

  void check_input(const Eigen::MatrixXd& x) const {
    detail::require(x.cols() == static_cast<Eigen::Index>(n_in()), "input width does not match layer");
  }

  Eigen::MatrixXd pre_activation(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = x * effective_weights().transpose();
    z.rowwise() += bias_.transpose();
    return z;
  }

  Eigen::MatrixXd activate(Eigen::MatrixXd z) const {
    if (activation_ == Activation::relu) z = z.cwiseMax(0.0);
    return z;
  }

  ConnectivityMask mask_;
  Activation activation_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  Eigen::MatrixXd mask_matrix_;
  Eigen::MatrixXd scale_;
  double alpha_ = 1.0;
  std::optional<Eigen::MatrixXd> cached_input_;
  std::optional<Eigen::MatrixXd> cached_pre_;
};

}  // namespace xnet::nn
