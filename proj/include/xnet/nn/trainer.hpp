#pragma once

// Deterministic minibatch trainer for masked models with gradual grouping:
// alpha follows an AlphaSchedule (one value per epoch, shared by all layers),
// then the final model is scored with grouped inference at alpha = 0.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xnet/accounting.hpp"
#include "xnet/error.hpp"
#include "xnet/nn/dataset.hpp"
#include "xnet/nn/model.hpp"
#include "xnet/nn/schedule.hpp"
#include "xnet/random.hpp"

namespace xnet::nn {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double learning_rate = 5e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  /// Absent: alpha stays 0 throughout (direct grouped training).
  std::optional<AlphaSchedule> alpha_schedule;

  /// Two-phase option: the first `encoder_layers` layers train at
  /// `frozen_lr` for the first `frozen_fraction` of epochs.
  std::size_t encoder_layers = 0;
  double frozen_lr = 5e-20;
  double frozen_fraction = 0.1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double accuracy = 0;
  double alpha = 0;
  std::uint64_t active_params = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double final_grouped_accuracy = 0;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,loss,acc,alpha,active_params\n";
    for (const auto& e : epochs) {
      out << e.epoch << ',' << e.loss << ',' << e.accuracy << ',' << e.alpha << ',' << e.active_params << '\n';
    }
    return out.str();
  }
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config) : config_(std::move(config)) {
    detail::require(config_.learning_rate > 0.0, "learning rate must be positive");
    detail::require(config_.batch_size >= 1, "batch size must be positive");
    detail::require(config_.epochs >= 1, "at least one epoch is required");
    if (config_.alpha_schedule) {
      detail::require(config_.alpha_schedule->decay_epochs >= 1, "decay phase needs at least one epoch");
      detail::require(config_.alpha_schedule->total_epochs() == config_.epochs,
                            "schedule length must equal the epoch count");
    }
  }

  double alpha_at(std::size_t epoch) const {
    return config_.alpha_schedule ? config_.alpha_schedule->value(epoch) : 0.0;
  }

  /// Trains in place. `eval` (optional) scores the final grouped model;
  /// without it the training set is used.
  TrainReport train(Model& model, const Dataset& data, const Dataset* eval = nullptr) {
    detail::require(data.size() > 0, "dataset is empty");
    detail::require(model.size() > 0, "model has no layers");
    detail::require(data.width() == model.input_width(), "dataset width does not match model input");
    detail::require(data.num_classes <= model.output_width(), "model has fewer outputs than classes");
    detail::require(config_.encoder_layers <= model.size(), "encoder larger than model");

    Rng rng(config_.seed);
    init_optimizer(model);
    const auto frozen_epochs =
        config_.encoder_layers ? static_cast<std::size_t>(std::round(config_.frozen_fraction * double(config_.epochs)))
                               : std::size_t{0};

    TrainReport report;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
      const double alpha = alpha_at(epoch);
      model.set_alpha(alpha);
      rng.shuffle(order);
      double loss_sum = 0.0;
      std::size_t seen = 0;
      for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t len = std::min(config_.batch_size, order.size() - start);
        const Dataset batch = data.rows(std::span(order).subspan(start, len));
        const auto logits = model.forward(batch.features);
        const auto loss = softmax_cross_entropy(logits, batch.labels);
        if (!std::isfinite(loss.loss)) throw TrainingDiverged(epoch);
        loss_sum += loss.loss * double(len);
        seen += len;
        const auto grads = model.backward(loss.gradient);
        step(model, grads, epoch < frozen_epochs);
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.loss = loss_sum / double(seen);
      rec.accuracy = accuracy(model.evaluate(data.features), data.labels);
      rec.alpha = alpha;
      rec.active_params = count_model(model.layer_specs()).params;
      if (!std::isfinite(rec.loss)) throw TrainingDiverged(epoch);
      report.epochs.push_back(rec);
    }
    for (std::size_t i = 0; i < model.size(); ++i) model.layer(i).clear_cache();
    model.set_alpha(0.0);
    const Dataset& scored = eval ? *eval : data;
    report.final_grouped_accuracy = accuracy(model.grouped_inference(scored.features), scored.labels);
    return report;
  }

  const TrainConfig& config() const noexcept { return config_; }

 private:
  struct AdamState {
    Eigen::MatrixXd m_w, v_w;
    Eigen::VectorXd m_b, v_b;
  };

  void init_optimizer(const Model& model) {
    state_.clear();
    step_count_ = 0;
    for (std::size_t i = 0; i < model.size(); ++i) {
      const auto& l = model.layer(i);
      AdamState s;
      s.m_w = Eigen::MatrixXd::Zero(l.weights().rows(), l.weights().cols());
      s.v_w = s.m_w;
      s.m_b = Eigen::VectorXd::Zero(l.bias().size());
      s.v_b = s.m_b;
      state_.push_back(std::move(s));
    }
  }

  void step(Model& model, const std::vector<LayerGradients>& grads, bool encoder_frozen) {
    ++step_count_;
    const double t = double(step_count_);
    for (std::size_t i = 0; i < model.size(); ++i) {
      auto& layer = model.layer(i);
      const double lr = (encoder_frozen && i < config_.encoder_layers) ? config_.frozen_lr : config_.learning_rate;
      if (config_.optimizer == OptimizerKind::sgd) {
        layer.weights() -= lr * grads[i].weights;
        layer.bias() -= lr * grads[i].bias;
        continue;
      }
      auto& s = state_[i];
      const double b1 = config_.beta1, b2 = config_.beta2;
      s.m_w = b1 * s.m_w + (1 - b1) * grads[i].weights;
      s.v_w = b2 * s.v_w + (1 - b2) * grads[i].weights.cwiseProduct(grads[i].weights);
      s.m_b = b1 * s.m_b + (1 - b1) * grads[i].bias;
      s.v_b = b2 * s.v_b + (1 - b2) * grads[i].bias.cwiseProduct(grads[i].bias);
      const double c1 = 1.0 - std::pow(b1, t);
      const double c2 = 1.0 - std::pow(b2, t);
      layer.weights().array() -=
          lr * (s.m_w.array() / c1) / ((s.v_w.array() / c2).sqrt() + config_.adam_epsilon);
      layer.bias().array() -= lr * (s.m_b.array() / c1) / ((s.v_b.array() / c2).sqrt() + config_.adam_epsilon);
    }
  }

  TrainConfig config_;
  std::vector<AdamState> state_;
  std::size_t step_count_ = 0;
};

}  // namespace xnet::nn
