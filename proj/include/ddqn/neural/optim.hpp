#pragma once

#include <cmath>
#include <string>

#include "ddqn/errors.hpp"
#include "ddqn/neural/dueling_net.hpp"

namespace ddqn::nn {

// p <- p - lr * g, elementwise. Throws ShapeMismatch.
template <typename Scalar>
void sgd_update(DuelingNet<Scalar>& net, const LayerGrads<Scalar>& grads, Scalar lr) {
  net.check_shapes(grads, "sgd_update");
  auto& params = net.mutable_params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const OptimizerConfig&) const = default;
};

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

// Holds the per-parameter Adam moments; plain SGD keeps no state.
template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  const OptimizerConfig& config() const { return config_; }
  long steps() const { return t_; }

  void step(DuelingNet<Scalar>& net, const LayerGrads<Scalar>& grads) {
    if (config_.kind == OptimizerKind::sgd) {
      sgd_update(net, grads, static_cast<Scalar>(config_.lr));
      ++t_;
      return;
    }
    net.check_shapes(grads, "adam");
    if (m_.empty()) {
      m_ = net.zero_grads();
      v_ = net.zero_grads();
    }
    ++t_;
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(config_.beta1, static_cast<double>(t_)));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(config_.beta2, static_cast<double>(t_)));
    const auto lr = static_cast<Scalar>(config_.lr);
    const auto eps = static_cast<Scalar>(config_.eps);
    auto& params = net.mutable_params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * grads[i];
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * grads[i].cwiseProduct(grads[i]);
      params[i].array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  OptimizerConfig config_;
  LayerGrads<Scalar> m_, v_;
  long t_ = 0;
};

}  // namespace ddqn::nn
