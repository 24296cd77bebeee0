#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <type_traits>

#include "ddqn/neural/dueling_net.hpp"

namespace ddqn::nn {

// A scalar loss of the Q-matrix together with its gradient dL/dq.
template <typename Scalar>
struct QLoss {
  std::function<Scalar(const Matrix<Scalar>&)> value;
  std::function<Matrix<Scalar>(const Matrix<Scalar>&)> grad;
};

// L = sum(w .* q).
template <typename Scalar>
QLoss<Scalar> linear_loss(Matrix<Scalar> weights) {
  return {[weights](const Matrix<Scalar>& q) { return weights.cwiseProduct(q).sum(); },
          [weights](const Matrix<Scalar>&) { return weights; }};
}

// L = 0.5 * sum((q - y)^2).
template <typename Scalar>
QLoss<Scalar> squared_loss(Matrix<Scalar> targets) {
  return {[targets](const Matrix<Scalar>& q) { return Scalar(0.5) * (q - targets).squaredNorm(); },
          [targets](const Matrix<Scalar>& q) -> Matrix<Scalar> { return q - targets; }};
}

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  Eigen::Index worst_entry = 0;
};

// Compares backward() against central differences over every parameter:
// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// `tamper` may edit the analytic gradients before comparison (fault injection).
template <typename Scalar>
GradcheckResult gradcheck_detail(
    const DuelingNet<Scalar>& net, const std::type_identity_t<Matrix<Scalar>>& input,
    const std::type_identity_t<QLoss<Scalar>>& loss, std::type_identity_t<Scalar> h,
    const std::type_identity_t<std::function<void(LayerGrads<Scalar>&)>>& tamper = {}) {
  ForwardCache<Scalar> cache;
  const Matrix<Scalar> q = net.forward(input, &cache);
  LayerGrads<Scalar> analytic = net.backward(cache, loss.grad(q));
  if (tamper) tamper(analytic);

  DuelingNet<Scalar> probe = net;
  GradcheckResult result;
  for (std::size_t t = 0; t < analytic.size(); ++t) {
    for (Eigen::Index e = 0; e < analytic[t].size(); ++e) {
      Scalar& p = probe.mutable_params()[t].data()[e];
      const Scalar saved = p;
      p = saved + h;
      const Scalar up = loss.value(probe.forward(input));
      probe.mutable_params()[t].data()[e] = saved - h;
      const Scalar down = loss.value(probe.forward(input));
      probe.mutable_params()[t].data()[e] = saved;

      const double numeric = static_cast<double>(up - down) / (2.0 * static_cast<double>(h));
      const double exact = static_cast<double>(analytic[t].data()[e]);
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double err = std::abs(exact - numeric) / denom;
      if (err > result.max_rel_error) result = {err, t, e};
    }
  }
  return result;
}

template <typename Scalar>
double gradcheck(const DuelingNet<Scalar>& net, const std::type_identity_t<Matrix<Scalar>>& input,
                 const std::type_identity_t<QLoss<Scalar>>& loss,
                 std::type_identity_t<Scalar> h = Scalar(1e-5),
                 const std::type_identity_t<std::function<void(LayerGrads<Scalar>&)>>& tamper = {}) {
  return gradcheck_detail<Scalar>(net, input, loss, h, tamper).max_rel_error;
}

}  // namespace ddqn::nn

namespace ddqn::nn {

// Distance of the closest relu pre-activation to its kink. Central
// differences are only meaningful when this exceeds the step size.
template <typename Scalar>
Scalar min_abs_preactivation(const ForwardCache<Scalar>& c) {
  Scalar m = std::numeric_limits<Scalar>::infinity();
  for (const auto& p : c.conv_pre)
    if (p.size()) m = std::min(m, p.cwiseAbs().minCoeff());
  for (const auto& p : c.dense_pre)
    if (p.size()) m = std::min(m, p.cwiseAbs().minCoeff());
  return m;
}

// A glorot network, an input batch and linear-loss weights drawn from `seed`.
// Inputs are redrawn until every pre-activation clears `kink_margin`.
struct GradcheckProblem {
  DuelingNet<double> net;
  Matrix<double> input;
  Matrix<double> loss_weights;
};

GradcheckProblem random_gradcheck_problem(const NetSpec& spec, std::uint64_t seed,
                                          Eigen::Index batch = 4, double kink_margin = 1e-4);

}  // namespace ddqn::nn
