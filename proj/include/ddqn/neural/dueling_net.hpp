#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ddqn/errors.hpp"
#include "ddqn/neural/layers.hpp"
#include "ddqn/neural/net_spec.hpp"
#include "ddqn/rng.hpp"

namespace ddqn::nn {

// Parameter (or gradient) tensors in layer_specs() order, weight then bias.
template <typename Scalar>
using Params = std::vector<Matrix<Scalar>>;
template <typename Scalar>
using LayerGrads = Params<Scalar>;

namespace detail {

// Fresh on construction and on every copy, so a cache can tell which network
// instance produced it.
class InstanceId {
 public:
  InstanceId() : value_(next()) {}
  InstanceId(const InstanceId&) : value_(next()) {}
  InstanceId& operator=(const InstanceId&) {
    value_ = next();
    return *this;
  }
  std::uint64_t value() const { return value_; }

 private:
  static std::uint64_t next() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }
  std::uint64_t value_;
};

}  // namespace detail

// Intermediates recorded by forward() and consumed by backward().
template <typename Scalar>
struct ForwardCache {
  std::uint64_t owner = 0;
  std::uint64_t generation = 0;
  Eigen::Index batch = 0;
  std::vector<Matrix<Scalar>> conv_patches;  // (batch*L) x (in_ch*kernel)
  std::vector<Matrix<Scalar>> conv_pre;      // (batch*L) x out_ch
  std::vector<Matrix<Scalar>> dense_in;
  std::vector<Matrix<Scalar>> dense_pre;
  Matrix<Scalar> features;   // batch x F
  Matrix<Scalar> value;      // batch x 1
  Matrix<Scalar> advantage;  // batch x |A|
};

// Shared trunk feeding a value head V(s) and an advantage head A(s,.), recombined
// by dueling_aggregate. Samples are rows: input is batch x spec.input_size(),
// output batch x kActionCount.
template <typename Scalar>
class DuelingNet {
 public:
  using Mat = Matrix<Scalar>;

  DuelingNet() = default;

  // All parameters zero.
  explicit DuelingNet(NetSpec spec) : spec_(std::move(spec)), layers_(layer_specs(spec_)) {
    params_.reserve(2 * layers_.size());
    for (const auto& l : layers_) {
      params_.push_back(Mat::Zero(l.weight_rows(), l.weight_cols()));
      params_.push_back(Mat::Zero(l.out, 1));
    }
  }

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static DuelingNet glorot(NetSpec spec, Rng& rng) {
    DuelingNet net(std::move(spec));
    for (std::size_t i = 0; i < net.layers_.size(); ++i) {
      const auto& l = net.layers_[i];
      const double k = l.type == "conv1d" ? l.kernel : 1;
      const double limit = std::sqrt(6.0 / (l.in * k + l.out * k));
      auto& w = net.params_[2 * i];
      for (Eigen::Index j = 0; j < w.size(); ++j)
        w.data()[j] = static_cast<Scalar>((2.0 * uniform_unit(rng) - 1.0) * limit);
    }
    return net;
  }

  const NetSpec& spec() const { return spec_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const Params<Scalar>& params() const { return params_; }

  // Any outstanding ForwardCache becomes stale.
  Params<Scalar>& mutable_params() {
    ++generation_;
    return params_;
  }

  // Throws ShapeMismatch unless shapes match layer_specs().
  void set_params(Params<Scalar> params) {
    check_shapes(params, "set_params");
    params_ = std::move(params);
    ++generation_;
  }

  std::uint64_t generation() const { return generation_; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
  }

  bool same_architecture(const DuelingNet& other) const { return spec_ == other.spec_; }

  Params<Scalar> zero_grads() const {
    Params<Scalar> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.push_back(Mat::Zero(p.rows(), p.cols()));
    return g;
  }

  void check_shapes(const Params<Scalar>& other, const char* where) const {
    bool ok = other.size() == params_.size();
    for (std::size_t i = 0; ok && i < params_.size(); ++i)
      ok = other[i].rows() == params_[i].rows() && other[i].cols() == params_[i].cols();
    if (!ok) throw ShapeMismatch(std::string(where) + ": tensors do not match the network layout");
  }

  template <typename Other>
  DuelingNet<Other> cast() const {
    DuelingNet<Other> out(spec_);
    Params<Other> p;
    for (const auto& m : params_) p.push_back(m.template cast<Other>());
    out.set_params(std::move(p));
    return out;
  }

  // Q-values for each row of `batch`. Fills `cache` when given.
  Mat forward(const Mat& batch, ForwardCache<Scalar>* cache = nullptr) const {
    if (batch.cols() != spec_.input_size())
      throw ShapeMismatch("forward: expected " + std::to_string(spec_.input_size()) +
                          " input columns, got " + std::to_string(batch.cols()));
    ForwardCache<Scalar> local;
    ForwardCache<Scalar>& c = cache ? *cache : local;
    c = ForwardCache<Scalar>{};
    c.owner = id_.value();
    c.generation = generation_;
    c.batch = batch.rows();
    const Eigen::Index rows = batch.rows();

    std::size_t li = 0;
    Mat h;
    if (spec_.arch == ArchTag::cnn) {
      int ch = spec_.input_channels;
      int n = spec_.window_n;
      Mat signal = batch.leftCols(ch * n);
      for (; li < layers_.size() && layers_[li].type == "conv1d"; ++li) {
        const auto& l = layers_[li];
        const int len = conv_out_length(n, l.kernel, l.stride);
        Mat patches = im2col<Scalar>(signal, ch, n, l.kernel, l.stride);
        Mat pre = patches * weight(li).transpose();
        pre.rowwise() += bias(li).col(0).transpose();
        signal = patches_to_rows<Scalar>(relu(pre), rows, len);
        c.conv_patches.push_back(std::move(patches));
        c.conv_pre.push_back(std::move(pre));
        ch = l.out;
        n = len;
      }
      h.resize(rows, signal.cols() + 2);
      h << signal, batch.rightCols(2);
    } else {
      h = batch;
    }

    for (; layers_[li].role == "trunk"; ++li) {
      Mat pre = h * weight(li).transpose();
      pre.rowwise() += bias(li).col(0).transpose();
      c.dense_in.push_back(std::move(h));
      h = relu(pre);
      c.dense_pre.push_back(std::move(pre));
    }
    return heads(std::move(h), li, c);
  }

  // Gradients of sum(q .* dq) w.r.t. every parameter. Throws StaleCache when
  // the cache came from another network or from before a parameter update.
  LayerGrads<Scalar> backward(const ForwardCache<Scalar>& c, const Mat& dq) const {
    if (c.owner != id_.value() || c.generation != generation_)
      throw StaleCache("backward: cache does not belong to the current parameters");
    if (dq.rows() != c.batch || dq.cols() != kActionCount)
      throw ShapeMismatch("backward: upstream gradient must be batch x 3");

    LayerGrads<Scalar> g = zero_grads();
    const std::size_t n_layers = layers_.size();
    const std::size_t value_li = n_layers - 2;
    const std::size_t adv_li = n_layers - 1;

    Mat dv, da;
    dueling_aggregate_backward(dq, dv, da);
    g[2 * value_li] = dv.transpose() * c.features;
    g[2 * value_li + 1] = dv.colwise().sum().transpose();
    g[2 * adv_li] = da.transpose() * c.features;
    g[2 * adv_li + 1] = da.colwise().sum().transpose();
    Mat dh = dv * weight(value_li) + da * weight(adv_li);

    const std::size_t n_conv = c.conv_pre.size();
    for (std::size_t k = c.dense_pre.size(); k-- > 0;) {
      const std::size_t li = n_conv + k;
      const Mat dpre = relu_backward(c.dense_pre[k], dh);
      g[2 * li] = dpre.transpose() * c.dense_in[k];
      g[2 * li + 1] = dpre.colwise().sum().transpose();
      dh = dpre * weight(li);
    }

    if (n_conv > 0) {
      // The two appended position columns have no parameters upstream.
      Mat dsignal = dh.leftCols(dh.cols() - 2);
      for (std::size_t li = n_conv; li-- > 0;) {
        const auto& l = layers_[li];
        const int len = conv_out_length(l.input_length, l.kernel, l.stride);
        const Mat dy = rows_to_patches<Scalar>(dsignal, l.out, len);
        const Mat dpre = relu_backward(c.conv_pre[li], dy);
        g[2 * li] = dpre.transpose() * c.conv_patches[li];
        g[2 * li + 1] = dpre.colwise().sum().transpose();
        if (li > 0) {
          const Mat dpatches = dpre * weight(li);
          dsignal = col2im<Scalar>(dpatches, c.batch, l.in, l.input_length, l.kernel, l.stride);
        }
      }
    }
    return g;
  }

 private:
  const Mat& weight(std::size_t layer) const { return params_[2 * layer]; }
  const Mat& bias(std::size_t layer) const { return params_[2 * layer + 1]; }

  Mat heads(Mat features, std::size_t li, ForwardCache<Scalar>& c) const {
    Mat v = features * weight(li).transpose();
    v.rowwise() += bias(li).col(0).transpose();
    Mat a = features * weight(li + 1).transpose();
    a.rowwise() += bias(li + 1).col(0).transpose();
    Mat q = dueling_aggregate(v, a);
    c.features = std::move(features);
    c.value = std::move(v);
    c.advantage = std::move(a);
    return q;
  }

  NetSpec spec_;
  std::vector<LayerSpec> layers_;
  Params<Scalar> params_;
  std::uint64_t generation_ = 0;
  detail::InstanceId id_;
};

template <typename Scalar>
std::pair<Matrix<Scalar>, ForwardCache<Scalar>> forward(
    const DuelingNet<Scalar>& net, const std::type_identity_t<Matrix<Scalar>>& batch) {
  ForwardCache<Scalar> cache;
  Matrix<Scalar> q = net.forward(batch, &cache);
  return {std::move(q), std::move(cache)};
}

template <typename Scalar>
LayerGrads<Scalar> backward(const DuelingNet<Scalar>& net, const ForwardCache<Scalar>& cache,
                            const std::type_identity_t<Matrix<Scalar>>& dq) {
  return net.backward(cache, dq);
}

// Copies online parameters into target. Throws ArchitectureMismatch.
template <typename Scalar>
void sync_target(const DuelingNet<Scalar>& online, DuelingNet<Scalar>& target) {
  if (!online.same_architecture(target))
    throw ArchitectureMismatch("sync_target: online is " + to_string(online.spec().arch) +
                               ", target is " + to_string(target.spec().arch) +
                               " or layer shapes differ");
  target.set_params(online.params());
}

}  // namespace ddqn::nn
