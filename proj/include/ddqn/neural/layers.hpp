#pragma once

#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "ddqn/errors.hpp"

namespace ddqn::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Q(s,a) = V(s) + A(s,a) - mean_a' A(s,a'). v is batch x 1, a is batch x |A|.
template <typename DerivedV, typename DerivedA>
auto dueling_aggregate(const Eigen::MatrixBase<DerivedV>& v, const Eigen::MatrixBase<DerivedA>& a)
    -> Matrix<typename DerivedA::Scalar> {
  if (v.cols() != 1 || v.rows() != a.rows())
    throw ShapeMismatch("dueling_aggregate: v is " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + ", a is " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()));
  const auto mean = a.rowwise().mean();
  return (a.colwise() - mean).colwise() + v.col(0);
}

// Reverse of dueling_aggregate: dV[b] = sum_a dQ[b,a] and
// dA[b,a] = dQ[b,a] - mean_a' dQ[b,a'].
template <typename Derived>
void dueling_aggregate_backward(const Eigen::MatrixBase<Derived>& dq,
                                Matrix<typename Derived::Scalar>& dv,
                                Matrix<typename Derived::Scalar>& da) {
  dv = dq.rowwise().sum();
  da = dq.colwise() - dq.rowwise().mean();
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

// Gradient of relu w.r.t. its pre-activation, applied to the upstream grad.
template <typename DerivedPre, typename DerivedUp>
auto relu_backward(const Eigen::MatrixBase<DerivedPre>& pre, const Eigen::MatrixBase<DerivedUp>& up) {
  using S = typename DerivedPre::Scalar;
  return (pre.array() > S(0)).select(up.array(), S(0)).matrix();
}

inline int conv_out_length(int n, int kernel, int stride) { return (n - kernel) / stride + 1; }

// Unrolls batch rows of (channels x n) signals into patch rows: row (b*L + l)
// holds the channels x kernel window starting at position l*stride.
// `x` is batch x (channels*n), row-major per sample.
template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& x, int channels, int n, int kernel, int stride) {
  const int len = conv_out_length(n, kernel, stride);
  const Eigen::Index batch = x.rows();
  Matrix<Scalar> patches(batch * len, channels * kernel);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int l = 0; l < len; ++l)
      for (int c = 0; c < channels; ++c)
        patches.row(b * len + l).segment(c * kernel, kernel) =
            x.row(b).segment(c * n + l * stride, kernel);
  return patches;
}

// Scatter-adds patch gradients back onto the signal layout used by im2col.
template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& dpatches, Eigen::Index batch, int channels, int n,
                      int kernel, int stride) {
  const int len = conv_out_length(n, kernel, stride);
  Matrix<Scalar> dx = Matrix<Scalar>::Zero(batch, channels * n);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int l = 0; l < len; ++l)
      for (int c = 0; c < channels; ++c)
        dx.row(b).segment(c * n + l * stride, kernel) +=
            dpatches.row(b * len + l).segment(c * kernel, kernel);
  return dx;
}

// Patch-major output ((b*L + l) x out_ch) to flattened per-sample rows laid
// out out_ch x L, so the result can feed the next conv or a dense layer.
template <typename Scalar>
Matrix<Scalar> patches_to_rows(const Matrix<Scalar>& y, Eigen::Index batch, int len) {
  const auto out_ch = static_cast<int>(y.cols());
  Matrix<Scalar> rows(batch, out_ch * len);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int o = 0; o < out_ch; ++o)
      rows.row(b).segment(o * len, len) = y.col(o).segment(b * len, len).transpose();
  return rows;
}

template <typename Scalar>
Matrix<Scalar> rows_to_patches(const Matrix<Scalar>& rows, int out_ch, int len) {
  const Eigen::Index batch = rows.rows();
  Matrix<Scalar> y(batch * len, out_ch);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int o = 0; o < out_ch; ++o)
      y.col(o).segment(b * len, len) = rows.row(b).segment(o * len, len).transpose();
  return y;
}

// Valid (unpadded) 1-D cross-correlation of one channels x n signal.
// `kernels` is out_ch x (in_ch*kernel): row o holds the in_ch taps of width
// `kernel` back to back. Returns out_ch x out_len.
template <typename Scalar>
Matrix<Scalar> conv1d_forward(const Matrix<Scalar>& input,
                              const std::type_identity_t<Matrix<Scalar>>& kernels,
                              const std::type_identity_t<Vector<Scalar>>& bias, int kernel, int stride) {
  const auto channels = static_cast<int>(input.rows());
  const auto n = static_cast<int>(input.cols());
  if (kernel < 1 || stride < 1) throw ShapeMismatch("conv1d: kernel and stride must be >= 1");
  if (kernels.cols() != channels * kernel || bias.size() != kernels.rows())
    throw ShapeMismatch("conv1d: kernel bank does not match input channels");
  if (kernel > n)
    throw KernelTooLarge("conv1d: kernel " + std::to_string(kernel) + " exceeds length " +
                         std::to_string(n));
  // Flatten the single signal into one row (channels x n, row-major).
  Matrix<Scalar> row(1, channels * n);
  for (int c = 0; c < channels; ++c) row.row(0).segment(c * n, n) = input.row(c);
  const Matrix<Scalar> patches = im2col<Scalar>(row, channels, n, kernel, stride);
  Matrix<Scalar> y = patches * kernels.transpose();
  y.rowwise() += bias.transpose();
  return y.transpose();
}

}  // namespace ddqn::nn
