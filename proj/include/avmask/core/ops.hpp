// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "avmask/core/tensor.hpp"

// Differentiable operations. Each op records a backward closure on the active
// Tape when any input requires a gradient. Outputs are checked for NaN/Inf.
// Every op is instantiated for float and double.
namespace avmask {

// --- linear algebra -------------------------------------------------------

// [m x k] . [k x n] -> [m x n]
template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
// [m x k] . [n x k]^T -> [m x n]
template <class T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& x);
// x[.. x in] . w[in x out] + b[out]. Leading axes of x are batch axes.
template <class T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b);

// --- elementwise ----------------------------------------------------------
// Binary ops accept equal shapes, or `b` whose shape is a trailing suffix of
// `a`'s shape (broadcast over the leading axes of `a`).
template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor);

template <class T>
BasicTensor<T> gelu(const BasicTensor<T>& x);  // tanh approximation
template <class T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

// --- normalisation --------------------------------------------------------

// Row-wise softmax over the last axis of a rank-2 tensor, max-subtracted.
template <class T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x);

inline constexpr double kLayerNormEps = 1e-5;
// Normalises each row over the last axis (extent d >= 2), then gain/bias.
template <class T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias);

// --- convolution ----------------------------------------------------------

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t dilation = 1;
};

// x[c_in x h x w] (*) k[c_out x c_in x kh x kw] with zero "same" padding:
// output extents are ceil(h / stride) x ceil(w / stride).
template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernels, Conv2dParams params = {});

// --- shape plumbing -------------------------------------------------------

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);
template <class T>
BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t count);
template <class T>
BasicTensor<T> concat_cols(std::span<const BasicTensor<T>> parts);
template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows);
// Places row i of x at output row rows[i]; other rows are zero.
template <class T>
BasicTensor<T> scatter_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows, std::size_t total_rows);
// [d] (or [1 x d]) -> [n x d]
template <class T>
BasicTensor<T> repeat_rows(const BasicTensor<T>& row, std::size_t n);
// out.flat[i] = x.flat[source[i]]; `source` must be a permutation-like index map.
template <class T>
BasicTensor<T> gather_elements(const BasicTensor<T>& x, std::span<const std::size_t> source, Shape out_shape);

// --- reductions -----------------------------------------------------------

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <class T>
BasicTensor<T> mean(const BasicTensor<T>& x);
// [n x d] -> [d]
template <class T>
BasicTensor<T> mean_rows(const BasicTensor<T>& x);
// [n x d] -> [target x d], window i covers rows [floor(i*n/t), ceil((i+1)*n/t)).
template <class T>
BasicTensor<T> adaptive_avg_pool_rows(const BasicTensor<T>& x, std::size_t target_rows);
// [c x h x w] -> [c]
template <class T>
BasicTensor<T> channel_mean(const BasicTensor<T>& x);
// [c x h x w] -> [c x h]
template <class T>
BasicTensor<T> mean_last_axis(const BasicTensor<T>& x);
// [c x h x w] * gates[c]
template <class T>
BasicTensor<T> channel_scale(const BasicTensor<T>& x, const BasicTensor<T>& gates);

// --- losses ---------------------------------------------------------------

// Mean of squared differences over all elements.
template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target);
// Mean of squared differences over elements with include[i] != 0.
template <class T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target, std::span<const std::uint8_t> include);
// Mean negative log-likelihood of `labels` under row-wise softmax of logits[n x K].
template <class T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::size_t> labels);

}  // namespace avmask
