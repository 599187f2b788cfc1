// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "avmask/core/rng.hpp"
#include "avmask/core/tensor.hpp"

namespace avmask {

template <class T>
struct NamedParam {
  std::string name;
  BasicTensor<T> tensor;
};

// Ordered registry of trainable tensors. Registration order is stable and
// defines optimizer-state and checkpoint order.
template <class T>
class ParamSet {
 public:
  BasicTensor<T> add(const std::string& name, BasicTensor<T> tensor);

  const std::vector<NamedParam<T>>& entries() const noexcept { return entries_; }
  std::vector<BasicTensor<T>> tensors() const;
  // Throws std::out_of_range when absent.
  const BasicTensor<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<NamedParam<T>> entries_;
};

// Gaussian init with the given standard deviation, drawn in double then
// narrowed so float and double models built from one seed agree.
template <class T>
BasicTensor<T> init_normal(Rng& rng, Shape shape, double stddev);

template <class T>
struct Linear {
  BasicTensor<T> weight;  // [in x out]
  BasicTensor<T> bias;    // [out]

  Linear() = default;
  // Xavier-normal weights, zero bias.
  Linear(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  BasicTensor<T> operator()(const BasicTensor<T>& x) const;
};

template <class T>
struct LayerNorm {
  BasicTensor<T> gain;
  BasicTensor<T> bias;

  LayerNorm() = default;
  LayerNorm(ParamSet<T>& params, const std::string& name, std::size_t dim);
  BasicTensor<T> operator()(const BasicTensor<T>& x) const;
};

// softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated, then an output
// projection. Queries and keys/values may come from different sequences.
template <class T>
struct MultiHeadAttention {
  Linear<T> q, k, v, out;
  std::size_t heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamSet<T>& params, const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);
  // query [Rq x dim], context [Rk x dim] -> [Rq x dim]. When `weights` is
  // non-null it receives one [Rq x Rk] attention matrix per head.
  BasicTensor<T> operator()(const BasicTensor<T>& query, const BasicTensor<T>& context,
                            std::vector<BasicTensor<T>>* weights = nullptr) const;
};

// Pre-norm block: x + MHSA(LN(x)), then x + MLP(LN(x)) with a GELU MLP.
template <class T>
struct TransformerBlock {
  LayerNorm<T> norm1, norm2;
  MultiHeadAttention<T> attn;
  Linear<T> fc1, fc2;

  TransformerBlock() = default;
  TransformerBlock(ParamSet<T>& params, const std::string& name, std::size_t dim, std::size_t heads,
                   std::size_t mlp_ratio, Rng& rng);
  BasicTensor<T> operator()(const BasicTensor<T>& x, std::vector<BasicTensor<T>>* weights = nullptr) const;
};

// Fixed 1-D sinusoidal table: row p, column 2i = sin(p / 10000^(2i/dim)),
// column 2i+1 = cos(same angle). Rows listed in `positions`.
template <class T>
BasicTensor<T> sinusoidal_positions(std::span<const std::size_t> positions, std::size_t dim);

}  // namespace avmask
