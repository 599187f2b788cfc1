// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "avmask/core/errors.hpp"
#include "avmask/core/ops.hpp"

namespace avmask {

template <class T>
BasicTensor<T> ParamSet<T>::add(const std::string& name, BasicTensor<T> tensor) {
  if (contains(name)) throw ParameterError("duplicate parameter name " + name);
  tensor.set_requires_grad(true);
  entries_.push_back({name, tensor});
  return tensor;
}

template <class T>
std::vector<BasicTensor<T>> ParamSet<T>::tensors() const {
  std::vector<BasicTensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

template <class T>
const BasicTensor<T>& ParamSet<T>::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw std::out_of_range("no parameter named " + name);
}

template <class T>
bool ParamSet<T>::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

template <class T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <class T>
void ParamSet<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <class T>
BasicTensor<T> init_normal(Rng& rng, Shape shape, double stddev) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
  return BasicTensor<T>::from(std::move(shape), std::move(v));
}

template <class T>
Linear<T>::Linear(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
  weight = params.add(name + ".weight", init_normal<T>(rng, {in, out}, stddev));
  bias = params.add(name + ".bias", BasicTensor<T>::zeros({out}));
}

template <class T>
BasicTensor<T> Linear<T>::operator()(const BasicTensor<T>& x) const {
  return linear(x, weight, bias);
}

template <class T>
LayerNorm<T>::LayerNorm(ParamSet<T>& params, const std::string& name, std::size_t dim) {
  gain = params.add(name + ".gain", BasicTensor<T>::filled({dim}, T{1}));
  bias = params.add(name + ".bias", BasicTensor<T>::zeros({dim}));
}

template <class T>
BasicTensor<T> LayerNorm<T>::operator()(const BasicTensor<T>& x) const {
  return layer_norm(x, gain, bias);
}

template <class T>
MultiHeadAttention<T>::MultiHeadAttention(ParamSet<T>& params, const std::string& name, std::size_t dim,
                                          std::size_t heads_, Rng& rng)
    : heads(heads_) {
  if (heads < 1 || dim % heads != 0)
    throw ParameterError(name + ": dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  q = Linear<T>(params, name + ".q", dim, dim, rng);
  k = Linear<T>(params, name + ".k", dim, dim, rng);
  v = Linear<T>(params, name + ".v", dim, dim, rng);
  out = Linear<T>(params, name + ".out", dim, dim, rng);
}

template <class T>
BasicTensor<T> MultiHeadAttention<T>::operator()(const BasicTensor<T>& query, const BasicTensor<T>& context,
                                                 std::vector<BasicTensor<T>>* weights) const {
  const std::size_t dim = q.weight.dim(0);
  if (query.rank() != 2 || context.rank() != 2 || query.dim(1) != dim || context.dim(1) != dim)
    throw DimensionError("attention: query " + shape_str(query.shape()) + " / context " +
                         shape_str(context.shape()) + " incompatible with width " + std::to_string(dim));
  const std::size_t dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  auto qs = q(query), ks = k(context), vs = v(context);
  std::vector<BasicTensor<T>> parts;
  parts.reserve(heads);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = heads == 1 ? qs : slice_cols(qs, h * dh, dh);
    auto kh = heads == 1 ? ks : slice_cols(ks, h * dh, dh);
    auto vh = heads == 1 ? vs : slice_cols(vs, h * dh, dh);
    auto a = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
    if (weights) weights->push_back(a);
    parts.push_back(matmul(a, vh));
  }
  auto joined = heads == 1 ? parts[0] : concat_cols<T>(parts);
  return out(joined);
}

template <class T>
TransformerBlock<T>::TransformerBlock(ParamSet<T>& params, const std::string& name, std::size_t dim,
                                      std::size_t heads, std::size_t mlp_ratio, Rng& rng)
    : norm1(params, name + ".norm1", dim),
      norm2(params, name + ".norm2", dim),
      attn(params, name + ".attn", dim, heads, rng),
      fc1(params, name + ".fc1", dim, dim * mlp_ratio, rng),
      fc2(params, name + ".fc2", dim * mlp_ratio, dim, rng) {}

template <class T>
BasicTensor<T> TransformerBlock<T>::operator()(const BasicTensor<T>& x, std::vector<BasicTensor<T>>* weights) const {
  auto n1 = norm1(x);
  auto h = add(x, attn(n1, n1, weights));
  return add(h, fc2(gelu(fc1(norm2(h)))));
}

template <class T>
BasicTensor<T> sinusoidal_positions(std::span<const std::size_t> positions, std::size_t dim) {
  if (positions.empty() || dim < 1) throw DimensionError("sinusoidal_positions: empty table");
  std::vector<T> v(positions.size() * dim);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double i2 = static_cast<double>(c - c % 2);
      const double angle = static_cast<double>(positions[r]) / std::pow(10000.0, i2 / static_cast<double>(dim));
      v[r * dim + c] = static_cast<T>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return BasicTensor<T>::from({positions.size(), dim}, std::move(v));
}

#define AVMASK_INSTANTIATE_LAYERS(T)                                                             \
  template class ParamSet<T>;                                                                   \
  template BasicTensor<T> init_normal<T>(Rng&, Shape, double);                                  \
  template struct Linear<T>;                                                                    \
  template struct LayerNorm<T>;                                                                 \
  template struct MultiHeadAttention<T>;                                                        \
  template struct TransformerBlock<T>;                                                          \
  template BasicTensor<T> sinusoidal_positions<T>(std::span<const std::size_t>, std::size_t);

AVMASK_INSTANTIATE_LAYERS(float)
AVMASK_INSTANTIATE_LAYERS(double)

}  // namespace avmask
