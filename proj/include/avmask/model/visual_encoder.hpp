// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "avmask/model/config.hpp"
#include "avmask/model/layers.hpp"

namespace avmask {

template <class T>
class VisualEncoder {
 public:
  VisualEncoder(ParamSet<T>& params, const ViTConfig& cfg, std::size_t token_dim, Rng& rng);

  // Linear D_v -> dim plus the sinusoidal embedding of each token's original
  // index. Throws DimensionError if a position is >= total_tokens.
  BasicTensor<T> embed_patches(const BasicTensor<T>& visible, std::span<const std::size_t> positions,
                               std::size_t total_tokens) const;

  // depth pre-norm blocks; shape preserving. `weights`, when given, receives
  // the attention matrices of every block and head.
  BasicTensor<T> encode_visible(const BasicTensor<T>& embedded,
                                std::vector<BasicTensor<T>>* weights = nullptr) const;

  const ViTConfig& config() const noexcept { return cfg_; }

 private:
  ViTConfig cfg_;
  Linear<T> patch_embed_;
  std::vector<TransformerBlock<T>> blocks_;
};

}  // namespace avmask
