// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "avmask/model/config.hpp"
#include "avmask/model/layers.hpp"

namespace avmask {

template <class T>
class Decoder {
 public:
  Decoder(ParamSet<T>& params, const DecoderConfig& cfg, std::size_t fuse_dim, std::size_t token_dim, Rng& rng);

  // Projects fused rows to the decoder width and places them at
  // `visible_index`; the shared mask token fills `masked_index`; sinusoidal
  // positions are added everywhere. The two index lists must tile
  // [0, total_tokens) exactly.
  BasicTensor<T> assemble_sequence(const BasicTensor<T>& fused, std::span<const std::size_t> visible_index,
                                   std::span<const std::size_t> masked_index, std::size_t total_tokens) const;

  // depth blocks, final norm, linear head to D_v, then unpatchify.
  BasicTensor<T> decode(const BasicTensor<T>& sequence, const PatchGrid& grid) const;

  const BasicTensor<T>& mask_token() const noexcept { return mask_token_; }
  // Transformer blocks executed since construction.
  std::size_t blocks_executed() const noexcept { return blocks_executed_; }
  const DecoderConfig& config() const noexcept { return cfg_; }

 private:
  DecoderConfig cfg_;
  Linear<T> fuse_proj_;
  BasicTensor<T> mask_token_;
  std::vector<TransformerBlock<T>> blocks_;
  LayerNorm<T> norm_;
  Linear<T> head_;
  mutable std::size_t blocks_executed_ = 0;
};

}  // namespace avmask
