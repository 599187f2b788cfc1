// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/decoder.hpp"

#include "avmask/core/errors.hpp"
#include "avmask/core/ops.hpp"
#include "avmask/model/tokenizer.hpp"

namespace avmask {

template <class T>
Decoder<T>::Decoder(ParamSet<T>& params, const DecoderConfig& cfg, std::size_t fuse_dim, std::size_t token_dim,
                    Rng& rng)
    : cfg_(cfg), fuse_proj_(params, "decoder.fuse_proj", fuse_dim, cfg.dim, rng) {
  mask_token_ = params.add("decoder.mask_token", init_normal<T>(rng, {cfg.dim}, 0.02));
  for (std::size_t i = 0; i < cfg.depth; ++i)
    blocks_.emplace_back(params, "decoder.block" + std::to_string(i), cfg.dim, cfg.heads, cfg.mlp_ratio, rng);
  norm_ = LayerNorm<T>(params, "decoder.norm", cfg.dim);
  head_ = Linear<T>(params, "decoder.head", cfg.dim, token_dim, rng);
}

template <class T>
BasicTensor<T> Decoder<T>::assemble_sequence(const BasicTensor<T>& fused, std::span<const std::size_t> visible_index,
                                             std::span<const std::size_t> masked_index,
                                             std::size_t total_tokens) const {
  if (fused.rank() != 2 || fused.dim(0) != visible_index.size())
    throw DimensionError("assemble_sequence: " + std::to_string(visible_index.size()) + " visible indices for fused " +
                         shape_str(fused.shape()));
  if (visible_index.size() + masked_index.size() != total_tokens)
    throw DimensionError("assemble_sequence: " + std::to_string(visible_index.size()) + " visible + " +
                         std::to_string(masked_index.size()) + " masked != " + std::to_string(total_tokens));
  std::vector<std::uint8_t> seen(total_tokens, 0);
  for (auto list : {visible_index, masked_index})
    for (std::size_t i : list) {
      if (i >= total_tokens) throw DimensionError("assemble_sequence: index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw DimensionError("assemble_sequence: index " + std::to_string(i) + " appears twice");
    }

  std::vector<std::size_t> all(total_tokens);
  for (std::size_t i = 0; i < total_tokens; ++i) all[i] = i;
  auto seq = add(scatter_rows(fuse_proj_(fused), visible_index, total_tokens),
                 sinusoidal_positions<T>(all, cfg_.dim));
  if (!masked_index.empty())
    seq = add(seq, scatter_rows(repeat_rows(mask_token_, masked_index.size()), masked_index, total_tokens));
  return seq;
}

template <class T>
BasicTensor<T> Decoder<T>::decode(const BasicTensor<T>& sequence, const PatchGrid& grid) const {
  if (sequence.rank() != 2 || sequence.dim(0) != grid.num_tokens() || sequence.dim(1) != cfg_.dim)
    throw DimensionError("decode: expected [" + std::to_string(grid.num_tokens()) + " x " + std::to_string(cfg_.dim) +
                         "], got " + shape_str(sequence.shape()));
  BasicTensor<T> x = sequence;
  for (const auto& block : blocks_) {
    x = block(x);
    ++blocks_executed_;
  }
  return unpatchify(head_(norm_(x)), grid);
}

template class Decoder<float>;
template class Decoder<double>;

}  // namespace avmask
