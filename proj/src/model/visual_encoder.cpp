// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/visual_encoder.hpp"

#include "avmask/core/errors.hpp"
#include "avmask/core/ops.hpp"

namespace avmask {

template <class T>
VisualEncoder<T>::VisualEncoder(ParamSet<T>& params, const ViTConfig& cfg, std::size_t token_dim, Rng& rng)
    : cfg_(cfg), patch_embed_(params, "visual.patch_embed", token_dim, cfg.dim, rng) {
  for (std::size_t i = 0; i < cfg.depth; ++i)
    blocks_.emplace_back(params, "visual.block" + std::to_string(i), cfg.dim, cfg.heads, cfg.mlp_ratio, rng);
}

template <class T>
BasicTensor<T> VisualEncoder<T>::embed_patches(const BasicTensor<T>& visible, std::span<const std::size_t> positions,
                                               std::size_t total_tokens) const {
  if (visible.rank() != 2 || visible.dim(0) != positions.size())
    throw DimensionError("embed_patches: " + std::to_string(positions.size()) + " positions for tokens " +
                         shape_str(visible.shape()));
  for (std::size_t p : positions)
    if (p >= total_tokens)
      throw DimensionError("embed_patches: position " + std::to_string(p) + " >= token count " +
                           std::to_string(total_tokens));
  return add(patch_embed_(visible), sinusoidal_positions<T>(positions, cfg_.dim));
}

template <class T>
BasicTensor<T> VisualEncoder<T>::encode_visible(const BasicTensor<T>& embedded,
                                                std::vector<BasicTensor<T>>* weights) const {
  if (embedded.rank() != 2 || embedded.dim(0) < 1 || embedded.dim(1) != cfg_.dim)
    throw DimensionError("encode_visible: expected [N_vis x " + std::to_string(cfg_.dim) + "], got " +
                         shape_str(embedded.shape()));
  if (weights) weights->clear();
  BasicTensor<T> x = embedded;
  std::vector<BasicTensor<T>> block_weights;
  for (const auto& block : blocks_) {
    x = block(x, weights ? &block_weights : nullptr);
    if (weights) weights->insert(weights->end(), block_weights.begin(), block_weights.end());
  }
  return x;
}

template class VisualEncoder<float>;
template class VisualEncoder<double>;

}  // namespace avmask
