// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/av_model.hpp"

#include "avmask/core/errors.hpp"
#include "avmask/core/ops.hpp"

namespace avmask {

template <class T>
AvMaskModel<T>::AvMaskModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t dv = cfg_.boundary_dim();
  Rng rng(mix_seed(seed, 0x6d6f64656c));
  visual_ = std::make_unique<VisualEncoder<T>>(params_, cfg_.encoder, dv, rng);
  boundary_norm_ = LayerNorm<T>(params_, "visual.boundary_norm", cfg_.encoder.dim);
  boundary_proj_ = Linear<T>(params_, "visual.boundary_proj", cfg_.encoder.dim, dv, rng);
  if (cfg_.modalities == Modalities::audio_visual) {
    audio_ = std::make_unique<AudioEncoder<T>>(params_, cfg_.audio, dv, rng);
    if (cfg_.use_cross_attention) cross_ = std::make_unique<CrossAttention<T>>(params_, dv, cfg_.fusion, rng);
  }
  decoder_ = std::make_unique<Decoder<T>>(params_, cfg_.decoder, cfg_.fuse_dim(), dv, rng);
}

template <class T>
ModelOutputs<T> AvMaskModel<T>::encode(const BasicTensor<T>& clip, const BasicTensor<T>& cepstra,
                                       const TubeMask& mask, bool keep_weights) const {
  const PatchGrid& grid = cfg_.grid;
  auto masked = apply_mask(patchify(clip, grid), grid, mask);
  ModelOutputs<T> out;
  out.visible_index = std::move(masked.visible_index);
  out.masked_index = std::move(masked.masked_index);
  const std::size_t n_vis = out.visible_index.size();

  auto embedded = visual_->embed_patches(masked.visible, out.visible_index, grid.num_tokens());
  out.visual_tokens = visual_->encode_visible(embedded);
  if (out.visual_tokens.dim(0) != n_vis) throw DimensionError("visual encoder changed the visible row count");
  out.visual_boundary = boundary_proj_(boundary_norm_(out.visual_tokens));

  if (!audio_) {
    const BasicTensor<T> parts[] = {out.visual_boundary, BasicTensor<T>::zeros(out.visual_boundary.shape())};
    out.fused = concat_cols<T>(parts);
    return out;
  }
  out.audio_tokens = audio_->encode(cepstra);
  out.aligned_audio = align_audio_tokens(out.audio_tokens, n_vis);
  if (cross_) {
    auto attended = (*cross_)(out.visual_boundary, out.aligned_audio, keep_weights ? &out.cross_weights : nullptr);
    out.fused = concat_fuse(attended.video_to_audio, attended.audio_to_video);
  } else {
    out.fused = concat_fuse(out.visual_boundary, out.aligned_audio);
  }
  return out;
}

template <class T>
ModelOutputs<T> AvMaskModel<T>::forward(const BasicTensor<T>& clip, const BasicTensor<T>& cepstra,
                                        const TubeMask& mask) const {
  ModelOutputs<T> out = encode(clip, cepstra, mask);
  auto seq = decoder_->assemble_sequence(out.fused, out.visible_index, out.masked_index, cfg_.grid.num_tokens());
  out.reconstruction = decoder_->decode(seq, cfg_.grid);
  return out;
}

template <class T>
void AvMaskModel<T>::add_classifier(std::size_t num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw ParameterError("classifier needs at least 2 classes");
  if (head_) throw ParameterError("classifier already attached");
  Rng rng(mix_seed(seed, 0x68656164));
  head_ = std::make_unique<Linear<T>>(params_, "head.linear", cfg_.fuse_dim(), num_classes, rng);
}

template <class T>
std::size_t AvMaskModel<T>::num_classes() const {
  return head_ ? head_->weight.dim(1) : 0;
}

template <class T>
BasicTensor<T> AvMaskModel<T>::classify(const BasicTensor<T>& fused) const {
  if (!head_) throw ParameterError("model has no classifier head");
  return (*head_)(reshape(mean_rows(fused), {1, fused.dim(1)}));
}

template class AvMaskModel<float>;
template class AvMaskModel<double>;

}  // namespace avmask
