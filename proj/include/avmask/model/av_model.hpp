// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "avmask/model/audio_encoder.hpp"
#include "avmask/model/config.hpp"
#include "avmask/model/decoder.hpp"
#include "avmask/model/fusion.hpp"
#include "avmask/model/layers.hpp"
#include "avmask/model/tokenizer.hpp"
#include "avmask/model/visual_encoder.hpp"

namespace avmask {

template <class T>
struct ModelOutputs {
  std::vector<std::size_t> visible_index;
  std::vector<std::size_t> masked_index;
  BasicTensor<T> visual_tokens;    // [N_vis x encoder dim]
  BasicTensor<T> visual_boundary;  // [N_vis x D_v]
  BasicTensor<T> audio_tokens;     // [N_a x D_v], undefined for V-only
  BasicTensor<T> aligned_audio;    // [N_vis x D_v], undefined for V-only
  BasicTensor<T> fused;            // [N_vis x 2 D_v]
  BasicTensor<T> reconstruction;   // clip shape; set by forward()
  CrossAttentionWeights<T> cross_weights;
};

// Tube-masked visual encoder, dilated SE audio encoder, cross-attention
// fusion and a reconstruction decoder. Without cross-attention the fused
// tokens are [T_v || aligned T_a]; with video only they are [T_v || 0].
template <class T>
class AvMaskModel {
 public:
  AvMaskModel(const ModelConfig& cfg, std::uint64_t seed);
  AvMaskModel(const AvMaskModel&) = delete;
  AvMaskModel& operator=(const AvMaskModel&) = delete;

  // Everything up to the fused tokens. `cepstra` is ignored for V-only.
  ModelOutputs<T> encode(const BasicTensor<T>& clip, const BasicTensor<T>& cepstra, const TubeMask& mask,
                         bool keep_weights = false) const;
  // encode() plus decoding to a reconstruction of the whole clip.
  ModelOutputs<T> forward(const BasicTensor<T>& clip, const BasicTensor<T>& cepstra, const TubeMask& mask) const;

  // Appends a "head.*" mean-pool + linear classifier over fused tokens.
  void add_classifier(std::size_t num_classes, std::uint64_t seed);
  bool has_classifier() const noexcept { return static_cast<bool>(head_); }
  std::size_t num_classes() const;
  // fused [N_vis x 2 D_v] -> logits [1 x K]
  BasicTensor<T> classify(const BasicTensor<T>& fused) const;

  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }
  const ModelConfig& config() const noexcept { return cfg_; }
  const VisualEncoder<T>& visual_encoder() const { return *visual_; }
  const AudioEncoder<T>* audio_encoder() const { return audio_.get(); }
  const CrossAttention<T>* cross_attention() const { return cross_.get(); }
  const Decoder<T>& decoder() const { return *decoder_; }

 private:
  ModelConfig cfg_;
  ParamSet<T> params_;
  std::unique_ptr<VisualEncoder<T>> visual_;
  LayerNorm<T> boundary_norm_;
  Linear<T> boundary_proj_;
  std::unique_ptr<AudioEncoder<T>> audio_;
  std::unique_ptr<CrossAttention<T>> cross_;
  std::unique_ptr<Decoder<T>> decoder_;
  std::unique_ptr<Linear<T>> head_;
};

}  // namespace avmask
