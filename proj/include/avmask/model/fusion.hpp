// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "avmask/model/config.hpp"
#include "avmask/model/layers.hpp"

namespace avmask {

template <class T>
struct CrossAttended {
  BasicTensor<T> audio_to_video;  // T_a->v: audio queries, video keys/values
  BasicTensor<T> video_to_audio;  // T_v->a: video queries, audio keys/values
};

template <class T>
struct CrossAttentionWeights {
  std::vector<BasicTensor<T>> audio_to_video;  // per head, [R x R]
  std::vector<BasicTensor<T>> video_to_audio;
};

// Both cross-attention directions. Each direction owns its Q (query side)
// and K/V (context side) projections plus an output projection.
template <class T>
class CrossAttention {
 public:
  CrossAttention(ParamSet<T>& params, std::size_t dim, const CrossAttnConfig& cfg, Rng& rng);

  // Both inputs [R x dim]; throws DimensionError on a row-count mismatch.
  CrossAttended<T> operator()(const BasicTensor<T>& video, const BasicTensor<T>& audio,
                              CrossAttentionWeights<T>* weights = nullptr) const;

 private:
  MultiHeadAttention<T> audio_to_video_;
  MultiHeadAttention<T> video_to_audio_;
};

// Row i of the result is [row i of video_to_audio || row i of audio_to_video].
template <class T>
BasicTensor<T> concat_fuse(const BasicTensor<T>& video_to_audio, const BasicTensor<T>& audio_to_video);

}  // namespace avmask
