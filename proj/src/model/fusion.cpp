// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/fusion.hpp"

#include "avmask/core/errors.hpp"
#include "avmask/core/ops.hpp"

namespace avmask {

template <class T>
CrossAttention<T>::CrossAttention(ParamSet<T>& params, std::size_t dim, const CrossAttnConfig& cfg, Rng& rng)
    : audio_to_video_(params, "fusion.audio_to_video", dim, cfg.heads, rng),
      video_to_audio_(params, "fusion.video_to_audio", dim, cfg.heads, rng) {}

template <class T>
CrossAttended<T> CrossAttention<T>::operator()(const BasicTensor<T>& video, const BasicTensor<T>& audio,
                                               CrossAttentionWeights<T>* weights) const {
  if (video.rank() != 2 || audio.rank() != 2 || video.dim(0) != audio.dim(0))
    throw DimensionError("cross_attend: video " + shape_str(video.shape()) + " and audio " + shape_str(audio.shape()) +
                         " need equal row counts");
  CrossAttended<T> out;
  out.audio_to_video = audio_to_video_(audio, video, weights ? &weights->audio_to_video : nullptr);
  out.video_to_audio = video_to_audio_(video, audio, weights ? &weights->video_to_audio : nullptr);
  return out;
}

template <class T>
BasicTensor<T> concat_fuse(const BasicTensor<T>& video_to_audio, const BasicTensor<T>& audio_to_video) {
  if (video_to_audio.shape() != audio_to_video.shape() || video_to_audio.rank() != 2)
    throw DimensionError("concat_fuse: " + shape_str(video_to_audio.shape()) + " vs " +
                         shape_str(audio_to_video.shape()));
  const BasicTensor<T> parts[] = {video_to_audio, audio_to_video};
  return concat_cols<T>(parts);
}

template class CrossAttention<float>;
template class CrossAttention<double>;
template BasicTensor<float> concat_fuse(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> concat_fuse(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace avmask
