// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/audio_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "avmask/core/errors.hpp"

namespace avmask {

template <class T>
SqueezeExcite<T>::SqueezeExcite(ParamSet<T>& params, const std::string& name, std::size_t channels,
                                std::size_t reduction, Rng& rng) {
  const std::size_t hidden = std::max<std::size_t>(1, channels / std::max<std::size_t>(1, reduction));
  reduce = Linear<T>(params, name + ".reduce", channels, hidden, rng);
  expand = Linear<T>(params, name + ".expand", hidden, channels, rng);
}

template <class T>
BasicTensor<T> SqueezeExcite<T>::operator()(const BasicTensor<T>& features, BasicTensor<T>* gates) const {
  const std::size_t c = features.dim(0);
  auto squeezed = reshape(channel_mean(features), {1, c});
  auto g = reshape(sigmoid(expand(gelu(reduce(squeezed)))), {c});
  if (gates) *gates = g;
  return channel_scale(features, g);
}

template <class T>
BasicTensor<T> ResidualConvBlock<T>::operator()(const BasicTensor<T>& x) const {
  auto h = gelu(conv2d(x, conv1, first));
  h = se(conv2d(h, conv2, second));
  auto skip = shortcut.defined() ? conv2d(x, shortcut, {.stride = first.stride, .dilation = 1}) : x;
  return gelu(add(h, skip));
}

template <class T>
AudioEncoder<T>::AudioEncoder(ParamSet<T>& params, const AudioEncoderConfig& cfg, std::size_t out_dim, Rng& rng)
    : cfg_(cfg), out_dim_(out_dim) {
  std::size_t in_ch = 1;
  for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    const std::size_t ch = cfg.stage_channels[s];
    const std::size_t dil = cfg.dilation_schedule[s];
    for (std::size_t b = 0; b < cfg.blocks_per_stage[s]; ++b) {
      const std::string name = "audio.stage" + std::to_string(s) + ".block" + std::to_string(b);
      ResidualConvBlock<T> blk;
      const std::size_t stride = (b == 0 && dil == 1) ? 2 : 1;
      blk.first = {.stride = stride, .dilation = dil};
      blk.second = {.stride = 1, .dilation = dil};
      blk.conv1 = params.add(name + ".conv1", init_normal<T>(rng, {ch, in_ch, 3, 3}, std::sqrt(2.0 / (9.0 * in_ch))));
      // Damped second conv so the residual stream starts close to the skip path.
      blk.conv2 = params.add(name + ".conv2", init_normal<T>(rng, {ch, ch, 3, 3}, 0.5 * std::sqrt(2.0 / (9.0 * ch))));
      if (stride != 1 || in_ch != ch)
        blk.shortcut = params.add(name + ".shortcut", init_normal<T>(rng, {ch, in_ch, 1, 1}, std::sqrt(1.0 / in_ch)));
      blk.se = SqueezeExcite<T>(params, name + ".se", ch, cfg.se_reduction, rng);
      blocks_.push_back(std::move(blk));
      in_ch = ch;
    }
  }
  proj_ = Linear<T>(params, "audio.proj", in_ch, out_dim, rng);
  norm_ = LayerNorm<T>(params, "audio.norm", out_dim);
}

template <class T>
std::size_t AudioEncoder<T>::output_length(std::size_t n_len) const {
  for (const auto& blk : blocks_) n_len = (n_len + blk.first.stride - 1) / blk.first.stride;
  return n_len;
}

template <class T>
BasicTensor<T> AudioEncoder<T>::encode(const BasicTensor<T>& cepstra) const {
  if (cepstra.rank() != 2) throw DimensionError("encode_audio: cepstra must be [N_len x N_cep], got " + shape_str(cepstra.shape()));
  if (cepstra.dim(0) < 4)
    throw DimensionError("encode_audio: N_len=" + std::to_string(cepstra.dim(0)) + " too short for the configured striding");
  auto x = reshape(cepstra, {1, cepstra.dim(0), cepstra.dim(1)});
  for (const auto& blk : blocks_) x = blk(x);
  // [C x N_a x W'] -> mean over the cepstral axis -> [N_a x C]
  auto tokens = transpose(mean_last_axis(x));
  return norm_(proj_(tokens));
}

template <class T>
BasicTensor<T> align_audio_tokens(const BasicTensor<T>& tokens, std::size_t target_rows) {
  if (target_rows < 1) throw ParameterError("align_audio_tokens: target_rows must be >= 1");
  if (tokens.rank() != 2 || tokens.dim(0) < 1) throw DimensionError("align_audio_tokens: need [N_a x D_a] with N_a >= 1");
  if (tokens.dim(0) == target_rows) return tokens;
  return adaptive_avg_pool_rows(tokens, target_rows);
}

template struct SqueezeExcite<float>;
template struct SqueezeExcite<double>;
template struct ResidualConvBlock<float>;
template struct ResidualConvBlock<double>;
template class AudioEncoder<float>;
template class AudioEncoder<double>;
template BasicTensor<float> align_audio_tokens(const BasicTensor<float>&, std::size_t);
template BasicTensor<double> align_audio_tokens(const BasicTensor<double>&, std::size_t);

}  // namespace avmask
