// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "avmask/core/ops.hpp"
#include "avmask/model/config.hpp"
#include "avmask/model/layers.hpp"

namespace avmask {

// Squeeze-and-excitation: channel means -> linear c -> c/r -> GELU ->
// linear -> sigmoid gates -> channelwise rescale.
template <class T>
struct SqueezeExcite {
  Linear<T> reduce, expand;

  SqueezeExcite() = default;
  SqueezeExcite(ParamSet<T>& params, const std::string& name, std::size_t channels, std::size_t reduction,
                Rng& rng);
  // features [c x h x w]; `gates` receives the [c] gate vector when given.
  BasicTensor<T> operator()(const BasicTensor<T>& features, BasicTensor<T>* gates = nullptr) const;
};

template <class T>
struct ResidualConvBlock {
  BasicTensor<T> conv1;     // [c_out x c_in x 3 x 3], carries the stride
  BasicTensor<T> conv2;     // [c_out x c_out x 3 x 3]
  BasicTensor<T> shortcut;  // 1x1 projection when extents or channels change
  Conv2dParams first, second;
  SqueezeExcite<T> se;

  BasicTensor<T> operator()(const BasicTensor<T>& x) const;
};

template <class T>
class AudioEncoder {
 public:
  AudioEncoder(ParamSet<T>& params, const AudioEncoderConfig& cfg, std::size_t out_dim, Rng& rng);

  // cepstra [N_len x N_cep] -> tokens [N_a x out_dim] (layer-normalised).
  BasicTensor<T> encode(const BasicTensor<T>& cepstra) const;

  // Temporal extent after striding: stride 2 at every stage with dilation 1.
  std::size_t output_length(std::size_t n_len) const;
  std::size_t out_dim() const noexcept { return out_dim_; }

 private:
  AudioEncoderConfig cfg_;
  std::size_t out_dim_;
  std::vector<ResidualConvBlock<T>> blocks_;
  Linear<T> proj_;
  LayerNorm<T> norm_;
};

// Adaptive average pooling along the token axis to exactly `target_rows`.
template <class T>
BasicTensor<T> align_audio_tokens(const BasicTensor<T>& tokens, std::size_t target_rows);

}  // namespace avmask
