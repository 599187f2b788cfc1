// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "avmask/model/tokenizer.hpp"

namespace avmask {

struct ViTConfig {
  std::size_t depth = 4;
  std::size_t dim = 192;
  std::size_t heads = 3;
  std::size_t mlp_ratio = 4;
};

struct AudioEncoderConfig {
  std::vector<std::size_t> stage_channels{16, 32, 64, 128};
  std::vector<std::size_t> blocks_per_stage{2, 2, 2, 2};
  std::vector<std::size_t> dilation_schedule{1, 1, 2, 4};
  std::size_t se_reduction = 8;

  // ResNet34 stage depths.
  static AudioEncoderConfig resnet34_preset() {
    AudioEncoderConfig c;
    c.blocks_per_stage = {3, 4, 6, 3};
    return c;
  }
};

struct CrossAttnConfig {
  std::size_t heads = 3;
};

struct DecoderConfig {
  std::size_t depth = 4;
  std::size_t dim = 96;
  std::size_t heads = 3;
  std::size_t mlp_ratio = 4;
};

enum class Modalities { audio_visual, visual_only };

std::string to_string(Modalities m);          // "AV" / "V-only"
Modalities modalities_from_string(const std::string& s);

struct ModelConfig {
  PatchGrid grid;
  ViTConfig encoder;
  AudioEncoderConfig audio;
  CrossAttnConfig fusion;
  DecoderConfig decoder;
  bool use_cross_attention = true;
  Modalities modalities = Modalities::audio_visual;

  // D_v: the boundary width shared by visual tokens, audio tokens and the
  // cross-attention. D_fuse is twice this.
  std::size_t boundary_dim() const { return grid.token_dim(); }
  std::size_t fuse_dim() const { return 2 * boundary_dim(); }

  // Throws ParameterError naming the offending field.
  void validate() const;

  // 8 frames of 32x32x3, N_p=4, encoder depth 4 / dim 192 / heads 3,
  // decoder depth 4 / dim 96.
  static ModelConfig toy();
  // 2 frames of 8x8x3, N_p=2, encoder dim 8: small enough to finite-difference
  // every parameter.
  static ModelConfig micro();
};

}  // namespace avmask
