// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/config.hpp"

#include "avmask/core/errors.hpp"

namespace avmask {

std::string to_string(Modalities m) { return m == Modalities::audio_visual ? "AV" : "V-only"; }

Modalities modalities_from_string(const std::string& s) {
  if (s == "AV" || s == "av" || s == "audio_visual") return Modalities::audio_visual;
  if (s == "V-only" || s == "v-only" || s == "V" || s == "visual_only") return Modalities::visual_only;
  throw ParameterError("modalities: expected AV or V-only, got '" + s + "'");
}

namespace {

void need(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ParameterError(key + ": " + what);
}

}  // namespace

void ModelConfig::validate() const {
  need(grid.frames >= 1, "grid.frames", "must be >= 1");
  need(grid.patches_per_side >= 1, "grid.patches", "must be >= 1");
  need(grid.temporal_samples >= 1, "grid.temporal_samples", "must be >= 1");
  need(grid.channels == 3, "grid.channels", "video clips have 3 channels");
  need(grid.frame_height % grid.patches_per_side == 0 && grid.frame_width % grid.patches_per_side == 0,
       "grid.patches", "frame extents must be divisible by N_p");
  need(encoder.dim >= 2 && encoder.heads >= 1 && encoder.dim % encoder.heads == 0, "encoder.heads",
       "encoder dim must be divisible by heads");
  need(encoder.mlp_ratio >= 1, "encoder.mlp_ratio", "must be >= 1");
  need(decoder.depth >= 1, "decoder.depth", "must be >= 1");
  need(decoder.dim >= 2 && decoder.heads >= 1 && decoder.dim % decoder.heads == 0, "decoder.heads",
       "decoder dim must be divisible by heads");
  need(decoder.mlp_ratio >= 1, "decoder.mlp_ratio", "must be >= 1");
  need(fusion.heads >= 1 && boundary_dim() % fusion.heads == 0, "fusion.heads",
       "boundary dim D_v=" + std::to_string(boundary_dim()) + " must be divisible by heads");
  need(!audio.stage_channels.empty(), "audio.stage_channels", "must be non-empty");
  need(audio.stage_channels.size() == audio.blocks_per_stage.size() &&
           audio.stage_channels.size() == audio.dilation_schedule.size(),
       "audio.stage_channels", "stage_channels, blocks_per_stage and dilation_schedule need equal lengths");
  for (std::size_t s = 0; s < audio.stage_channels.size(); ++s) {
    need(audio.stage_channels[s] >= 1, "audio.stage_channels", "channel counts must be >= 1");
    need(audio.blocks_per_stage[s] >= 1, "audio.blocks_per_stage", "block counts must be >= 1");
    need(audio.dilation_schedule[s] >= 1, "audio.dilation_schedule", "dilations must be >= 1");
  }
  need(audio.se_reduction >= 1, "audio.se_reduction", "must be >= 1");
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::micro() {
  ModelConfig c;
  c.grid = PatchGrid{.frames = 2, .patches_per_side = 2, .temporal_samples = 1, .frame_height = 8,
                     .frame_width = 8, .channels = 3};
  c.encoder = ViTConfig{.depth = 1, .dim = 8, .heads = 2, .mlp_ratio = 2};
  c.audio.stage_channels = {4, 8};
  c.audio.blocks_per_stage = {1, 1};
  c.audio.dilation_schedule = {1, 2};
  c.audio.se_reduction = 2;
  c.fusion.heads = 2;
  c.decoder = DecoderConfig{.depth = 1, .dim = 4, .heads = 2, .mlp_ratio = 2};
  return c;
}

}  // namespace avmask
