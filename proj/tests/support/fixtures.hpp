#pragma once

#include <cstdint>

#include "avmask/cli/run_config.hpp"

// Small synthetic datasets sized for a model grid.
inline avmask::PreparedDataset synthetic_dataset(const avmask::ModelConfig& model, std::size_t count,
                                                 std::uint64_t seed, std::size_t classes = 4, bool held_out = false,
                                                 const avmask::CepstralStats& stats = {}) {
  avmask::cli::DataConfig d;
  d.classes = classes;
  d.seed = seed;
  auto examples = avmask::cli::generate_examples(d, count, held_out, avmask::cli::synthetic_spec_for(model.grid));
  return avmask::prepare_dataset(examples, model.grid, stats);
}

// A few minutes of desk-scale work shrunk to seconds: encoder dim 16.
inline avmask::ModelConfig tiny_config() {
  auto c = avmask::ModelConfig::toy();
  c.grid.frames = 4;
  c.grid.frame_height = c.grid.frame_width = 16;
  c.grid.patches_per_side = 4;
  c.encoder = {1, 16, 2, 2};
  c.audio.stage_channels = {4, 8};
  c.audio.blocks_per_stage = {1, 1};
  c.audio.dilation_schedule = {1, 2};
  c.audio.se_reduction = 2;
  c.fusion.heads = 2;
  c.decoder = {1, 16, 2, 2};
  return c;
}
