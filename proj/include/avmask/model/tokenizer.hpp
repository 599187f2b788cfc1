// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "avmask/core/tensor.hpp"

namespace avmask {

// Geometry of the token grid. A clip holds N_s consecutive temporal samples
// of N_f frames each, so its tensor is [N_s*N_f x frame_h x frame_w x C].
struct PatchGrid {
  std::size_t frames = 8;             // N_f
  std::size_t patches_per_side = 4;   // N_p
  std::size_t temporal_samples = 1;   // N_s
  std::size_t frame_height = 32;
  std::size_t frame_width = 32;
  std::size_t channels = 3;

  std::size_t patch_height() const { return frame_height / patches_per_side; }
  std::size_t patch_width() const { return frame_width / patches_per_side; }
  std::size_t spatial_positions() const { return patches_per_side * patches_per_side; }  // N_p^2
  std::size_t total_frames() const { return frames * temporal_samples; }
  std::size_t num_tokens() const { return total_frames() * spatial_positions(); }  // N_v
  std::size_t token_dim() const { return patch_height() * patch_width() * channels; }  // D_v
  Shape clip_shape() const { return {total_frames(), frame_height, frame_width, channels}; }

  // Throws DimensionError when frame extents are not divisible by N_p.
  void validate() const;
};

// token_source()[t * D_v + e] is the flat clip index feeding element e of
// token t. Tokens are frame-major, then row-major over patches; elements are
// row-major over (patch row, patch column, channel).
std::vector<std::size_t> token_source(const PatchGrid& grid);
// Inverse permutation: clip element -> flat token-matrix index.
std::vector<std::size_t> clip_source(const PatchGrid& grid);

// [frames x H x W x C] -> [N_v x D_v]. Differentiable.
template <class T>
BasicTensor<T> patchify(const BasicTensor<T>& clip, const PatchGrid& grid);
// [N_v x D_v] -> [frames x H x W x C]. Differentiable.
template <class T>
BasicTensor<T> unpatchify(const BasicTensor<T>& tokens, const PatchGrid& grid);

struct TubeMask {
  std::vector<std::uint8_t> keep;  // one flag per spatial position, shared by every frame
  double ratio = 0.0;              // masked fraction

  std::size_t kept() const;
  bool keeps_token(std::size_t token) const { return keep[token % keep.size()] != 0; }

  static TubeMask all_visible(const PatchGrid& grid);
};

// round(positions * (1 - ratio))
std::size_t tube_keep_count(std::size_t positions, double ratio);

// Uniform random subset of spatial positions, deterministic in `seed`.
// Throws ParameterError unless 0 < ratio < 1 and at least one position stays.
TubeMask sample_tube_mask(std::uint64_t seed, const PatchGrid& grid, double ratio);

template <class T>
struct MaskedTokens {
  BasicTensor<T> visible;                   // [N_vis x D_v], original relative order
  std::vector<std::size_t> visible_index;   // original token index of each visible row
  std::vector<std::size_t> masked_index;    // dropped token indices, ascending
};

template <class T>
MaskedTokens<T> apply_mask(const BasicTensor<T>& tokens, const PatchGrid& grid, const TubeMask& mask);

}  // namespace avmask
