// SPDX-License-Identifier: Apache-2.0
#include "avmask/model/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "avmask/core/errors.hpp"
#include "avmask/core/ops.hpp"
#include "avmask/core/rng.hpp"

namespace avmask {

void PatchGrid::validate() const {
  if (frames < 1 || temporal_samples < 1 || patches_per_side < 1 || channels < 1)
    throw DimensionError("patch grid extents must be >= 1");
  if (frame_height % patches_per_side != 0 || frame_width % patches_per_side != 0)
    throw DimensionError("frame " + std::to_string(frame_height) + "x" + std::to_string(frame_width) +
                         " not divisible by N_p=" + std::to_string(patches_per_side));
}

std::vector<std::size_t> token_source(const PatchGrid& g) {
  g.validate();
  const std::size_t np = g.patches_per_side, ph = g.patch_height(), pw = g.patch_width(), c = g.channels;
  const std::size_t h = g.frame_height, w = g.frame_width;
  std::vector<std::size_t> src;
  src.reserve(g.num_tokens() * g.token_dim());
  for (std::size_t f = 0; f < g.total_frames(); ++f)
    for (std::size_t pr = 0; pr < np; ++pr)
      for (std::size_t pc = 0; pc < np; ++pc)
        for (std::size_t y = 0; y < ph; ++y)
          for (std::size_t x = 0; x < pw; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
              src.push_back(((f * h + pr * ph + y) * w + pc * pw + x) * c + ch);
  return src;
}

std::vector<std::size_t> clip_source(const PatchGrid& g) {
  const auto fwd = token_source(g);
  std::vector<std::size_t> inv(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) inv[fwd[i]] = i;
  return inv;
}

template <class T>
BasicTensor<T> patchify(const BasicTensor<T>& clip, const PatchGrid& grid) {
  if (clip.shape() != grid.clip_shape())
    throw DimensionError("patchify: clip " + shape_str(clip.shape()) + " does not match grid " +
                         shape_str(grid.clip_shape()));
  return gather_elements(clip, token_source(grid), {grid.num_tokens(), grid.token_dim()});
}

template <class T>
BasicTensor<T> unpatchify(const BasicTensor<T>& tokens, const PatchGrid& grid) {
  const Shape want{grid.num_tokens(), grid.token_dim()};
  if (tokens.shape() != want)
    throw DimensionError("unpatchify: tokens " + shape_str(tokens.shape()) + " expected " + shape_str(want));
  return gather_elements(tokens, clip_source(grid), grid.clip_shape());
}

std::size_t TubeMask::kept() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1)); }

TubeMask TubeMask::all_visible(const PatchGrid& grid) {
  return {std::vector<std::uint8_t>(grid.spatial_positions(), 1), 0.0};
}

std::size_t tube_keep_count(std::size_t positions, double ratio) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(positions) * (1.0 - ratio)));
}

TubeMask sample_tube_mask(std::uint64_t seed, const PatchGrid& grid, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("mask ratio must lie in (0,1), got " + std::to_string(ratio));
  const std::size_t n = grid.spatial_positions();
  const std::size_t k = tube_keep_count(n, ratio);
  if (k < 1)
    throw ParameterError("mask ratio " + std::to_string(ratio) + " leaves no visible patch of " + std::to_string(n));
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
  TubeMask m{std::vector<std::uint8_t>(n, 0), ratio};
  for (std::size_t i = 0; i < k; ++i) m.keep[order[i]] = 1;
  return m;
}

template <class T>
MaskedTokens<T> apply_mask(const BasicTensor<T>& tokens, const PatchGrid& grid, const TubeMask& mask) {
  const Shape want{grid.num_tokens(), grid.token_dim()};
  if (tokens.shape() != want)
    throw DimensionError("apply_mask: tokens " + shape_str(tokens.shape()) + " expected " + shape_str(want));
  if (mask.keep.size() != grid.spatial_positions())
    throw DimensionError("apply_mask: mask covers " + std::to_string(mask.keep.size()) + " positions, grid has " +
                         std::to_string(grid.spatial_positions()));
  MaskedTokens<T> out;
  for (std::size_t t = 0; t < grid.num_tokens(); ++t) (mask.keeps_token(t) ? out.visible_index : out.masked_index).push_back(t);
  if (out.visible_index.empty()) throw ParameterError("apply_mask: mask keeps no tokens");
  out.visible = gather_rows(tokens, out.visible_index);
  return out;
}

#define AVMASK_INSTANTIATE_TOKENIZER(T)                                                     \
  template BasicTensor<T> patchify(const BasicTensor<T>&, const PatchGrid&);               \
  template BasicTensor<T> unpatchify(const BasicTensor<T>&, const PatchGrid&);             \
  template MaskedTokens<T> apply_mask(const BasicTensor<T>&, const PatchGrid&, const TubeMask&);

AVMASK_INSTANTIATE_TOKENIZER(float)
AVMASK_INSTANTIATE_TOKENIZER(double)

}  // namespace avmask
