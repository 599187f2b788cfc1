// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "avmask/core/tensor.hpp"

namespace avmask {

struct AdamWHyper {
  float beta1 = 0.9f;
  float beta2 = 0.95f;
  float eps = 1e-8f;
  float weight_decay = 0.05f;
};

// First/second moment estimates, one pair per parameter, plus the step count
// used for bias correction.
struct AdamWState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamWState for_params(std::span<const Tensor> params);
};

// One AdamW update with decoupled weight decay and bias-corrected moments.
// Parameters without a gradient are treated as having a zero gradient.
// `decay_mask[i] == 0` exempts parameter i from weight decay; an empty mask
// decays everything.
void adamw_step(std::span<Tensor> params, AdamWState& state, float lr, const AdamWHyper& hyper,
                std::span<const std::uint8_t> decay_mask = {});

// Linear warmup to `base_lr` over `warmup_steps`, then cosine decay to zero
// at `total_steps`. `step` is zero-based.
float warmup_cosine_lr(float base_lr, std::size_t step, std::size_t warmup_steps, std::size_t total_steps);

}  // namespace avmask
