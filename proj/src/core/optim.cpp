// SPDX-License-Identifier: Apache-2.0
#include "avmask/core/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "avmask/core/errors.hpp"

namespace avmask {

AdamWState AdamWState::for_params(std::span<const Tensor> params) {
  AdamWState state;
  for (const Tensor& p : params) {
    state.first_moment.push_back(Tensor::zeros(p.shape()));
    state.second_moment.push_back(Tensor::zeros(p.shape()));
  }
  return state;
}

void adamw_step(std::span<Tensor> params, AdamWState& state, float lr, const AdamWHyper& hyper,
                std::span<const std::uint8_t> decay_mask) {
  if (!(lr > 0.0f)) throw ParameterError("adamw: learning rate must be > 0, got " + std::to_string(lr));
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adamw: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " tensors, got " + std::to_string(params.size()) + " parameters");
  }
  if (!decay_mask.empty() && decay_mask.size() != params.size()) {
    throw DimensionError("adamw: decay mask length differs from parameter count");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(static_cast<double>(hyper.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(hyper.beta2), t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (state.first_moment[i].shape() != p.shape()) {
      throw DimensionError("adamw: state shape " + shape_str(state.first_moment[i].shape()) + " vs parameter " +
                           shape_str(p.shape()));
    }
    auto w = p.mutable_data();
    auto m = state.first_moment[i].mutable_data();
    auto v = state.second_moment[i].mutable_data();
    const bool has_grad = p.has_grad();
    std::span<const float> g = has_grad ? p.grad() : std::span<const float>{};
    const bool decay = decay_mask.empty() || decay_mask[i] != 0;
    const float decay_factor = decay ? 1.0f - lr * hyper.weight_decay : 1.0f;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const float gj = has_grad ? g[j] : 0.0f;
      m[j] = hyper.beta1 * m[j] + (1.0f - hyper.beta1) * gj;
      v[j] = hyper.beta2 * v[j] + (1.0f - hyper.beta2) * gj * gj;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] = static_cast<float>(w[j] * decay_factor - lr * m_hat / (std::sqrt(v_hat) + hyper.eps));
    }
  }
}

float warmup_cosine_lr(float base_lr, std::size_t step, std::size_t warmup_steps, std::size_t total_steps) {
  if (warmup_steps > 0 && step < warmup_steps) {
    return base_lr * static_cast<float>(step + 1) / static_cast<float>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return base_lr;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  const double clipped = std::min(progress, 1.0);
  return static_cast<float>(0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * clipped)));
}

}  // namespace avmask
