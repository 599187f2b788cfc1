// SPDX-License-Identifier: Apache-2.0
#include "avmask/training/train_config.hpp"

#include <algorithm>
#include <cmath>

#include "avmask/core/errors.hpp"

namespace avmask {

std::string to_string(LossScope s) { return s == LossScope::full ? "full" : "masked_only"; }

LossScope loss_scope_from_string(const std::string& s) {
  if (s == "full") return LossScope::full;
  if (s == "masked_only") return LossScope::masked_only;
  throw ParameterError("loss_scope: expected full or masked_only, got '" + s + "'");
}

std::size_t TrainConfig::resolved_warmup() const {
  if (warmup_steps) return *warmup_steps;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(steps))));
}

void TrainConfig::validate() const {
  if (steps < 1) throw ParameterError("steps: must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size: must be >= 1");
  if (!(lr > 0.0f) || !std::isfinite(lr)) throw ParameterError("lr: must be a finite value > 0");
  if (!(weight_decay >= 0.0f) || !std::isfinite(weight_decay))
    throw ParameterError("weight_decay: must be a finite value >= 0");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ParameterError("mask_ratio: must lie in (0, 1)");
  if (warmup_steps && *warmup_steps > steps) throw ParameterError("warmup_steps: exceeds steps");
}

ModelConfig with_train_switches(ModelConfig model, const TrainConfig& train) {
  model.use_cross_attention = train.use_cross_attention;
  model.modalities = train.modalities;
  return model;
}

}  // namespace avmask
