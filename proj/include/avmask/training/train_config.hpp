// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "avmask/model/config.hpp"

namespace avmask {

enum class LossScope { full, masked_only };

std::string to_string(LossScope s);  // "full" / "masked_only"
LossScope loss_scope_from_string(const std::string& s);

struct TrainConfig {
  std::size_t steps = 300;
  std::size_t batch_size = 8;
  float lr = 1e-3f;
  // Unset: 5% of steps, at least one.
  std::optional<std::size_t> warmup_steps;
  float weight_decay = 0.05f;
  double mask_ratio = 0.9;
  LossScope loss_scope = LossScope::full;
  bool use_cross_attention = true;
  Modalities modalities = Modalities::audio_visual;
  std::uint64_t seed = 0;
  // Fine-tuning only: train the classifier head alone.
  bool freeze_encoder = false;

  std::size_t resolved_warmup() const;
  // Throws ParameterError naming the offending field.
  void validate() const;
};

// Copies the architecture switches carried by a TrainConfig into a model config.
ModelConfig with_train_switches(ModelConfig model, const TrainConfig& train);

}  // namespace avmask
