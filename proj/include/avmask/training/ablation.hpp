// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "avmask/training/trainer.hpp"

namespace avmask {

enum class AblationAxis { mask_ratio, cross_attention, modalities };

std::string to_string(AblationAxis a);
AblationAxis ablation_axis_from_string(const std::string& s);  // ParameterError on unknown axis

// Everything one pretrain -> fine-tune -> evaluate run needs.
struct ExperimentConfig {
  ModelConfig model = ModelConfig::toy();
  TrainConfig pretrain;
  TrainConfig finetune;
  bool run_finetune = true;
  EvalOptions eval;
};

struct AblationRow {
  std::string variant;
  double mask_ratio = 0.0;
  bool cross_attention = true;
  Modalities modalities = Modalities::audio_visual;
  double final_loss = 0.0;  // last pretraining step
  double recon_mse = 0.0;   // held-out, masked at the variant's ratio
  std::optional<double> top1;
  std::optional<double> top5;
};

struct AblationTable {
  std::string axis;
  std::vector<AblationRow> rows;
};

// Variants in table order for an axis, applied to `base`.
std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(AblationAxis axis,
                                                                        const ExperimentConfig& base);

// Runs one variant: pretraining, optional fine-tuning from the pretrained
// weights, then held-out evaluation.
AblationRow run_variant(const std::string& name, const ExperimentConfig& cfg, const PreparedDataset& train,
                        const PreparedDataset& test);

// Every variant uses the same seeds and step budget.
AblationTable run_ablation(AblationAxis axis, const ExperimentConfig& base, const PreparedDataset& train,
                           const PreparedDataset& test);

std::string ablation_json(const AblationTable& t);
std::string ablation_text(const AblationTable& t);

}  // namespace avmask
