// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avmask/core/optim.hpp"
#include "avmask/model/av_model.hpp"
#include "avmask/training/checkpoint.hpp"
#include "avmask/training/prepare.hpp"
#include "avmask/training/train_config.hpp"

namespace avmask {

// Per-pixel include flags (clip layout) for the pixels of masked tokens.
std::vector<std::uint8_t> masked_pixel_set(const PatchGrid& grid, std::span<const std::size_t> masked_tokens);

// Mean squared pixel error. `full` averages over every pixel; `masked_only`
// over pixels whose token index is in `masked_tokens`.
Tensor reconstruction_loss(const Tensor& original, const Tensor& reconstruction, LossScope scope,
                           const PatchGrid& grid, std::span<const std::size_t> masked_tokens);

struct StepMetrics {
  std::size_t step = 0;
  std::string phase;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> top1;
  double wall_ms = 0.0;
};

using MetricsSink = std::function<void(const StepMetrics&)>;

std::string to_json_line(const StepMetrics& m);

// Appends one JSON line per record and flushes, so a crash leaves only
// complete lines behind.
class JsonlMetricsWriter {
 public:
  explicit JsonlMetricsWriter(const std::string& path);
  void operator()(const StepMetrics& m);

 private:
  std::string path_;
  std::shared_ptr<std::ofstream> out_;
};

struct TrainOutcome {
  std::unique_ptr<AvMaskModel<float>> model;
  AdamWState optimizer;
  std::vector<std::string> optimized;  // parameter names covered by `optimizer`
  std::vector<double> losses;      // one per step
  std::vector<double> accuracies;  // fine-tuning batch accuracy, one per step
  CepstralStats stats;             // normalisation the model was trained with

  Checkpoint checkpoint(const TrainConfig& train) const {
    auto ckpt = make_checkpoint(*model, &optimizer, &train, optimized);
    add_cepstral_stats(ckpt, stats);
    return ckpt;
  }
};

// Seeds derived from TrainConfig::seed.
std::uint64_t model_seed(std::uint64_t seed);
std::uint64_t mask_seed(std::uint64_t seed, std::size_t step, std::size_t slot);

// Batch indices for `step`: examples are visited in a fresh seeded
// permutation each epoch.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t step, std::size_t batch_size,
                                       std::size_t dataset_size);

// Masked reconstruction pretraining with AdamW and warmup + cosine decay.
// The architecture switches of `train` override `model_cfg`. NaN/Inf loss
// raises NumericError naming the step.
TrainOutcome pretrain(const ModelConfig& model_cfg, const TrainConfig& train, const PreparedDataset& data,
                      const MetricsSink& sink = {});

// Continues training `model` in place from optimizer.step up to
// min(train.steps, stop_at); used by pretrain() and for resuming.
void pretrain_steps(AvMaskModel<float>& model, AdamWState& optimizer, const TrainConfig& train,
                    const PreparedDataset& data, std::vector<double>& losses, const MetricsSink& sink,
                    std::size_t stop_at = SIZE_MAX);

// Classification fine-tuning: mean-pooled fused tokens, linear head,
// cross-entropy. All tokens are visible. When `pretrained` is given every
// non-head parameter is initialised from it.
TrainOutcome finetune(const ModelConfig& model_cfg, const TrainConfig& train, const PreparedDataset& data,
                      const Checkpoint* pretrained = nullptr, const std::string& checkpoint_path = "<memory>",
                      const MetricsSink& sink = {});

// Whether `label` ranks among the k largest logits; ties go to the lower
// class index.
bool topk_hit(std::span<const float> logits, std::size_t label, std::size_t k);
double topk_accuracy(const std::vector<std::vector<float>>& logits, std::span<const std::size_t> labels,
                     std::size_t k);

struct ClassTally {
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct EvalOptions {
  double mask_ratio = 0.9;
  std::uint64_t mask_seed = 0;
};

struct EvalResult {
  std::size_t examples = 0;
  double recon_mse = 0.0;  // full-scope MSE under seeded masks
  // Present when the model has a classifier.
  std::optional<double> top1;
  std::optional<double> top5;
  std::vector<ClassTally> per_class;
};

EvalResult evaluate(const AvMaskModel<float>& model, const PreparedDataset& data, const EvalOptions& options = {});

// Classifier logits for one example with every token visible.
std::vector<float> class_logits(const AvMaskModel<float>& model, const PreparedExample& example);

std::string eval_to_json(const EvalResult& r);

}  // namespace avmask
