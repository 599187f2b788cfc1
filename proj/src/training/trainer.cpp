// SPDX-License-Identifier: Apache-2.0
#include "avmask/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "avmask/core/errors.hpp"
#include "avmask/core/ops.hpp"
#include "avmask/core/rng.hpp"
#include "avmask/core/tape.hpp"

namespace avmask {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kModelSalt = 0x6d6f64656c;   // "model"
constexpr std::uint64_t kBatchSalt = 0x6261746368;   // "batch"
constexpr std::uint64_t kMaskSalt = 0x6d61736b;      // "mask"
constexpr std::uint64_t kHeadSalt = 0x68656164;      // "head"

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.compare(0, prefix.size(), prefix) == 0; }

std::vector<std::uint8_t> decay_mask_for(const std::vector<Tensor>& params) {
  std::vector<std::uint8_t> mask(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) mask[i] = params[i].rank() >= 2 ? 1 : 0;
  return mask;
}

void require_data(const PreparedDataset& data, const char* what) {
  if (data.empty()) throw ParameterError(std::string(what) + ": dataset is empty");
}

std::size_t argmax(std::span<const float> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<std::uint8_t> masked_pixel_set(const PatchGrid& grid, std::span<const std::size_t> masked_tokens) {
  std::vector<std::uint8_t> token_masked(grid.num_tokens(), 0);
  for (std::size_t t : masked_tokens) {
    if (t >= token_masked.size()) throw DimensionError("masked_pixel_set: token index out of range");
    token_masked[t] = 1;
  }
  const auto source = clip_source(grid);
  const std::size_t dv = grid.token_dim();
  std::vector<std::uint8_t> include(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) include[i] = token_masked[source[i] / dv];
  return include;
}

Tensor reconstruction_loss(const Tensor& original, const Tensor& reconstruction, LossScope scope,
                           const PatchGrid& grid, std::span<const std::size_t> masked_tokens) {
  if (scope == LossScope::full) return mse_loss(reconstruction, original);
  if (original.shape() != grid.clip_shape())
    throw DimensionError("reconstruction_loss: clip " + shape_str(original.shape()) + " does not match the grid");
  return mse_loss(reconstruction, original, masked_pixel_set(grid, masked_tokens));
}

std::string to_json_line(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["phase"] = m.phase;
  j["loss"] = m.loss;
  j["lr"] = m.lr;
  if (m.top1) j["top1"] = *m.top1;
  j["wall_ms"] = m.wall_ms;
  return j.dump();
}

JsonlMetricsWriter::JsonlMetricsWriter(const std::string& path)
    : path_(path), out_(std::make_shared<std::ofstream>(path, std::ios::app | std::ios::binary)) {
  if (!*out_) throw IoError(path, "cannot open metrics file for appending");
}

void JsonlMetricsWriter::operator()(const StepMetrics& m) {
  const std::string line = to_json_line(m) + "\n";
  out_->write(line.data(), static_cast<std::streamsize>(line.size()));
  out_->flush();
  if (!*out_) throw IoError(path_, "write failed");
}

std::uint64_t model_seed(std::uint64_t seed) { return mix_seed(seed, kModelSalt); }

std::uint64_t mask_seed(std::uint64_t seed, std::size_t step, std::size_t slot) {
  return mix_seed(seed, kMaskSalt, step, slot);
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t step, std::size_t batch_size,
                                       std::size_t dataset_size) {
  if (dataset_size == 0) throw ParameterError("batch_indices: empty dataset");
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  std::size_t epoch = SIZE_MAX;
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t flat = step * batch_size + k;
    if (flat / dataset_size != epoch) {
      epoch = flat / dataset_size;
      order.resize(dataset_size);
      std::iota(order.begin(), order.end(), 0);
      Rng rng(mix_seed(seed, kBatchSalt, epoch));
      for (std::size_t i = dataset_size - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    }
    out.push_back(order[flat % dataset_size]);
  }
  return out;
}

void pretrain_steps(AvMaskModel<float>& model, AdamWState& optimizer, const TrainConfig& train,
                    const PreparedDataset& data, std::vector<double>& losses, const MetricsSink& sink,
                    std::size_t stop_at) {
  const auto& grid = model.config().grid;
  auto params = model.params().tensors();
  const auto decay = decay_mask_for(params);
  const AdamWHyper hyper{.weight_decay = train.weight_decay};
  const std::size_t warmup = train.resolved_warmup();
  const auto start = Clock::now();

  const std::size_t end = std::min(train.steps, stop_at);
  for (std::size_t step = optimizer.step; step < end; ++step) {
    const float lr = warmup_cosine_lr(train.lr, step, warmup, train.steps);
    const auto batch = batch_indices(train.seed, step, train.batch_size, data.size());
    model.params().zero_grad();
    double value = 0.0;
    try {
      Tape tape;
      TapeScope scope(tape);
      Tensor total;
      for (std::size_t slot = 0; slot < batch.size(); ++slot) {
        const auto& ex = data.examples[batch[slot]];
        const auto mask = sample_tube_mask(mask_seed(train.seed, step, slot), grid, train.mask_ratio);
        const auto out = model.forward(ex.clip, ex.cepstra, mask);
        auto l = reconstruction_loss(ex.clip, out.reconstruction, train.loss_scope, grid, out.masked_index);
        total = total.defined() ? add(total, l) : l;
      }
      Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
      value = loss.item();
      if (!std::isfinite(value)) throw NumericError("non-finite loss");
      tape.backward(loss);
    } catch (const NumericError& e) {
      throw NumericError("pretrain step " + std::to_string(step) + ": " + e.what());
    }
    adamw_step(params, optimizer, lr, hyper, decay);
    losses.push_back(value);
    if (sink) sink({step, "pretrain", value, lr, std::nullopt, elapsed_ms(start)});
  }
}

TrainOutcome pretrain(const ModelConfig& model_cfg, const TrainConfig& train, const PreparedDataset& data,
                      const MetricsSink& sink) {
  train.validate();
  require_data(data, "pretrain");
  const ModelConfig cfg = with_train_switches(model_cfg, train);
  cfg.validate();
  TrainOutcome out;
  out.model = std::make_unique<AvMaskModel<float>>(cfg, model_seed(train.seed));
  out.optimizer = AdamWState::for_params(out.model->params().tensors());
  for (const auto& p : out.model->params().entries()) out.optimized.push_back(p.name);
  out.stats = data.stats;
  pretrain_steps(*out.model, out.optimizer, train, data, out.losses, sink);
  return out;
}

std::vector<float> class_logits(const AvMaskModel<float>& model, const PreparedExample& example) {
  NoGradScope no_grad;
  const auto enc = model.encode(example.clip, example.cepstra, TubeMask::all_visible(model.config().grid));
  auto logits = model.classify(enc.fused);
  return {logits.data().begin(), logits.data().end()};
}

TrainOutcome finetune(const ModelConfig& model_cfg, const TrainConfig& train, const PreparedDataset& data,
                      const Checkpoint* pretrained, const std::string& checkpoint_path, const MetricsSink& sink) {
  train.validate();
  require_data(data, "finetune");
  if (data.num_classes < 2) throw ParameterError("finetune: need at least 2 classes");
  const ModelConfig cfg = with_train_switches(model_cfg, train);
  cfg.validate();

  TrainOutcome out;
  out.stats = data.stats;
  out.model = std::make_unique<AvMaskModel<float>>(cfg, model_seed(train.seed));
  auto& model = *out.model;
  if (pretrained != nullptr) {
    if (const std::size_t k = checkpoint_classes(*pretrained); k > 0) {
      model.add_classifier(k, mix_seed(train.seed, kHeadSalt));
      restore_model(model, *pretrained, checkpoint_path, true);
      if (k != data.num_classes)
        throw TensorShapeError(checkpoint_path, "tensor 'param/head.linear.weight' has " + std::to_string(k) +
                                                    " classes, dataset has " + std::to_string(data.num_classes));
    } else {
      restore_model(model, *pretrained, checkpoint_path, true);
      model.add_classifier(data.num_classes, mix_seed(train.seed, kHeadSalt));
    }
  } else {
    model.add_classifier(data.num_classes, mix_seed(train.seed, kHeadSalt));
  }

  std::vector<Tensor> trainable;
  for (const auto& p : model.params().entries()) {
    if (starts_with(p.name, "decoder.")) continue;
    if (train.freeze_encoder && !starts_with(p.name, "head.")) continue;
    trainable.push_back(p.tensor);
    out.optimized.push_back(p.name);
  }
  out.optimizer = AdamWState::for_params(trainable);
  const auto decay = decay_mask_for(trainable);
  const AdamWHyper hyper{.weight_decay = train.weight_decay};
  const std::size_t warmup = train.resolved_warmup();
  const auto grid = cfg.grid;
  const auto start = Clock::now();

  for (std::size_t step = 0; step < train.steps; ++step) {
    const float lr = warmup_cosine_lr(train.lr, step, warmup, train.steps);
    const auto batch = batch_indices(train.seed, step, train.batch_size, data.size());
    model.params().zero_grad();
    double value = 0.0;
    std::size_t correct = 0;
    try {
      Tape tape;
      TapeScope scope(tape);
      Tensor total;
      for (std::size_t idx : batch) {
        const auto& ex = data.examples[idx];
        Tensor fused;
        if (train.freeze_encoder) {
          NoGradScope no_grad;
          fused = model.encode(ex.clip, ex.cepstra, TubeMask::all_visible(grid)).fused;
        } else {
          fused = model.encode(ex.clip, ex.cepstra, TubeMask::all_visible(grid)).fused;
        }
        auto logits = model.classify(fused);
        if (argmax(logits.data()) == ex.label) ++correct;
        const std::size_t label[] = {ex.label};
        auto l = cross_entropy(logits, std::span<const std::size_t>(label));
        total = total.defined() ? add(total, l) : l;
      }
      Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
      value = loss.item();
      if (!std::isfinite(value)) throw NumericError("non-finite loss");
      tape.backward(loss);
    } catch (const NumericError& e) {
      throw NumericError("finetune step " + std::to_string(step) + ": " + e.what());
    }
    adamw_step(trainable, out.optimizer, lr, hyper, decay);
    const double acc = static_cast<double>(correct) / static_cast<double>(batch.size());
    out.losses.push_back(value);
    out.accuracies.push_back(acc);
    if (sink) sink({step, "finetune", value, lr, acc, elapsed_ms(start)});
  }
  return out;
}

bool topk_hit(std::span<const float> logits, std::size_t label, std::size_t k) {
  if (label >= logits.size()) throw DimensionError("topk_hit: label out of range");
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (logits[j] > logits[label] || (logits[j] == logits[label] && j < label)) ++ahead;
  }
  return ahead < k;
}

double topk_accuracy(const std::vector<std::vector<float>>& logits, std::span<const std::size_t> labels,
                     std::size_t k) {
  if (logits.size() != labels.size()) throw DimensionError("topk_accuracy: logits/labels count mismatch");
  if (logits.empty()) throw DimensionError("topk_accuracy: no examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) hits += topk_hit(logits[i], labels[i], k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(logits.size());
}

EvalResult evaluate(const AvMaskModel<float>& model, const PreparedDataset& data, const EvalOptions& options) {
  require_data(data, "evaluate");
  NoGradScope no_grad;
  const auto& grid = model.config().grid;
  EvalResult r;
  r.examples = data.size();
  double mse_sum = 0.0;
  std::vector<std::vector<float>> logits;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data.examples[i];
    const auto mask = sample_tube_mask(mix_seed(options.mask_seed, kMaskSalt, i), grid, options.mask_ratio);
    mse_sum += mse_loss(model.forward(ex.clip, ex.cepstra, mask).reconstruction, ex.clip).item();
    if (model.has_classifier()) {
      logits.push_back(class_logits(model, ex));
      labels.push_back(ex.label);
    }
  }
  r.recon_mse = mse_sum / static_cast<double>(data.size());
  if (model.has_classifier()) {
    r.top1 = topk_accuracy(logits, labels, 1);
    r.top5 = topk_accuracy(logits, labels, 5);
    r.per_class.resize(model.num_classes());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= r.per_class.size()) throw DimensionError("evaluate: label exceeds classifier classes");
      ++r.per_class[labels[i]].total;
      if (topk_hit(logits[i], labels[i], 1)) ++r.per_class[labels[i]].correct;
    }
  }
  return r;
}

std::string eval_to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["examples"] = r.examples;
  j["recon_mse"] = r.recon_mse;
  j["top1"] = r.top1 ? nlohmann::ordered_json(*r.top1) : nlohmann::ordered_json(nullptr);
  j["top5"] = r.top5 ? nlohmann::ordered_json(*r.top5) : nlohmann::ordered_json(nullptr);
  auto per = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    const auto& t = r.per_class[k];
    nlohmann::ordered_json row;
    row["class"] = k;
    row["correct"] = t.correct;
    row["total"] = t.total;
    row["accuracy"] = t.total > 0 ? nlohmann::ordered_json(static_cast<double>(t.correct) / t.total)
                                  : nlohmann::ordered_json(nullptr);
    per.push_back(row);
  }
  j["per_class"] = per;
  return j.dump();
}

}  // namespace avmask
