// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "avmask/core/tensor.hpp"
#include "avmask/data/av_data.hpp"
#include "avmask/data/mfcc.hpp"
#include "avmask/model/tokenizer.hpp"

namespace avmask {

// Model-ready example: clip tensor plus normalised cepstra, computed once.
struct PreparedExample {
  Tensor clip;      // [frames x H x W x C]
  Tensor cepstra;   // [N_len x N_cep]
  std::size_t label = 0;
};

// Per-coefficient normalisation statistics over every frame of a dataset.
struct CepstralStats {
  std::vector<float> mean;
  std::vector<float> stddev;

  bool empty() const noexcept { return mean.empty(); }
};

struct PreparedDataset {
  std::vector<PreparedExample> examples;
  std::size_t num_classes = 0;  // max label + 1
  CepstralStats stats;          // applied to every example's cepstra

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

CepstralStats cepstral_stats(const std::vector<Tensor>& frames);

// (c - mean) / (stddev + 1e-5) per coefficient.
Tensor normalize_cepstra(const Tensor& frames, const CepstralStats& stats);

// Computes MFCCs and checks every clip against `grid` (DimensionError).
// Cepstra are normalised with `stats`, or with statistics of this dataset
// when `stats` is empty; held-out data should reuse the training statistics.
PreparedDataset prepare_dataset(const std::vector<LabeledExample>& examples, const PatchGrid& grid,
                                const CepstralStats& stats = {}, const MfccParams& mfcc_params = {});

}  // namespace avmask
