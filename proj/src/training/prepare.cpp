// SPDX-License-Identifier: Apache-2.0
#include "avmask/training/prepare.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "avmask/core/errors.hpp"

namespace avmask {

CepstralStats cepstral_stats(const std::vector<Tensor>& frames) {
  if (frames.empty()) throw DimensionError("cepstral_stats: no cepstra");
  const std::size_t d = frames.front().rank() == 2 ? frames.front().dim(1) : 0;
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (f.rank() != 2 || f.dim(1) != d) throw DimensionError("cepstral_stats: inconsistent cepstra " + shape_str(f.shape()));
    auto v = f.data();
    for (std::size_t i = 0; i < f.dim(0); ++i)
      for (std::size_t j = 0; j < d; ++j) sum[j] += v[i * d + j];
    n += f.dim(0);
  }
  if (n == 0) throw DimensionError("cepstral_stats: no frames");
  CepstralStats s;
  for (std::size_t j = 0; j < d; ++j) s.mean.push_back(static_cast<float>(sum[j] / static_cast<double>(n)));
  for (const auto& f : frames) {
    auto v = f.data();
    for (std::size_t i = 0; i < f.dim(0); ++i)
      for (std::size_t j = 0; j < d; ++j) sq[j] += (v[i * d + j] - s.mean[j]) * (v[i * d + j] - s.mean[j]);
  }
  for (std::size_t j = 0; j < d; ++j) s.stddev.push_back(static_cast<float>(std::sqrt(sq[j] / static_cast<double>(n))));
  return s;
}

Tensor normalize_cepstra(const Tensor& frames, const CepstralStats& stats) {
  if (frames.rank() != 2 || frames.dim(1) != stats.mean.size() || stats.stddev.size() != stats.mean.size()) {
    throw DimensionError("normalize_cepstra: " + shape_str(frames.shape()) + " vs statistics for " +
                         std::to_string(stats.mean.size()) + " coefficients");
  }
  const std::size_t d = frames.dim(1);
  auto src = frames.data();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t j = i % d;
    out[i] = static_cast<float>((static_cast<double>(src[i]) - stats.mean[j]) / (stats.stddev[j] + 1e-5));
  }
  return Tensor::from(frames.shape(), std::move(out));
}

PreparedDataset prepare_dataset(const std::vector<LabeledExample>& examples, const PatchGrid& grid,
                                const CepstralStats& stats, const MfccParams& mfcc_params) {
  grid.validate();
  std::vector<Tensor> raw;
  raw.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (ex.video.frames.shape() != grid.clip_shape()) {
      throw DimensionError("example " + std::to_string(i) + ": clip " + shape_str(ex.video.frames.shape()) +
                           " does not match the model grid " + shape_str(grid.clip_shape()));
    }
    raw.push_back(mfcc(ex.audio, mfcc_params).frames);
  }
  PreparedDataset out;
  if (examples.empty()) return out;
  out.stats = stats.empty() ? cepstral_stats(raw) : stats;
  out.examples.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out.examples.push_back({examples[i].video.frames, normalize_cepstra(raw[i], out.stats), examples[i].label});
    out.num_classes = std::max(out.num_classes, examples[i].label + 1);
  }
  return out;
}

}  // namespace avmask
