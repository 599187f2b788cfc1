// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "avmask/core/tensor.hpp"

namespace avmask {

struct VideoClip {
  Tensor frames;  // [N_f x H x W x C], values in [0,1]
  double fps = 8.0;

  std::size_t num_frames() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
  std::size_t channels() const { return frames.dim(3); }
};

struct AudioWave {
  std::vector<float> samples;  // in [-1,1]
  std::uint32_t sample_rate = 16000;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct CepstralFrames {
  Tensor frames;  // [N_len x N_cep]

  std::size_t length() const { return frames.dim(0); }
  std::size_t coefficients() const { return frames.dim(1); }
};

struct LabeledExample {
  VideoClip video;
  AudioWave audio;
  std::size_t label = 0;
};

// Motion patterns, one per class. Every pattern moves the blob horizontally
// so the amplitude envelope always carries position information.
enum class MotionPattern {
  horizontal,
  vertical,
  diagonal,
  circular,
  anti_diagonal,
  zigzag,
  figure_eight,
  bounce,
};
inline constexpr std::size_t kMaxSyntheticClasses = 8;

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  double fps = 8.0;
  std::uint32_t sample_rate = 16000;
  double duration = 1.0;   // seconds
  std::size_t blob = 8;    // square side in pixels
  double noise = 0.02;     // static background texture amplitude
};

MotionPattern motion_pattern(std::size_t class_id);
std::string class_name(std::size_t class_id);
// 220 * 2^(k/4) Hz
double tone_frequency(std::size_t class_id);

// Blob top-left corner at time t seconds. `seed` jitters the path.
struct BlobPosition {
  double x;
  double y;
};
BlobPosition blob_position(std::uint64_t seed, std::size_t class_id, const SyntheticSpec& spec, double t);

// Deterministic in (seed, class_id, spec).
LabeledExample generate_synthetic_pair(std::uint64_t seed, std::size_t class_id, const SyntheticSpec& spec = {});

// Box blur (odd kernel, averaged over in-bounds taps) followed by bilinear
// down- then up-sampling by `factor`. Kernel 1 and factor 1 are exact no-ops.
VideoClip degrade_video(const VideoClip& v, std::size_t blur_kernel_size, std::size_t downsample_factor);

}  // namespace avmask
