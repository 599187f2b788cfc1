// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "avmask/data/av_data.hpp"

namespace avmask {

struct MfccParams {
  std::uint32_t sample_rate = 16000;
  std::size_t window = 400;    // 25 ms
  std::size_t hop = 160;       // 10 ms
  std::size_t fft_size = 512;
  std::size_t num_filters = 26;
  double f_min = 0.0;
  double f_max = 8000.0;
  std::size_t num_cepstra = 13;
  double log_floor = 1e-10;
};

// 1 + floor((num_samples - window) / hop); zero when num_samples < window.
std::size_t mfcc_frame_count(std::size_t num_samples, const MfccParams& params);

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Symmetric Hann taper of length n (zero at both ends).
std::vector<double> hann_window(std::size_t n);

// Triangular filters evaluated at the DFT bin frequencies k * sr / fft_size.
// Row m has fft_size/2 + 1 weights; filter m rises from edge m to peak m+1 and
// falls to edge m+2 of num_filters+2 mel-spaced points.
std::vector<std::vector<double>> mel_filterbank(const MfccParams& params);

// Mel-bank energies (before the log) of one analysis window of `window`
// samples: Hann taper, magnitude spectrum, filter-weighted sums.
std::vector<double> mel_energies(std::span<const float> frame, const MfccParams& params);

// Per window: mel energies, natural log with floor, orthonormal DCT-II,
// first num_cepstra coefficients.
CepstralFrames mfcc(const AudioWave& wave, const MfccParams& params = {});

}  // namespace avmask
