// SPDX-License-Identifier: Apache-2.0
#include "avmask/data/mfcc.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

#include "avmask/core/errors.hpp"

namespace avmask {

namespace {

void validate(const MfccParams& p) {
  if (p.sample_rate == 0) throw ParameterError("mfcc: sample_rate must be positive");
  if (p.window < 1 || p.hop < 1) throw ParameterError("mfcc: window and hop must be >= 1");
  if (p.fft_size < p.window) throw ParameterError("mfcc: fft_size must be >= window");
  if (p.num_filters < 1 || p.num_cepstra < 1 || p.num_cepstra > p.num_filters)
    throw ParameterError("mfcc: need 1 <= num_cepstra <= num_filters");
  if (!(p.f_min >= 0.0) || !(p.f_max > p.f_min) || p.f_max > p.sample_rate / 2.0)
    throw ParameterError("mfcc: need 0 <= f_min < f_max <= sample_rate/2");
  if (!(p.log_floor > 0.0)) throw ParameterError("mfcc: log_floor must be positive");
}

// FFTW planning touches global state, so plans are created under a lock.
// FFTW_ESTIMATE keeps the chosen algorithm (and its rounding) fixed per size.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  // |X_k| for k in [0, n/2].
  void magnitudes(std::vector<double>& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

std::vector<double> energies_with(RealFft& fft, std::span<const float> frame, const std::vector<double>& taper,
                                  const std::vector<std::vector<double>>& bank, const MfccParams& p,
                                  std::vector<double>& spectrum) {
  double* in = fft.input();
  for (std::size_t i = 0; i < p.fft_size; ++i) in[i] = i < p.window ? frame[i] * taper[i] : 0.0;
  fft.magnitudes(spectrum);
  std::vector<double> e(p.num_filters, 0.0);
  for (std::size_t m = 0; m < p.num_filters; ++m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) acc += bank[m][k] * spectrum[k];
    e[m] = acc;
  }
  return e;
}

}  // namespace

std::size_t mfcc_frame_count(std::size_t num_samples, const MfccParams& params) {
  if (num_samples < params.window) return 0;
  return 1 + (num_samples - params.window) / params.hop;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

std::vector<std::vector<double>> mel_filterbank(const MfccParams& p) {
  validate(p);
  const std::size_t bins = p.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(p.f_min), mel_hi = hz_to_mel(p.f_max);
  std::vector<double> edges(p.num_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(p.num_filters + 1));

  std::vector<std::vector<double>> bank(p.num_filters, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < p.num_filters; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * p.sample_rate / static_cast<double>(p.fft_size);
      if (f > left && f < centre)
        bank[m][k] = (f - left) / (centre - left);
      else if (f >= centre && f < right)
        bank[m][k] = (right - f) / (right - centre);
    }
  }
  return bank;
}

std::vector<double> mel_energies(std::span<const float> frame, const MfccParams& params) {
  validate(params);
  if (frame.size() < params.window) throw DimensionError("mel_energies: frame shorter than window");
  RealFft fft(params.fft_size);
  std::vector<double> spectrum;
  return energies_with(fft, frame, hann_window(params.window), mel_filterbank(params), params, spectrum);
}

CepstralFrames mfcc(const AudioWave& wave, const MfccParams& params) {
  validate(params);
  if (wave.samples.empty()) throw DimensionError("mfcc: empty audio");
  if (wave.sample_rate != params.sample_rate)
    throw ParameterError("mfcc: audio sample rate " + std::to_string(wave.sample_rate) + " != configured " +
                         std::to_string(params.sample_rate));
  const std::size_t frames = mfcc_frame_count(wave.samples.size(), params);
  if (frames == 0)
    throw DimensionError("mfcc: " + std::to_string(wave.samples.size()) + " samples is shorter than one window");

  const auto taper = hann_window(params.window);
  const auto bank = mel_filterbank(params);
  const std::size_t m_count = params.num_filters;
  // Orthonormal DCT-II basis, rows = kept coefficients.
  std::vector<double> dct(params.num_cepstra * m_count);
  for (std::size_t n = 0; n < params.num_cepstra; ++n) {
    const double norm = std::sqrt((n == 0 ? 1.0 : 2.0) / static_cast<double>(m_count));
    for (std::size_t m = 0; m < m_count; ++m)
      dct[n * m_count + m] =
          norm * std::cos(std::numbers::pi * static_cast<double>(n) * (static_cast<double>(m) + 0.5) / m_count);
  }

  RealFft fft(params.fft_size);
  std::vector<double> spectrum;
  std::vector<float> out(frames * params.num_cepstra);
  std::span<const float> samples(wave.samples);
  for (std::size_t t = 0; t < frames; ++t) {
    auto e = energies_with(fft, samples.subspan(t * params.hop, params.window), taper, bank, params, spectrum);
    for (auto& v : e) v = std::log(std::max(v, params.log_floor));
    for (std::size_t n = 0; n < params.num_cepstra; ++n) {
      double acc = 0.0;
      for (std::size_t m = 0; m < m_count; ++m) acc += dct[n * m_count + m] * e[m];
      out[t * params.num_cepstra + n] = static_cast<float>(acc);
    }
  }
  check_finite<float>(out, "mfcc");
  return {Tensor::from({frames, params.num_cepstra}, std::move(out))};
}

}  // namespace avmask
