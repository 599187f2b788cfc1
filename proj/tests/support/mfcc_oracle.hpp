#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

// Direct O(N^2) DFT reference for the cepstral front end. Shares no code with
// the library implementation.
namespace oracle {

struct MfccSetup {
  double sample_rate = 16000;
  int window = 400;
  int hop = 160;
  int nfft = 512;
  int filters = 26;
  double f_lo = 0.0;
  double f_hi = 8000.0;
  int ceps = 13;
  double floor = 1e-10;
};

inline double mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double inv_mel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Weight of filter m at frequency f.
inline double triangle(const MfccSetup& s, int m, double f) {
  auto edge = [&](int i) { return inv_mel(mel(s.f_lo) + (mel(s.f_hi) - mel(s.f_lo)) * i / (s.filters + 1)); };
  const double a = edge(m), b = edge(m + 1), c = edge(m + 2);
  if (f > a && f < b) return (f - a) / (b - a);
  if (f >= b && f < c) return (c - f) / (c - b);
  return 0.0;
}

inline std::vector<double> filter_energies(const MfccSetup& s, const float* frame) {
  const int bins = s.nfft / 2 + 1;
  std::vector<double> mag(bins);
  for (int k = 0; k < bins; ++k) {
    std::complex<double> acc = 0.0;
    for (int n = 0; n < s.window; ++n) {
      const double hann = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / (s.window - 1)));
      acc += static_cast<double>(frame[n]) * hann * std::polar(1.0, -2.0 * std::numbers::pi * k * n / s.nfft);
    }
    mag[k] = std::abs(acc);
  }
  std::vector<double> e(s.filters, 0.0);
  for (int m = 0; m < s.filters; ++m)
    for (int k = 0; k < bins; ++k) e[m] += triangle(s, m, k * s.sample_rate / s.nfft) * mag[k];
  return e;
}

inline std::vector<std::vector<double>> mfcc(const MfccSetup& s, const std::vector<float>& x) {
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start + s.window <= x.size(); start += s.hop) {
    auto e = filter_energies(s, x.data() + start);
    std::vector<double> c(s.ceps, 0.0);
    for (int n = 0; n < s.ceps; ++n) {
      for (int m = 0; m < s.filters; ++m)
        c[n] += std::log(std::max(e[m], s.floor)) * std::cos(std::numbers::pi * n * (m + 0.5) / s.filters);
      c[n] *= n == 0 ? std::sqrt(1.0 / s.filters) : std::sqrt(2.0 / s.filters);
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace oracle
