// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "avmask/core/errors.hpp"
#include "avmask/core/rng.hpp"
#include "avmask/data/av_data.hpp"

namespace avmask {

namespace {

constexpr std::array<const char*, kMaxSyntheticClasses> kClassNames = {
    "horizontal", "vertical", "diagonal", "circular", "anti_diagonal", "zigzag", "figure_eight", "bounce"};

void check_class(std::size_t class_id, const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.num_classes > kMaxSyntheticClasses)
    throw ParameterError("num_classes must be in [1, " + std::to_string(kMaxSyntheticClasses) + "], got " +
                         std::to_string(spec.num_classes));
  if (class_id >= spec.num_classes)
    throw ParameterError("class_id " + std::to_string(class_id) + " out of range for " +
                         std::to_string(spec.num_classes) + " classes");
}

void check_spec(const SyntheticSpec& spec) {
  if (spec.frames < 1 || spec.height < 1 || spec.width < 1) throw ParameterError("empty synthetic clip extents");
  if (spec.blob < 1 || spec.blob + 4 > std::min(spec.height, spec.width))
    throw ParameterError("blob size must leave a 2-pixel margin on each side");
  if (!(spec.fps > 0) || !(spec.duration > 0) || spec.sample_rate == 0)
    throw ParameterError("fps, duration and sample_rate must be positive");
}

// Per-example path parameters, drawn once from the seed.
struct PathJitter {
  double direction;  // +1 or -1
  double start;      // sweep endpoint jitter in [0,2)
  double end;
  double offset;     // unit-interval draw for the fixed coordinate
  double drift;      // in [5,7)
  double radius;     // in [0,1), scaled per pattern
  double phase;      // in [0, 2pi)
};

PathJitter draw_jitter(std::uint64_t seed, std::size_t class_id) {
  Rng rng(mix_seed(seed, class_id, 0x70617468));
  PathJitter j;
  j.direction = rng.uniform() < 0.5 ? -1.0 : 1.0;
  j.start = rng.uniform(0.0, 2.0);
  j.end = rng.uniform(0.0, 2.0);
  j.offset = rng.uniform();
  j.drift = rng.uniform(5.0, 7.0);
  j.radius = rng.uniform();
  j.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return j;
}

}  // namespace

MotionPattern motion_pattern(std::size_t class_id) {
  if (class_id >= kMaxSyntheticClasses) throw ParameterError("no motion pattern for class " + std::to_string(class_id));
  return static_cast<MotionPattern>(class_id);
}

std::string class_name(std::size_t class_id) {
  if (class_id >= kMaxSyntheticClasses) throw ParameterError("no class name for class " + std::to_string(class_id));
  return kClassNames[class_id];
}

double tone_frequency(std::size_t class_id) { return 220.0 * std::exp2(static_cast<double>(class_id) / 4.0); }

namespace {

BlobPosition position_at(const PathJitter& j, std::size_t class_id, const SyntheticSpec& spec, double t) {
  const double range_x = static_cast<double>(spec.width - spec.blob);
  const double range_y = static_cast<double>(spec.height - spec.blob);
  const double u = std::clamp(t / spec.duration, 0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;

  auto sweep = [&](double range, double dir) {
    const double lo = 2.0 + j.start;
    const double hi = range - 2.0 - j.end;
    const double p = dir > 0 ? u : 1.0 - u;
    return lo + (hi - lo) * p;
  };
  auto fixed = [&](double range) { return 2.0 + j.offset * (range - 4.0); };
  const double cx = range_x / 2.0;
  const double cy = range_y / 2.0;
  const double max_r = std::min(cx, cy) - 2.0;

  switch (motion_pattern(class_id)) {
    case MotionPattern::horizontal:
      return {sweep(range_x, j.direction), fixed(range_y)};
    case MotionPattern::vertical: {
      // Small horizontal drift keeps the x trace informative.
      const double drift = std::min(j.drift, range_x - 4.0);
      const double x0 = 2.0 + j.offset * (range_x - 4.0 - drift);
      const double p = j.direction > 0 ? u : 1.0 - u;
      return {x0 + drift * p, sweep(range_y, j.direction)};
    }
    case MotionPattern::diagonal:
      return {sweep(range_x, j.direction), sweep(range_y, j.direction)};
    case MotionPattern::circular: {
      const double r = max_r * (0.7 + 0.3 * j.radius);
      const double a = j.phase + j.direction * two_pi * u;
      return {cx + r * std::cos(a), cy + r * std::sin(a)};
    }
    case MotionPattern::anti_diagonal:
      return {sweep(range_x, j.direction), sweep(range_y, -j.direction)};
    case MotionPattern::zigzag: {
      const double tri = 1.0 - std::abs(std::fmod(4.0 * u, 2.0) - 1.0) * 2.0;  // two periods in [-1,1]
      return {sweep(range_x, j.direction), cy + max_r * 0.8 * tri};
    }
    case MotionPattern::figure_eight: {
      const double r = max_r * (0.7 + 0.3 * j.radius);
      const double a = j.phase + j.direction * two_pi * u;
      return {cx + r * std::sin(a), cy + 0.6 * r * std::sin(2.0 * a)};
    }
    case MotionPattern::bounce: {
      const double lo = 2.0 + j.start;
      const double hi = range_x - 2.0 - j.end;
      const double p = j.direction > 0 ? std::abs(2.0 * u - 1.0) : 1.0 - std::abs(2.0 * u - 1.0);
      return {lo + (hi - lo) * p, fixed(range_y)};
    }
  }
  return {cx, cy};
}

}  // namespace

BlobPosition blob_position(std::uint64_t seed, std::size_t class_id, const SyntheticSpec& spec, double t) {
  check_class(class_id, spec);
  check_spec(spec);
  return position_at(draw_jitter(seed, class_id), class_id, spec, t);
}

LabeledExample generate_synthetic_pair(std::uint64_t seed, std::size_t class_id, const SyntheticSpec& spec) {
  check_class(class_id, spec);
  check_spec(spec);
  const std::size_t h = spec.height, w = spec.width, c = 3;
  const double range_x = static_cast<double>(w - spec.blob);
  const double side = static_cast<double>(spec.blob);
  const PathJitter jitter = draw_jitter(seed, class_id);

  Rng rng(mix_seed(seed, class_id, 0x636c6970));
  std::array<double, 3> color{};
  for (auto& v : color) v = rng.uniform(0.6, 1.0);
  std::vector<double> background(h * w * c);
  for (auto& v : background) v = std::clamp(0.1 + spec.noise * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
  const double tone_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  // Fraction of [lo, lo+1) covered by [a, a+side).
  auto overlap = [side](double lo, double a) { return std::max(0.0, std::min(lo + 1.0, a + side) - std::max(lo, a)); };

  std::vector<float> pixels(spec.frames * h * w * c);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const double t = (static_cast<double>(f) + 0.5) / spec.fps;
    const BlobPosition pos = position_at(jitter, class_id, spec, t);
    for (std::size_t i = 0; i < h; ++i) {
      const double cov_y = overlap(static_cast<double>(i), pos.y);
      for (std::size_t j = 0; j < w; ++j) {
        const double cov = cov_y * overlap(static_cast<double>(j), pos.x);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double bg = background[(i * w + j) * c + ch];
          pixels[((f * h + i) * w + j) * c + ch] = static_cast<float>(bg + (color[ch] - bg) * cov);
        }
      }
    }
  }

  LabeledExample ex;
  ex.label = class_id;
  ex.video.frames = Tensor::from({spec.frames, h, w, c}, std::move(pixels));
  ex.video.fps = spec.fps;

  const auto n = static_cast<std::size_t>(std::llround(spec.duration * spec.sample_rate));
  const double freq = tone_frequency(class_id);
  ex.audio.sample_rate = spec.sample_rate;
  ex.audio.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / spec.sample_rate;
    const double amp = 0.15 + 0.8 * position_at(jitter, class_id, spec, t).x / range_x;
    ex.audio.samples[k] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * t + tone_phase));
  }
  return ex;
}

namespace {

// Box average over in-bounds taps along one axis of a plane.
void box_pass(std::vector<double>& plane, std::size_t rows, std::size_t cols, std::size_t radius, bool along_rows) {
  std::vector<double> out(plane.size());
  const std::size_t n = along_rows ? cols : rows;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t col = 0; col < cols; ++col) {
      const std::size_t p = along_rows ? col : r;
      const std::size_t lo = p >= radius ? p - radius : 0;
      const std::size_t hi = std::min(n - 1, p + radius);
      double acc = 0.0;
      for (std::size_t q = lo; q <= hi; ++q) acc += along_rows ? plane[r * cols + q] : plane[q * cols + col];
      out[r * cols + col] = acc / static_cast<double>(hi - lo + 1);
    }
  }
  plane.swap(out);
}

// Bilinear resampling with pixel-centre alignment and edge clamping.
std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t oh,
                                    std::size_t ow) {
  std::vector<double> out(oh * ow);
  auto coord = [](std::size_t i, std::size_t in, std::size_t outn) {
    const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (std::size_t i = 0; i < oh; ++i) {
    const double sy = coord(i, h, oh);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t j = 0; j < ow; ++j) {
      const double sx = coord(j, w, ow);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = src[y0 * w + x0] * (1 - fx) + src[y0 * w + x1] * fx;
      const double bottom = src[y1 * w + x0] * (1 - fx) + src[y1 * w + x1] * fx;
      out[i * ow + j] = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

}  // namespace

VideoClip degrade_video(const VideoClip& v, std::size_t blur_kernel_size, std::size_t downsample_factor) {
  if (blur_kernel_size < 1 || blur_kernel_size % 2 == 0)
    throw ParameterError("blur kernel size must be odd and >= 1, got " + std::to_string(blur_kernel_size));
  if (downsample_factor < 1) throw ParameterError("downsample factor must be >= 1");
  if (v.frames.rank() != 4) throw DimensionError("video frames must be [N_f x H x W x C]");
  if (blur_kernel_size == 1 && downsample_factor == 1) return {v.frames.detach(), v.fps};

  const std::size_t nf = v.num_frames(), h = v.height(), w = v.width(), c = v.channels();
  const std::size_t oh = std::max<std::size_t>(1, h / downsample_factor);
  const std::size_t ow = std::max<std::size_t>(1, w / downsample_factor);
  const std::size_t radius = blur_kernel_size / 2;
  auto src = v.frames.data();
  std::vector<float> out(src.size());
  std::vector<double> plane(h * w);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = f * h * w * c;
      for (std::size_t p = 0; p < h * w; ++p) plane[p] = src[base + p * c + ch];
      if (radius > 0) {
        box_pass(plane, h, w, radius, true);
        box_pass(plane, h, w, radius, false);
      }
      if (downsample_factor > 1) plane = resize_bilinear(resize_bilinear(plane, h, w, oh, ow), oh, ow, h, w);
      for (std::size_t p = 0; p < h * w; ++p) out[base + p * c + ch] = static_cast<float>(std::clamp(plane[p], 0.0, 1.0));
    }
  }
  return {Tensor::from(v.frames.shape(), std::move(out)), v.fps};
}

}  // namespace avmask
