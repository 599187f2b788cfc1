#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "avmask/core/errors.hpp"
#include "avmask/core/rng.hpp"
#include "avmask/data/av_data.hpp"
#include "avmask/data/dataset.hpp"
#include "avmask/data/mfcc.hpp"
#include "avmask/io/binary.hpp"
#include "doctest.h"
#include "support/mfcc_oracle.hpp"
#include "support/temp_dir.hpp"

using namespace avmask;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end(),
                                              [](float x, float y) { return std::bit_cast<std::uint32_t>(x) ==
                                                                            std::bit_cast<std::uint32_t>(y); });
}

double frame_variance(const Tensor& frames, std::size_t f) {
  const std::size_t per = frames.numel() / frames.dim(0);
  auto d = frames.data().subspan(f * per, per);
  const double m = std::accumulate(d.begin(), d.end(), 0.0) / per;
  double v = 0;
  for (float x : d) v += (x - m) * (x - m);
  return v / per;
}

}  // namespace

TEST_CASE("synthetic pair shapes and constants") {
  auto ex = generate_synthetic_pair(1, 2);
  CHECK(ex.label == 2);
  CHECK(ex.video.frames.shape() == Shape{8, 32, 32, 3});
  CHECK(ex.video.fps == 8.0);
  CHECK(ex.audio.sample_rate == 16000);
  CHECK(ex.audio.samples.size() == 16000);
  for (float v : ex.video.frames.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  for (float s : ex.audio.samples) CHECK(std::abs(s) <= 1.0f);
  CHECK(tone_frequency(0) == 220.0);
  CHECK(tone_frequency(4) == 440.0);
  CHECK_THROWS_AS(generate_synthetic_pair(1, 4), ParameterError);
  CHECK_THROWS_AS(generate_synthetic_pair(1, 9, {.num_classes = 12}), ParameterError);
}

TEST_CASE("synthetic pair is deterministic in its arguments") {
  auto a = generate_synthetic_pair(42, 3);
  auto b = generate_synthetic_pair(42, 3);
  CHECK(same_bits(a.video.frames, b.video.frames));
  CHECK(a.audio.samples == b.audio.samples);
  auto c = generate_synthetic_pair(43, 3);
  CHECK_FALSE(same_bits(a.video.frames, c.video.frames));
}

TEST_CASE("audio envelope tracks blob x position on every example") {
  SyntheticSpec spec{.num_classes = kMaxSyntheticClasses};
  for (std::size_t k = 0; k < kMaxSyntheticClasses; ++k) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      auto ex = generate_synthetic_pair(seed, k, spec);
      const std::size_t per = ex.audio.samples.size() / spec.frames;
      std::vector<double> env, xs;
      for (std::size_t f = 0; f < spec.frames; ++f) {
        double acc = 0;
        for (std::size_t i = f * per; i < (f + 1) * per; ++i) acc += ex.audio.samples[i] * ex.audio.samples[i];
        env.push_back(std::sqrt(acc / per));
        xs.push_back(blob_position(seed, k, spec, (f + 0.5) / spec.fps).x);
      }
      const double r = pearson(env, xs);
      INFO("class " << k << " seed " << seed << " r " << r);
      CHECK(std::abs(r) > 0.9);
    }
  }
}

TEST_CASE("rendered blob sits at the reported position") {
  SyntheticSpec spec;
  auto ex = generate_synthetic_pair(9, 0, spec);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const auto pos = blob_position(9, 0, spec, (f + 0.5) / spec.fps);
    // centroid of pixels brighter than the background
    double sx = 0, sw = 0;
    for (std::size_t i = 0; i < 32; ++i)
      for (std::size_t j = 0; j < 32; ++j) {
        const double v = ex.video.frames[((f * 32 + i) * 32 + j) * 3];
        const double w = std::max(0.0, v - 0.15);
        sx += w * (j + 0.5);
        sw += w;
      }
    CHECK(std::abs(sx / sw - (pos.x + spec.blob / 2.0)) < 0.5);
  }
}

TEST_CASE("degrade_video") {
  auto clip = generate_synthetic_pair(3, 1).video;
  SUBCASE("kernel 1 factor 1 is identity") { CHECK(same_bits(degrade_video(clip, 1, 1).frames, clip.frames)); }
  SUBCASE("constants are fixed points") {
    VideoClip flat{Tensor::filled({2, 8, 8, 3}, 0.5f), 8.0};
    for (auto [k, f] : {std::pair{1, 2}, {3, 1}, {5, 4}, {7, 3}}) {
      auto out = degrade_video(flat, k, f);
      for (float v : out.frames.data()) CHECK(std::abs(v - 0.5f) < 1e-6f);
    }
  }
  SUBCASE("blur reduces per-frame variance on a random clip") {
    Rng rng(17);
    std::vector<float> px(4 * 16 * 16 * 3);
    for (auto& v : px) v = static_cast<float>(rng.uniform());
    VideoClip noisy{Tensor::from({4, 16, 16, 3}, px), 8.0};
    auto blurred = degrade_video(noisy, 3, 1);
    for (std::size_t f = 0; f < 4; ++f) CHECK(frame_variance(blurred.frames, f) < frame_variance(noisy.frames, f));
    auto both = degrade_video(noisy, 3, 2);
    CHECK(both.frames.shape() == noisy.frames.shape());
    for (float v : both.frames.data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  SUBCASE("even kernel rejected") { CHECK_THROWS_AS(degrade_video(clip, 2, 1), ParameterError); }
}

TEST_CASE("mfcc frame count and silence fixtures") {
  AudioWave one_second{std::vector<float>(16000, 0.0f), 16000};
  auto cep = mfcc(one_second);
  CHECK(cep.length() == 98);
  CHECK(cep.coefficients() == 13);
  CHECK(mfcc_frame_count(400, {}) == 1);
  CHECK(mfcc_frame_count(559, {}) == 1);
  CHECK(mfcc_frame_count(560, {}) == 2);

  // Silence: every frame is the DCT of a constant log(1e-10) vector, i.e.
  // c0 = sqrt(26) * log(1e-10) and all other coefficients zero.
  const float c0 = static_cast<float>(std::sqrt(26.0) * std::log(1e-10));
  for (std::size_t t = 0; t < cep.length(); ++t) {
    for (std::size_t n = 0; n < 13; ++n) CHECK(cep.frames[t * 13 + n] == cep.frames[n]);
  }
  CHECK(std::abs(cep.frames[0] - c0) < 1e-4f);
  for (std::size_t n = 1; n < 13; ++n) CHECK(std::abs(cep.frames[n]) < 1e-4f);

  CHECK_THROWS_AS(mfcc(AudioWave{{}, 16000}), DimensionError);
  CHECK_THROWS_AS(mfcc(AudioWave{std::vector<float>(100, 0.1f), 16000}), DimensionError);
}

TEST_CASE("mfcc matches a direct DFT reference on random waveforms") {
  oracle::MfccSetup setup;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(mix_seed(1234, seed));
    const std::size_t n = 400 + rng.below(4000);
    AudioWave w{std::vector<float>(n), 16000};
    for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto got = mfcc(w);
    auto want = oracle::mfcc(setup, w.samples);
    REQUIRE(got.length() == want.size());
    double worst = 0;
    for (std::size_t t = 0; t < want.size(); ++t)
      for (std::size_t c = 0; c < 13; ++c) worst = std::max(worst, std::abs(got.frames[t * 13 + c] - want[t][c]));
    INFO("seed " << seed << " worst abs diff " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("440 Hz tone peaks in the filter containing 440 Hz") {
  std::vector<float> tone(400);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = static_cast<float>(0.8 * std::sin(2 * std::numbers::pi * 440.0 * i / 16000));
  auto e = mel_energies(tone, {});
  const auto got = std::max_element(e.begin(), e.end()) - e.begin();
  oracle::MfccSetup setup;
  int want = 0;
  for (int m = 1; m < setup.filters; ++m)
    if (oracle::triangle(setup, m, 440.0) > oracle::triangle(setup, want, 440.0)) want = m;
  CHECK(got == want);
  CHECK(oracle::triangle(setup, want, 440.0) > 0.5);
}

TEST_CASE("video record golden bytes for a 1-frame 2x2x3 clip") {
  std::vector<float> px = {0.0f, 0.5f, 1.0f, 0.25f, 0.75f, 0.0f, 1.0f, 1.0f, 0.5f, 0.25f, 0.0f, 0.75f};
  VideoClip clip{Tensor::from({1, 2, 2, 3}, px), 1.0};
  const std::string bytes = encode_video_record(clip);
  // hand layout: magic, four u32 extents, then IEEE-754 LE floats
  auto f = [](std::uint8_t b2, std::uint8_t b3) { return std::string{'\0', '\0', static_cast<char>(b2), static_cast<char>(b3)}; };
  const std::string zero = f(0x00, 0x00), half = f(0x00, 0x3f), one = f(0x80, 0x3f), quarter = f(0x80, 0x3e),
                    three_q = f(0x40, 0x3f);
  std::string want = "AVT1";
  want += std::string("\x01\0\0\0\x02\0\0\0\x02\0\0\0\x03\0\0\0", 16);
  for (const auto& s : {zero, half, one, quarter, three_q, zero, one, one, half, quarter, zero, three_q}) want += s;
  CHECK(bytes.size() == 68);
  CHECK(bytes == want);
}

TEST_CASE("audio record layout") {
  AudioWave w{{1.0f, -0.5f}, 8000};
  const std::string b = encode_audio_record(w);
  CHECK(b == std::string("AWV1\x40\x1f\0\0\x02\0\0\0\0\0\0\0\0\0\x80\x3f\0\0\0\xbf", 24));
}

TEST_CASE("dataset round trip is bitwise exact") {
  TempDir dir("ds");
  std::vector<LabeledExample> exs = {generate_synthetic_pair(1, 0), generate_synthetic_pair(2, 3),
                                     generate_synthetic_pair(3, 1)};
  write_dataset(dir.str(), exs);
  auto back = read_dataset(dir.str());
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].label == exs[i].label);
    CHECK(same_bits(back[i].video.frames, exs[i].video.frames));
    CHECK(back[i].audio.samples == exs[i].audio.samples);
    CHECK(back[i].audio.sample_rate == exs[i].audio.sample_rate);
    CHECK(back[i].video.fps == exs[i].video.fps);
  }
  auto manifest = read_manifest(dir.str());
  CHECK(manifest[1].basename == "clip_00001");
  CHECK(manifest[1].class_name == "circular");
}

TEST_CASE("dataset corruption raises distinct named errors") {
  TempDir dir("bad");
  write_dataset(dir.str(), {generate_synthetic_pair(1, 0), generate_synthetic_pair(2, 1)});
  const std::string video = dir.file("clip_00000.avt");
  auto original = io::read_file(video);

  SUBCASE("bad magic names the file") {
    auto bytes = original;
    bytes[0] = 'X';
    io::write_file_atomic(video, bytes);
    try {
      read_dataset(dir.str());
      FAIL("expected BadMagicError");
    } catch (const BadMagicError& e) {
      CHECK(e.path() == video);
      CHECK(std::string(e.what()).find("clip_00000.avt") != std::string::npos);
    }
  }
  SUBCASE("truncated record") {
    io::write_file_atomic(video, original.substr(0, original.size() - 5));
    CHECK_THROWS_AS(read_dataset(dir.str()), TruncatedFileError);
    io::write_file_atomic(video, original.substr(0, 10));
    CHECK_THROWS_AS(read_dataset(dir.str()), TruncatedFileError);
  }
  SUBCASE("manifest lists a missing record") {
    std::filesystem::remove(dir.file("clip_00001.awv"));
    CHECK_THROWS_AS(read_dataset(dir.str()), ManifestMismatchError);
  }
  SUBCASE("manifest class name disagrees with index") {
    std::ofstream(dir.file("manifest.tsv")) << "clip_00000\t0\tvertical\n";
    CHECK_THROWS_AS(read_dataset(dir.str()), ManifestMismatchError);
  }
  SUBCASE("error kinds are distinct") {
    static_assert(!std::is_base_of_v<BadMagicError, TruncatedFileError>);
    static_assert(!std::is_base_of_v<TruncatedFileError, BadMagicError>);
    static_assert(!std::is_base_of_v<ManifestMismatchError, BadMagicError>);
    static_assert(std::is_base_of_v<IoError, ManifestMismatchError>);
  }
}
