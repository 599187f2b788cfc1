#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "avmask/core/errors.hpp"
#include "avmask/core/gradcheck.hpp"
#include "avmask/core/ops.hpp"
#include "avmask/core/tape.hpp"
#include "avmask/model/av_model.hpp"
#include "doctest.h"

using namespace avmask;

namespace {

template <class T = float>
BasicTensor<T> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(scale * rng.normal());
  return BasicTensor<T>::from(std::move(shape), std::move(v));
}

Tensor random_clip(Rng& rng, const PatchGrid& g) {
  std::vector<float> v(shape_numel(g.clip_shape()));
  for (auto& x : v) x = static_cast<float>(rng.uniform());
  return Tensor::from(g.clip_shape(), v);
}

bool rows_equal(const Tensor& t, std::size_t a, std::size_t b) {
  const std::size_t d = t.dim(1);
  for (std::size_t j = 0; j < d; ++j)
    if (t[a * d + j] != t[b * d + j]) return false;
  return true;
}

template <class T>
std::vector<T> values(const BasicTensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace

// --- tokenizer ---------------------------------------------------------------

TEST_CASE("patch grid arithmetic") {
  PatchGrid g;
  CHECK(g.num_tokens() == 128);
  CHECK(g.token_dim() == 192);
  CHECK(g.patch_height() == 8);
  PatchGrid two_samples = g;
  two_samples.temporal_samples = 2;
  CHECK(two_samples.num_tokens() == 256);
  PatchGrid bad = g;
  bad.patches_per_side = 5;
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  CHECK_THROWS_AS(patchify(Tensor::zeros({8, 32, 32, 3}), bad), DimensionError);
}

TEST_CASE("patchify order and round trip") {
  PatchGrid g{.frames = 2, .patches_per_side = 2, .temporal_samples = 1, .frame_height = 4, .frame_width = 4,
              .channels = 3};
  std::vector<float> px(2 * 4 * 4 * 3);
  std::iota(px.begin(), px.end(), 0.0f);
  auto clip = Tensor::from(g.clip_shape(), px);
  auto tokens = patchify(clip, g);
  CHECK(tokens.shape() == Shape{8, 12});
  // token 1 = frame 0, patch row 0, patch col 1: pixel (0,2) channel 0 first
  CHECK(tokens[1 * 12 + 0] == static_cast<float>((0 * 4 + 2) * 3));
  // second element row of that token is pixel (1,2)
  CHECK(tokens[1 * 12 + 6] == static_cast<float>((1 * 4 + 2) * 3));
  // token 4 starts frame 1
  CHECK(tokens[4 * 12] == 48.0f);

  Rng rng(3);
  auto c = random_clip(rng, PatchGrid{});
  auto back = unpatchify(patchify(c, PatchGrid{}), PatchGrid{});
  CHECK(values(back) == values(c));
}

TEST_CASE("tube mask counts and determinism") {
  PatchGrid g;  // N_p^2 = 16
  CHECK(sample_tube_mask(1, g, 0.75).kept() == 4);
  PatchGrid g10 = g;
  g10.patches_per_side = 10;
  g10.frame_height = g10.frame_width = 40;
  CHECK(sample_tube_mask(1, g10, 0.90).kept() == 10);
  CHECK(sample_tube_mask(9, g, 0.9).keep == sample_tube_mask(9, g, 0.9).keep);
  CHECK_THROWS_AS(sample_tube_mask(1, g, 0.99), ParameterError);
  CHECK_THROWS_AS(sample_tube_mask(1, g, 0.0), ParameterError);
  CHECK_THROWS_AS(sample_tube_mask(1, g, 1.0), ParameterError);
}

TEST_CASE("apply_mask partitions tokens and keeps tubes") {
  PatchGrid g;
  Rng rng(2);
  auto tokens = patchify(random_clip(rng, g), g);
  auto mask = sample_tube_mask(4, g, 0.75);
  auto m = apply_mask(tokens, g, mask);
  CHECK(m.visible.dim(0) == 32);
  CHECK(m.visible_index.size() + m.masked_index.size() == 128);
  std::set<std::size_t> all(m.visible_index.begin(), m.visible_index.end());
  all.insert(m.masked_index.begin(), m.masked_index.end());
  CHECK(all.size() == 128);
  CHECK(std::is_sorted(m.visible_index.begin(), m.visible_index.end()));
  CHECK(std::is_sorted(m.masked_index.begin(), m.masked_index.end()));
  for (std::size_t t : m.visible_index) CHECK(mask.keeps_token(t % 16));
  // visible rows are the original rows
  CHECK(std::equal(m.visible.data().begin(), m.visible.data().begin() + 192,
                   tokens.data().begin() + m.visible_index[0] * 192));

  auto everything = apply_mask(tokens, g, TubeMask::all_visible(g));
  CHECK(values(everything.visible) == values(tokens));
  CHECK(everything.masked_index.empty());
  // ratio small enough that rounding keeps all 16 positions
  CHECK(sample_tube_mask(1, g, 0.01).kept() == 16);
  CHECK_THROWS_AS(apply_mask(Tensor::zeros({127, 192}), g, mask), DimensionError);
}

TEST_CASE("tube masks are uniform over positions") {
  PatchGrid g{.frames = 1, .patches_per_side = 10, .temporal_samples = 1, .frame_height = 10, .frame_width = 10,
              .channels = 1};
  constexpr std::size_t seeds = 10000;
  for (double rho : {0.75, 0.9, 0.95}) {
    std::vector<double> hits(100, 0.0);
    for (std::uint64_t s = 0; s < seeds; ++s) {
      const auto m = sample_tube_mask(s, g, rho);
      for (std::size_t p = 0; p < 100; ++p) hits[p] += m.keep[p];
    }
    const double p = 1.0 - rho;
    double worst = 0.0, chi2 = 0.0;
    for (double h : hits) {
      worst = std::max(worst, std::abs(h / seeds - p));
      chi2 += (h - seeds * p) * (h - seeds * p) / (seeds * p * (1.0 - p));
    }
    INFO("rho " << rho << " worst deviation " << worst << " chi2 " << chi2);
    if (rho == 0.9) CHECK(worst <= 0.01);
    // 99 degrees of freedom: 0.1% tails at about 148 and 62
    CHECK(chi2 < 148.0);
    CHECK(chi2 > 62.0);
  }
}

// --- visual encoder ----------------------------------------------------------

TEST_CASE("sinusoidal positions golden") {
  const std::size_t p0[] = {0};
  auto e0 = sinusoidal_positions<double>(p0, 8);
  CHECK(values(e0) == std::vector<double>{0, 1, 0, 1, 0, 1, 0, 1});
  const std::size_t p1[] = {1};
  auto e1 = sinusoidal_positions<double>(p1, 8);
  const std::vector<double> want = {std::sin(1.0),  std::cos(1.0),  std::sin(0.1),   std::cos(0.1),
                                    std::sin(0.01), std::cos(0.01), std::sin(0.001), std::cos(0.001)};
  for (int i = 0; i < 8; ++i) CHECK(e1[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("patch embedding") {
  ParamSet<float> ps;
  Rng rng(1);
  VisualEncoder<float> enc(ps, {.depth = 0, .dim = 8, .heads = 2, .mlp_ratio = 2}, 12, rng);
  for (auto t : ps.tensors()) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0f);
  const std::size_t pos[] = {0, 5};
  auto pure = enc.embed_patches(Tensor::zeros({2, 12}), pos, 10);
  CHECK(values(pure) == values(sinusoidal_positions<float>(pos, 8)));

  ParamSet<float> ps2;
  VisualEncoder<float> enc2(ps2, {.depth = 0, .dim = 8, .heads = 2, .mlp_ratio = 2}, 12, rng);
  std::vector<float> row(12, 0.3f);
  row.insert(row.end(), 12, 0.3f);
  auto same = enc2.embed_patches(Tensor::from({2, 12}, row), pos, 10);
  CHECK_FALSE(rows_equal(same, 0, 1));
  const std::size_t bad[] = {0, 10};
  CHECK_THROWS_AS(enc2.embed_patches(Tensor::zeros({2, 12}), bad, 10), DimensionError);
}

TEST_CASE("encode_visible") {
  Rng rng(4);
  SUBCASE("depth 0 is identity") {
    ParamSet<float> ps;
    VisualEncoder<float> enc(ps, {.depth = 0, .dim = 8, .heads = 2, .mlp_ratio = 2}, 12, rng);
    auto x = random_tensor(rng, {3, 8});
    CHECK(values(enc.encode_visible(x)) == values(x));
  }
  SUBCASE("shape preserved, attention rows are distributions") {
    ParamSet<float> ps;
    VisualEncoder<float> enc(ps, {.depth = 2, .dim = 12, .heads = 3, .mlp_ratio = 2}, 12, rng);
    auto x = random_tensor(rng, {5, 12});
    std::vector<Tensor> weights;
    auto y = enc.encode_visible(x, &weights);
    CHECK(y.shape() == x.shape());
    CHECK(weights.size() == 6);
    for (const auto& w : weights) {
      for (std::size_t r = 0; r < 5; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 5; ++c) {
          CHECK(w[r * 5 + c] >= 0.0f);
          s += w[r * 5 + c];
        }
        CHECK(std::abs(s - 1.0) <= 1e-5);
      }
    }
  }
  SUBCASE("micro golden (depth 1, dim 8, heads 2, 3 tokens)") {
    ParamSet<double> ps;
    Rng init(2024);
    VisualEncoder<double> enc(ps, {.depth = 1, .dim = 8, .heads = 2, .mlp_ratio = 4}, 8, init);
    Rng in(7);
    auto x = random_tensor<double>(in, {3, 8});
    auto y = enc.encode_visible(x);
    // recorded from a reference run; the attention kernel is checked against a dense loop below
    CHECK(y[0] == doctest::Approx(0.68905053793712112).epsilon(1e-9));
    CHECK(y[9] == doctest::Approx(-0.79853166175230472).epsilon(1e-9));
    CHECK(y[23] == doctest::Approx(0.11549506746282545).epsilon(1e-9));
  }
}

// --- audio encoder -----------------------------------------------------------

TEST_CASE("squeeze-excite gates") {
  ParamSet<float> ps;
  Rng rng(5);
  SqueezeExcite<float> se(ps, "se", 4, 2, rng);
  Tensor gates;
  auto x = random_tensor(rng, {4, 2, 2}, 3.0);
  se(x, &gates);
  REQUIRE(gates.shape() == Shape{4});
  for (float g : gates.data()) {
    CHECK(g > 0.0f);
    CHECK(g < 1.0f);
  }
  auto z = se(Tensor::zeros({4, 2, 2}));
  for (float v : z.data()) CHECK(v == 0.0f);
  // recorded from a reference run
  CHECK(gates[0] == doctest::Approx(0.502721369).epsilon(1e-6));
  CHECK(gates[3] == doctest::Approx(0.513041973).epsilon(1e-6));
}

TEST_CASE("audio encoder extents") {
  ParamSet<float> ps;
  Rng rng(6);
  AudioEncoder<float> enc(ps, AudioEncoderConfig{}, 16, rng);
  CHECK(enc.output_length(96) == 24);
  CHECK(enc.output_length(98) == 25);
  auto tokens = enc.encode(random_tensor(rng, {96, 13}));
  CHECK(tokens.shape() == Shape{24, 16});
  for (float v : tokens.data()) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(enc.encode(random_tensor(rng, {3, 13})), DimensionError);
}

TEST_CASE("align_audio_tokens") {
  auto t = Tensor::from({4, 1}, {1.0f, 3.0f, 5.0f, 7.0f});
  CHECK(values(align_audio_tokens(t, 2)) == std::vector<float>{2.0f, 6.0f});
  CHECK(values(align_audio_tokens(t, 4)) == values(t));
  auto flat = Tensor::filled({6, 3}, 0.25f);
  auto pooled = align_audio_tokens(flat, 3);
  for (float v : pooled.data()) CHECK(v == 0.25f);
  CHECK_THROWS_AS(align_audio_tokens(t, 0), ParameterError);
}

// --- fusion ------------------------------------------------------------------

TEST_CASE("single-key attention returns the projected value row") {
  ParamSet<double> ps;
  Rng rng(8);
  MultiHeadAttention<double> mha(ps, "mha", 6, 3, rng);
  auto q = random_tensor<double>(rng, {4, 6});
  auto ctx = random_tensor<double>(rng, {1, 6});
  auto out = mha(q, ctx);
  auto expect = mha.out(mha.v(ctx));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 6; ++j) CHECK(out[r * 6 + j] == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("identical keys give uniform weights and the mean value") {
  ParamSet<double> ps;
  Rng rng(9);
  MultiHeadAttention<double> mha(ps, "mha", 4, 2, rng);
  // identical key rows: zero the key projection so every key is its bias
  std::fill(mha.k.weight.mutable_data().begin(), mha.k.weight.mutable_data().end(), 0.0);
  auto q = random_tensor<double>(rng, {2, 4});
  auto ctx = random_tensor<double>(rng, {3, 4});
  std::vector<Tensor64> w;
  auto out = mha(q, ctx, &w);
  for (const auto& head : w)
    for (double a : head.data()) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  auto vals = mha.v(ctx);
  auto mean_v = reshape(mean_rows(vals), {1, 4});
  auto expect = mha.out(mean_v);
  for (std::size_t j = 0; j < 4; ++j) CHECK(out[j] == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("attention matches a direct dense computation (3 tokens)") {
  ParamSet<double> ps;
  Rng rng(10);
  const std::size_t d = 4, heads = 2, dh = 2, n = 3;
  MultiHeadAttention<double> mha(ps, "mha", d, heads, rng);
  auto qin = random_tensor<double>(rng, {n, d});
  auto kin = random_tensor<double>(rng, {n, d});
  auto got = mha(qin, kin);

  auto lin = [&](const Linear<double>& l, const Tensor64& x, std::size_t r, std::size_t c) {
    double acc = l.bias[c];
    for (std::size_t i = 0; i < d; ++i) acc += x[r * d + i] * l.weight[i * d + c];
    return acc;
  };
  std::vector<double> joined(n * d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logits(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) s += lin(mha.q, qin, i, c) * lin(mha.k, kin, j, c);
        logits[j] = s / std::sqrt(static_cast<double>(dh));
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += logits[j] / z * lin(mha.v, kin, j, c);
        joined[i * d + c] = acc;
      }
    }
  }
  auto expect = mha.out(Tensor64::from({n, d}, joined));
  for (std::size_t i = 0; i < n * d; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("cross-attention properties") {
  ParamSet<double> ps;
  Rng rng(11);
  CrossAttention<double> cross(ps, 6, {.heads = 3}, rng);
  auto video = random_tensor<double>(rng, {4, 6});
  auto audio = random_tensor<double>(rng, {4, 6});

  SUBCASE("rows are distributions") {
    CrossAttentionWeights<double> w;
    cross(video, audio, &w);
    CHECK(w.audio_to_video.size() == 3);
    for (const auto& set : {w.audio_to_video, w.video_to_audio})
      for (const auto& head : set)
        for (std::size_t r = 0; r < 4; ++r) {
          double s = 0;
          for (std::size_t c = 0; c < 4; ++c) s += head[r * 4 + c];
          CHECK(std::abs(s - 1.0) <= 1e-5);
        }
  }
  SUBCASE("permuting video rows leaves audio-query output unchanged") {
    const std::size_t perm[] = {2, 0, 3, 1};
    auto a = cross(video, audio).audio_to_video;
    auto b = cross(gather_rows(video, perm), audio).audio_to_video;
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  SUBCASE("identical audio rows give identical output rows") {
    auto one = random_tensor<double>(rng, {1, 6});
    auto flat_audio = repeat_rows(reshape(one, {6}), 4);
    auto out = cross(video, flat_audio);
    for (std::size_t r = 1; r < 4; ++r) {
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(out.audio_to_video[r * 6 + j] == out.audio_to_video[j]);
        CHECK(out.video_to_audio[r * 6 + j] == doctest::Approx(out.video_to_audio[j]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("row mismatch rejected") {
    CHECK_THROWS_AS(cross(video, random_tensor<double>(rng, {3, 6})), DimensionError);
  }
}

TEST_CASE("concat_fuse") {
  auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor::from({2, 3}, {7, 8, 9, 10, 11, 12});
  auto f = concat_fuse(a, b);
  CHECK(values(f) == std::vector<float>{1, 2, 3, 7, 8, 9, 4, 5, 6, 10, 11, 12});
  auto z = concat_fuse(a, Tensor::zeros({2, 3}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 3; j < 6; ++j) CHECK(z[r * 6 + j] == 0.0f);
  CHECK_THROWS_AS(concat_fuse(a, Tensor::zeros({3, 3})), DimensionError);
}

// --- decoder -----------------------------------------------------------------

TEST_CASE("assemble_sequence") {
  ParamSet<float> ps;
  Rng rng(12);
  Decoder<float> dec(ps, {.depth = 1, .dim = 8, .heads = 2, .mlp_ratio = 2}, 6, 12, rng);
  const std::size_t all[] = {0, 1, 2, 3};
  auto fused = random_tensor(rng, {4, 6});
  SUBCASE("no masked indices") {
    auto seq = dec.assemble_sequence(fused, all, {}, 4);
    auto expect = add(linear(fused, ps.at("decoder.fuse_proj.weight"), ps.at("decoder.fuse_proj.bias")),
                      sinusoidal_positions<float>(all, 8));
    CHECK(values(seq) == values(expect));
  }
  SUBCASE("masked positions differ only by position") {
    const std::size_t vis[] = {0, 2};
    const std::size_t msk[] = {1, 3};
    auto seq = dec.assemble_sequence(random_tensor(rng, {2, 6}), vis, msk, 4);
    auto pos = sinusoidal_positions<float>(all, 8);
    for (std::size_t j = 0; j < 8; ++j) {
      const float a = seq[1 * 8 + j] - pos[1 * 8 + j];
      const float b = seq[3 * 8 + j] - pos[3 * 8 + j];
      CHECK(a == doctest::Approx(b).epsilon(1e-6));
      CHECK(a == doctest::Approx(dec.mask_token()[j]).epsilon(1e-6));
    }
  }
  SUBCASE("collisions and gaps rejected") {
    const std::size_t vis[] = {0, 1};
    const std::size_t clash[] = {1, 3};
    CHECK_THROWS_AS(dec.assemble_sequence(random_tensor(rng, {2, 6}), vis, clash, 4), DimensionError);
    const std::size_t gap[] = {3};
    CHECK_THROWS_AS(dec.assemble_sequence(random_tensor(rng, {2, 6}), vis, gap, 4), DimensionError);
  }
}

TEST_CASE("decoder executes exactly the configured depth") {
  auto cfg = ModelConfig::toy();
  AvMaskModel<float> model(cfg, 1);
  CHECK(model.decoder().config().depth == 4);
  Rng rng(13);
  auto clip = random_clip(rng, cfg.grid);
  auto out = model.forward(clip, random_tensor(rng, {98, 13}), sample_tube_mask(1, cfg.grid, 0.9));
  CHECK(model.decoder().blocks_executed() == 4);
  CHECK(out.reconstruction.shape() == clip.shape());
}

// --- full model --------------------------------------------------------------

TEST_CASE("toy model shape contract") {
  auto cfg = ModelConfig::toy();
  AvMaskModel<float> model(cfg, 2);
  Rng rng(14);
  auto clip = random_clip(rng, cfg.grid);
  auto mask = sample_tube_mask(3, cfg.grid, 0.9);
  auto out = model.forward(clip, random_tensor(rng, {98, 13}), mask);
  const std::size_t n_vis = 8 * mask.kept();
  CHECK(out.visible_index.size() == n_vis);
  CHECK(out.visual_tokens.shape() == Shape{n_vis, 192});
  CHECK(out.audio_tokens.shape() == Shape{25, 192});
  CHECK(out.aligned_audio.shape() == Shape{n_vis, 192});
  CHECK(out.fused.shape() == Shape{n_vis, 384});
  CHECK(out.reconstruction.shape() == clip.shape());
}

TEST_CASE("model variants keep the fused width") {
  auto cfg = ModelConfig::micro();
  Rng rng(15);
  auto clip = random_clip(rng, cfg.grid);
  auto cep = random_tensor(rng, {8, 4});
  auto mask = sample_tube_mask(1, cfg.grid, 0.5);
  for (auto [cross, mod] : {std::pair{true, Modalities::audio_visual}, {false, Modalities::audio_visual},
                            {true, Modalities::visual_only}}) {
    auto c = cfg;
    c.use_cross_attention = cross;
    c.modalities = mod;
    AvMaskModel<float> m(c, 1);
    auto out = m.forward(clip, cep, mask);
    CHECK(out.fused.shape() == Shape{4, 96});
    CHECK((m.audio_encoder() != nullptr) == (mod == Modalities::audio_visual));
    CHECK((m.cross_attention() != nullptr) == (cross && mod == Modalities::audio_visual));
    if (mod == Modalities::visual_only)
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t j = 48; j < 96; ++j) CHECK(out.fused[r * 96 + j] == 0.0f);
  }
}

TEST_CASE("forward is deterministic") {
  auto cfg = ModelConfig::micro();
  Rng rng(16);
  auto clip = random_clip(rng, cfg.grid);
  auto cep = random_tensor(rng, {8, 4});
  auto mask = sample_tube_mask(1, cfg.grid, 0.5);
  AvMaskModel<float> a(cfg, 5), b(cfg, 5);
  CHECK(values(a.forward(clip, cep, mask).reconstruction) == values(b.forward(clip, cep, mask).reconstruction));
}

TEST_CASE("every parameter receives gradient; mask token included") {
  auto cfg = ModelConfig::micro();
  AvMaskModel<double> m(cfg, 6);
  Rng rng(17);
  auto clip = random_tensor<double>(rng, cfg.grid.clip_shape(), 0.5);
  auto cep = random_tensor<double>(rng, {8, 4});
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(mse_loss(m.forward(clip, cep, sample_tube_mask(2, cfg.grid, 0.5)).reconstruction, clip));
  }
  for (const auto& p : m.params().entries()) {
    INFO(p.name);
    REQUIRE(p.tensor.has_grad());
    double norm = 0;
    for (double g : p.tensor.grad()) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("micro model passes the gradient oracle") {
  auto cfg = ModelConfig::micro();
  AvMaskModel<double> m(cfg, 7);
  Rng rng(18);
  std::vector<double> px(shape_numel(cfg.grid.clip_shape()));
  for (auto& v : px) v = rng.uniform();
  auto clip = Tensor64::from(cfg.grid.clip_shape(), px);
  auto cep = random_tensor<double>(rng, {8, 4});
  auto mask = sample_tube_mask(3, cfg.grid, 0.5);
  auto params = m.params().tensors();
  auto r = grad_check<double>([&] { return mse_loss(m.forward(clip, cep, mask).reconstruction, clip); },
                              std::span<Tensor64>(params), {.richardson = true});
  INFO("worst " << m.params().entries()[r.worst_tensor].name << " err " << r.max_rel_error);
  CHECK(r.coordinates == m.params().scalar_count());
  CHECK(r.max_rel_error < 1e-3);
}
