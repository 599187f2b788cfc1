// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. `acceptance 2 8` runs only criteria 2 and 8.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "avmask/cli/run_config.hpp"
#include "avmask/core/errors.hpp"
#include "avmask/core/op_suite.hpp"
#include "avmask/core/ops.hpp"
#include "avmask/core/rng.hpp"
#include "avmask/core/tape.hpp"
#include "avmask/data/dataset.hpp"
#include "avmask/data/mfcc.hpp"
#include "avmask/io/binary.hpp"
#include "avmask/training/ablation.hpp"
#include "support/mfcc_oracle.hpp"
#include "support/temp_dir.hpp"

using namespace avmask;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <class E>
bool throws_as(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

std::vector<float> flat_params(const AvMaskModel<float>& m) {
  std::vector<float> out;
  for (const auto& p : m.params().entries()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

PreparedDataset make_data(const ModelConfig& model, std::size_t count, std::uint64_t seed, bool held_out,
                          std::optional<cli::Degradation> degrade = {}, const CepstralStats& stats = {},
                          std::size_t classes = 4) {
  cli::DataConfig d;
  d.classes = classes;
  d.seed = seed;
  d.degrade = degrade;
  return prepare_dataset(cli::generate_examples(d, count, held_out, cli::synthetic_spec_for(model.grid)), model.grid,
                         stats);
}

// --- 1 ------------------------------------------------------------------------

Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  constexpr double tol = 1e-3;
  double worst = 0.0;
  std::string worst_name;
  std::size_t ops = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto checks = op_gradient_checks<double>(seed);
    ops = checks.size();
    for (auto& c : checks) {
      const auto r = c.run({});
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        worst_name = c.name;
      }
    }
  }

  const auto cfg = ModelConfig::micro();
  AvMaskModel<double> model(cfg, 7);
  Rng rng(18);
  std::vector<double> px(shape_numel(cfg.grid.clip_shape()));
  for (auto& v : px) v = rng.uniform();
  const auto clip = Tensor64::from(cfg.grid.clip_shape(), px);
  std::vector<double> cep(8 * 4);
  for (auto& v : cep) v = rng.normal();
  const auto cepstra = Tensor64::from({8, 4}, cep);
  const auto mask = sample_tube_mask(3, cfg.grid, 0.5);
  auto params = model.params().tensors();
  GradCheckOptions opts;
  opts.richardson = true;
  const auto r = grad_check<double>([&] { return mse_loss(model.forward(clip, cepstra, mask).reconstruction, clip); },
                                    std::span<Tensor64>(params), opts);
  const double secs = seconds_since(t0);
  const bool pass = worst < tol && r.max_rel_error < tol && secs < 60.0;
  return {pass, fmt("%zu ops x 5 seeds worst %.2e (%s); micro model %zu coords %.2e; %.1f s", ops, worst,
                    worst_name.c_str(), r.coordinates, r.max_rel_error, secs)};
}

// --- 2 ------------------------------------------------------------------------

Verdict masking_invariants() {
  constexpr std::size_t kSeeds = 10000;
  // Smallest grid on which N_p^2 (1 - rho) is an integer for all three ratios.
  const PatchGrid grid{.frames = 4, .patches_per_side = 10, .temporal_samples = 1, .frame_height = 10,
                       .frame_width = 10, .channels = 1};
  const std::size_t positions = grid.spatial_positions();
  const std::size_t tokens = grid.num_tokens();
  // Column 0 of each token carries its own index.
  auto token_ids = Tensor::zeros({tokens, grid.token_dim()});
  for (std::size_t t = 0; t < tokens; ++t) token_ids.mutable_data()[t * grid.token_dim()] = static_cast<float>(t);

  std::string detail;
  bool pass = true;
  for (double rho : {0.75, 0.90, 0.95}) {
    const auto expect_keep = static_cast<std::size_t>(std::lround(positions * (1.0 - rho)));
    std::vector<std::size_t> hits(positions, 0);
    std::size_t count_err = 0, tube_err = 0, partition_err = 0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const auto mask = sample_tube_mask(seed, grid, rho);
      if (mask.kept() != expect_keep) ++count_err;
      const auto m = apply_mask(token_ids, grid, mask);
      // tube: the visible spatial positions are the same in every frame
      std::vector<std::set<std::size_t>> per_frame(grid.total_frames());
      for (std::size_t t : m.visible_index) per_frame[t / positions].insert(t % positions);
      for (const auto& f : per_frame)
        if (f != per_frame.front() || f.size() != expect_keep) {
          ++tube_err;
          break;
        }
      // partition: visible and masked cover every token exactly once
      std::vector<int> seen(tokens, 0);
      for (std::size_t t : m.visible_index) ++seen[t];
      for (std::size_t t : m.masked_index) ++seen[t];
      if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; })) ++partition_err;
      for (std::size_t r = 0; r < m.visible_index.size(); ++r)
        if (m.visible.data()[r * grid.token_dim()] != static_cast<float>(m.visible_index[r])) ++partition_err;
      for (std::size_t p : per_frame.front()) ++hits[p];
    }
    double worst_dev = 0.0;
    for (std::size_t h : hits) worst_dev = std::max(worst_dev, std::abs(static_cast<double>(h) / kSeeds - (1.0 - rho)));
    const bool ok = count_err == 0 && tube_err == 0 && partition_err == 0 && worst_dev <= 0.01;
    pass = pass && ok;
    // binomial standard deviation of one position's frequency, for reading the deviation
    const double sigma = std::sqrt(rho * (1.0 - rho) / kSeeds);
    detail += fmt("rho %.2f keep %zu max freq dev %.4f (%.2f sigma) count/tube/partition errors %zu/%zu/%zu; ", rho,
                  expect_keep, worst_dev, worst_dev / sigma, count_err, tube_err, partition_err);
  }
  return {pass, detail + fmt("N_p=%zu, %zu frames, 10000 seeds", grid.patches_per_side, grid.total_frames())};
}

// --- 3 ------------------------------------------------------------------------

Verdict shape_contract() {
  const auto cfg = ModelConfig::toy();
  const auto data = make_data(cfg, 1, 3, false);
  AvMaskModel<float> model(cfg, 5);
  const auto& ex = data.examples[0];
  const auto mask = sample_tube_mask(9, cfg.grid, 0.9);
  NoGradScope no_grad;
  const auto out = model.forward(ex.clip, ex.cepstra, mask);
  const std::size_t d_v = cfg.grid.token_dim();
  const std::size_t n_vis = mask.kept() * cfg.grid.total_frames();
  const bool pass = out.reconstruction.shape() == ex.clip.shape() && out.fused.shape() == Shape{n_vis, 2 * d_v};
  return {pass, fmt("clip %s recon %s fused %s (N_vis %zu, D_v %zu)", shape_str(ex.clip.shape()).c_str(),
                    shape_str(out.reconstruction.shape()).c_str(), shape_str(out.fused.shape()).c_str(), n_vis, d_v)};
}

// --- 4 ------------------------------------------------------------------------

Verdict learning_check() {
  const auto cfg = ModelConfig::toy();
  const auto train_set = make_data(cfg, 200, 0, false);
  const auto test_set = make_data(cfg, 100, 0, true, {}, train_set.stats);
  TrainConfig t;
  t.steps = 300;
  t.mask_ratio = 0.9;
  t.seed = 0;
  const EvalOptions eval{.mask_ratio = 0.9, .mask_seed = 1};

  AvMaskModel<float> untrained(cfg, model_seed(t.seed));
  const double before = evaluate(untrained, test_set, eval).recon_mse;
  const auto t0 = Clock::now();
  const auto out = pretrain(cfg, t, train_set);
  const double secs = seconds_since(t0);
  const double after = evaluate(*out.model, test_set, eval).recon_mse;
  const double ratio = after / before;
  return {ratio < 0.5 && secs < 600.0,
          fmt("held-out MSE %.4f -> %.4f (ratio %.3f, threshold 0.5); 300 steps in %.0f s", before, after, ratio, secs)};
}

// --- 5, 6, 7 ------------------------------------------------------------------

// Reduced budget shared by the comparative criteria.
ExperimentConfig desk_experiment(std::uint64_t seed) {
  ExperimentConfig ex;
  ex.model.encoder = {2, 64, 2, 2};
  ex.model.decoder = {2, 48, 2, 2};
  ex.model.fusion.heads = 2;
  ex.pretrain.steps = 150;
  ex.pretrain.seed = seed;
  ex.finetune.steps = 100;
  ex.finetune.seed = seed;
  ex.eval.mask_ratio = 0.9;
  return ex;
}

Verdict cross_modality_benefit() {
  const cli::Degradation degrade{3, 2};
  std::size_t wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto base = desk_experiment(seed);
    base.pretrain.steps = 300;
    base.run_finetune = false;
    const auto train_set = make_data(base.model, 200, seed, false, degrade);
    const auto test_set = make_data(base.model, 64, seed, true, degrade, train_set.stats);
    const auto table = run_ablation(AblationAxis::modalities, base, train_set, test_set);
    const double av = table.rows[0].recon_mse, v = table.rows[1].recon_mse;
    wins += av < v ? 1 : 0;
    detail += fmt("seed %llu AV %.5f V-only %.5f; ", static_cast<unsigned long long>(seed), av, v);
  }
  return {wins == 3, detail + fmt("AV lower on %zu/3", wins)};
}

Verdict cross_attention_ablation() {
  std::size_t wins = 0;
  bool above = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto base = desk_experiment(seed);
    const auto train_set = make_data(base.model, 200, seed, false);
    const auto test_set = make_data(base.model, 64, seed, true, {}, train_set.stats);
    const auto table = run_ablation(AblationAxis::cross_attention, base, train_set, test_set);
    const double with = *table.rows[0].top1, without = *table.rows[1].top1;
    wins += with >= without ? 1 : 0;
    above = above && with > 0.5 && without > 0.5;
    detail += fmt("seed %llu w/ %.3f w/o %.3f; ", static_cast<unsigned long long>(seed), with, without);
  }
  return {wins >= 2 && above, detail + fmt("w/ >= w/o on %zu/3", wins)};
}

Verdict mask_ratio_sweep() {
  const auto base = desk_experiment(1);
  const auto train_set = make_data(base.model, 200, 1, false);
  const auto test_set = make_data(base.model, 64, 1, true, {}, train_set.stats);
  const auto table = run_ablation(AblationAxis::mask_ratio, base, train_set, test_set);
  bool pass = table.rows.size() == 3;
  std::string detail;
  const double want[] = {0.75, 0.90, 0.95};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    pass = pass && i < 3 && r.mask_ratio == want[i] && r.top1 && std::isfinite(*r.top1) && r.top5 &&
           std::isfinite(*r.top5);
    detail += fmt("%s top1 %.3f top5 %.3f mse %.6f; ", r.variant.c_str(), r.top1.value_or(NAN),
                  r.top5.value_or(NAN), r.recon_mse);
  }
  return {pass, detail + fmt("%zu rows", table.rows.size())};
}

// --- 8 ------------------------------------------------------------------------

Verdict mse_scalar_loop() {
  Rng rng(808);
  std::size_t exact = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const std::size_t side = 2 * (1 + rng.below(4));
    PatchGrid g{.frames = 1 + rng.below(3), .patches_per_side = 2, .temporal_samples = 1, .frame_height = side,
                .frame_width = side, .channels = 1 + rng.below(3)};
    std::vector<float> a(shape_numel(g.clip_shape())), b(a.size());
    for (auto& x : a) x = static_cast<float>(rng.uniform());
    for (auto& x : b) x = static_cast<float>(rng.uniform());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(b[i]) - static_cast<double>(a[i]);
      acc += d * d;
    }
    const float expect = static_cast<float>(acc / static_cast<double>(a.size()));
    const float got =
        reconstruction_loss(Tensor::from(g.clip_shape(), a), Tensor::from(g.clip_shape(), b), LossScope::full, g, {})
            .item();
    exact += got == expect ? 1 : 0;
  }
  return {exact == 20, fmt("%zu/20 pairs bitwise equal to the scalar loop", exact)};
}

// --- 9 ------------------------------------------------------------------------

Verdict determinism_and_persistence() {
  auto cfg = ModelConfig::toy();
  cfg.grid.frames = 4;
  cfg.grid.frame_height = cfg.grid.frame_width = 16;
  cfg.encoder = {1, 32, 2, 2};
  cfg.decoder = {1, 16, 2, 2};
  const auto data = make_data(cfg, 16, 4, false);
  TrainConfig t;
  t.steps = 10;
  t.batch_size = 4;
  t.seed = 42;
  const auto a = pretrain(cfg, t, data);
  const auto b = pretrain(cfg, t, data);
  const bool deterministic = a.losses == b.losses && same_bits(flat_params(*a.model), flat_params(*b.model));

  TempDir dir("acceptance");
  const auto path = dir.file("run.avmk");
  const auto ckpt = a.checkpoint(t);
  save_checkpoint(path, ckpt);
  const auto loaded = load_checkpoint(path);
  auto restored = model_from_checkpoint(cfg, loaded, path);
  const bool round_trip = io::read_file(path) == encode_checkpoint(loaded) &&
                          same_bits(flat_params(*restored), flat_params(*a.model));

  const std::string good = io::read_file(path);
  std::string magic = good, version = good, flipped = good;
  magic[0] = 'Q';
  version[4] = 9;
  flipped[good.size() / 2] ^= 0x10;
  Checkpoint stray;
  stray.add("weights/w", Tensor::from({1}, {1.0f}));
  auto other = cfg;
  other.encoder.dim = 48;
  AvMaskModel<float> wrong(other, 0);
  const bool ckpt_errors =
      throws_as<BadMagicError>([&] { decode_checkpoint(magic, path); }) &&
      throws_as<VersionMismatchError>([&] { decode_checkpoint(version, path); }) &&
      throws_as<TruncatedFileError>([&] { decode_checkpoint(good.substr(0, good.size() / 3), path); }) &&
      throws_as<ChecksumError>([&] { decode_checkpoint(flipped, path); }) &&
      throws_as<UnknownTensorError>([&] { decode_checkpoint(encode_checkpoint(stray), path); }) &&
      throws_as<TensorShapeError>([&] { restore_model(wrong, loaded, path); });

  const auto ds = dir.file("data");
  write_dataset(ds, {generate_synthetic_pair(1, 0), generate_synthetic_pair(2, 1)});
  const auto video = ds + "/clip_00000.avt";
  const auto audio = ds + "/clip_00001.awv";
  const auto video_bytes = io::read_file(video);
  std::string bad = video_bytes;
  bad[1] = '?';
  io::write_file_atomic(video, bad);
  bool data_errors = throws_as<BadMagicError>([&] { read_dataset(ds); });
  io::write_file_atomic(video, video_bytes.substr(0, video_bytes.size() - 7));
  data_errors = data_errors && throws_as<TruncatedFileError>([&] { read_dataset(ds); });
  io::write_file_atomic(video, video_bytes);
  std::filesystem::remove(audio);
  data_errors = data_errors && throws_as<ManifestMismatchError>([&] { read_dataset(ds); });

  return {deterministic && round_trip && ckpt_errors && data_errors,
          fmt("10-step rerun bitwise %s; checkpoint round trip %s; checkpoint errors %s; dataset errors %s",
              deterministic ? "yes" : "no", round_trip ? "yes" : "no", ckpt_errors ? "named" : "WRONG",
              data_errors ? "named" : "WRONG")};
}

// --- 10 -----------------------------------------------------------------------

Verdict mfcc_oracle() {
  const oracle::MfccSetup setup;
  double worst = 0.0;
  bool lengths = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(mix_seed(99, seed));
    AudioWave w{std::vector<float>(400 + rng.below(8000)), 16000};
    for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));
    const auto got = mfcc(w);
    const auto want = oracle::mfcc(setup, w.samples);
    lengths = lengths && got.length() == want.size();
    for (std::size_t t = 0; t < std::min(got.length(), want.size()); ++t)
      for (std::size_t c = 0; c < 13; ++c)
        worst = std::max(worst, std::abs(static_cast<double>(got.frames[t * 13 + c]) - want[t][c]));
  }

  const auto silent = mfcc(AudioWave{std::vector<float>(16000, 0.0f), 16000});
  const auto silent_oracle = oracle::mfcc(setup, std::vector<float>(16000, 0.0f));
  bool silence = silent.length() == 98 && silent_oracle.size() == 98;
  const double c0 = std::sqrt(26.0) * std::log(1e-10);
  for (std::size_t t = 0; silence && t < silent.length(); ++t) {
    silence = silence && std::abs(silent.frames[t * 13] - c0) < 1e-4;
    for (std::size_t c = 1; c < 13; ++c) silence = silence && std::abs(silent.frames[t * 13 + c]) < 1e-4;
  }
  const MfccParams p;
  const bool counts = mfcc_frame_count(399, p) == 0 && mfcc_frame_count(400, p) == 1 &&
                      mfcc_frame_count(559, p) == 1 && mfcc_frame_count(560, p) == 2 &&
                      mfcc_frame_count(16000, p) == 98;
  return {worst < 1e-4 && lengths && silence && counts,
          fmt("10 waveforms worst |diff| %.2e; silence %s; frame counts %s", worst, silence ? "exact" : "WRONG",
              counts ? "exact" : "WRONG")};
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion all[] = {
      {1, "gradient oracle suite", gradient_oracle},
      {2, "masking invariants", masking_invariants},
      {3, "shape contract", shape_contract},
      {4, "pretraining halves reconstruction MSE", learning_check},
      {5, "audio lowers MSE on degraded video", cross_modality_benefit},
      {6, "cross-attention ablation", cross_attention_ablation},
      {7, "mask-ratio sweep", mask_ratio_sweep},
      {8, "full-scope MSE equals scalar loop", mse_scalar_loop},
      {9, "determinism and persistence", determinism_and_persistence},
      {10, "MFCC oracle", mfcc_oracle},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s %2d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
