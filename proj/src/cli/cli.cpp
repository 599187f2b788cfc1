// SPDX-License-Identifier: Apache-2.0
#include "avmask/cli/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <typeinfo>

#include "avmask/cli/run_config.hpp"
#include "avmask/core/errors.hpp"
#include "avmask/core/op_suite.hpp"
#include "avmask/core/ops.hpp"
#include "avmask/core/rng.hpp"
#include "avmask/data/dataset.hpp"
#include "avmask/io/binary.hpp"

namespace avmask::cli {

namespace {

constexpr double kGradTolerance = 1e-3;

// Raised for anything wrong with the invocation before work starts.
struct ValidationFailure : Error {
  using Error::Error;
};

std::string error_kind(const std::exception& e) {
#define AVMASK_KIND(T) \
  if (dynamic_cast<const T*>(&e) != nullptr) return #T
  AVMASK_KIND(BadMagicError);
  AVMASK_KIND(TruncatedFileError);
  AVMASK_KIND(ManifestMismatchError);
  AVMASK_KIND(VersionMismatchError);
  AVMASK_KIND(ChecksumError);
  AVMASK_KIND(UnknownTensorError);
  AVMASK_KIND(TensorShapeError);
  AVMASK_KIND(FormatError);
  AVMASK_KIND(IoError);
  AVMASK_KIND(DimensionError);
  AVMASK_KIND(NumericError);
  AVMASK_KIND(ParameterError);
  AVMASK_KIND(GraphError);
#undef AVMASK_KIND
  return "error";
}

// Flags shared by the training-style commands.
struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::string metrics;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_steps) {
  cmd->add_option("--config", f.config, "Run configuration file ([section] key = value)");
  cmd->add_option("--data", f.data, "Dataset directory");
  cmd->add_option("--metrics", f.metrics, "Append per-step JSON Lines metrics to this file");
  cmd->add_option("--seed", f.seed, "Seed (overrides the config file and AVMASK_SEED)");
  if (with_steps) cmd->add_option("--steps", f.steps, "Training steps (overrides the config file)");
  cmd->add_option("--set", f.sets, "Override one config entry: section.key=value (repeatable)");
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("AVMASK_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  std::uint64_t out = 0;
  const std::string s(v);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationFailure("AVMASK_SEED: expected a non-negative integer, got '" + s + "'");
  return out;
}

// Precedence: --seed, then the config file, then AVMASK_SEED, then the default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const RunConfig& cfg, const std::string& key,
                           std::uint64_t from_config) {
  if (flag) return *flag;
  if (cfg.has(key)) return from_config;
  if (auto env = env_seed()) return *env;
  return from_config;
}

RunConfig load_config(const CommonFlags& f) {
  RunConfig cfg;
  try {
    cfg = f.config.empty() ? run_config_from_text("", "<defaults>") : load_run_config(f.config);
    for (const auto& s : f.sets) {
      const auto eq = s.find('=');
      const auto dot = s.find('.');
      if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ParameterError("--set: expected section.key=value, got '" + s + "'");
      apply_setting(cfg, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
    }
  } catch (const ParameterError& e) {
    throw ValidationFailure(e.what());
  }
  return cfg;
}

void checked_validate(const RunConfig& cfg) {
  try {
    validate(cfg);
  } catch (const ParameterError& e) {
    throw ValidationFailure(e.what());
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationFailure(std::string(flag) + ": required");
}

PreparedDataset load_prepared(const std::string& dir, const ModelConfig& model, const CepstralStats& stats = {}) {
  return prepare_dataset(read_dataset(dir), model.grid, stats);
}

MetricsSink metrics_sink(const std::string& path) {
  if (path.empty()) return {};
  return JsonlMetricsWriter(path);
}

// --- gen-data ---------------------------------------------------------------

struct GenDataFlags {
  std::string config;
  std::string out;
  std::optional<std::size_t> classes;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::string degrade;
};

int cmd_gen_data(const GenDataFlags& f, std::ostream& out) {
  CommonFlags common;
  common.config = f.config;
  RunConfig cfg = load_config(common);
  require(f.out, "--out");
  if (f.classes) cfg.data.classes = *f.classes;
  if (f.count) cfg.data.count = *f.count;
  cfg.data.seed = resolve_seed(f.seed, cfg, "data.seed", cfg.data.seed);
  if (!f.degrade.empty()) {
    try {
      cfg.data.degrade = parse_degradation(f.degrade);
    } catch (const ParameterError& e) {
      throw ValidationFailure(std::string("--") + e.what());
    }
  }
  if (cfg.data.classes < 1 || cfg.data.classes > kMaxSyntheticClasses)
    throw ValidationFailure("--classes: must lie in [1, " + std::to_string(kMaxSyntheticClasses) + "], got " +
                            std::to_string(cfg.data.classes));
  if (cfg.data.count < 1) throw ValidationFailure("--count: must be >= 1");
  checked_validate(cfg);

  const auto examples =
      generate_examples(cfg.data, cfg.data.count, false, synthetic_spec_for(cfg.experiment.model.grid));
  write_dataset(f.out, examples);
  out << "gen-data: wrote " << examples.size() << " examples (" << cfg.data.classes << " classes, seed "
      << cfg.data.seed << ") to " << f.out << "\n";
  return kExitOk;
}

// --- pretrain / finetune / eval -------------------------------------------------

int cmd_pretrain(const CommonFlags& f, std::ostream& out) {
  RunConfig cfg = load_config(f);
  require(f.data, "--data");
  require(f.out, "--out");
  auto& train = cfg.experiment.pretrain;
  if (f.steps) train.steps = *f.steps;
  train.seed = resolve_seed(f.seed, cfg, "pretrain.seed", train.seed);
  checked_validate(cfg);

  const auto data = load_prepared(f.data, cfg.experiment.model);
  auto result = pretrain(cfg.experiment.model, train, data, metrics_sink(f.metrics));
  save_checkpoint(f.out, result.checkpoint(train));
  char line[200];
  std::snprintf(line, sizeof line, "pretrain: %zu steps, first loss %.6f, final loss %.6f, checkpoint %s\n",
                result.losses.size(), result.losses.front(), result.losses.back(), f.out.c_str());
  out << line;
  return kExitOk;
}

int cmd_finetune(const CommonFlags& f, const std::string& pretrained_path, bool freeze, std::ostream& out) {
  RunConfig cfg = load_config(f);
  require(f.data, "--data");
  require(f.out, "--out");
  auto& train = cfg.experiment.finetune;
  if (f.steps) train.steps = *f.steps;
  if (freeze) train.freeze_encoder = true;
  train.seed = resolve_seed(f.seed, cfg, "finetune.seed", train.seed);
  checked_validate(cfg);

  std::optional<Checkpoint> pretrained;
  if (!pretrained_path.empty()) pretrained = load_checkpoint(pretrained_path);
  const auto data = load_prepared(f.data, cfg.experiment.model, pretrained ? cepstral_stats_of(*pretrained) : CepstralStats{});
  auto result = finetune(cfg.experiment.model, train, data, pretrained ? &*pretrained : nullptr,
                         pretrained_path.empty() ? "<none>" : pretrained_path, metrics_sink(f.metrics));
  save_checkpoint(f.out, result.checkpoint(train));
  char line[200];
  std::snprintf(line, sizeof line, "finetune: %zu steps, final loss %.6f, final batch top1 %.4f, checkpoint %s\n",
                result.losses.size(), result.losses.back(), result.accuracies.back(), f.out.c_str());
  out << line;
  return kExitOk;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint_path, std::ostream& out) {
  RunConfig cfg = load_config(f);
  require(f.data, "--data");
  require(checkpoint_path, "--checkpoint");
  auto& opts = cfg.experiment.eval;
  opts.mask_seed = resolve_seed(f.seed, cfg, "eval.mask_seed", opts.mask_seed);
  checked_validate(cfg);

  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const TrainConfig& switches = checkpoint_classes(ckpt) > 0 ? cfg.experiment.finetune : cfg.experiment.pretrain;
  auto model = model_from_checkpoint(with_train_switches(cfg.experiment.model, switches), ckpt, checkpoint_path);
  const auto data = load_prepared(f.data, cfg.experiment.model, cepstral_stats_of(ckpt));
  const auto start = std::chrono::steady_clock::now();
  const auto result = evaluate(*model, data, opts);
  const std::string report = eval_to_json(result);
  if (!f.out.empty()) io::write_file_atomic(f.out, report + "\n");
  if (!f.metrics.empty()) {
    JsonlMetricsWriter writer(f.metrics);
    writer({0, "eval", result.recon_mse, 0.0, result.top1,
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()});
  }
  out << report << "\n";
  return kExitOk;
}

// --- gradcheck ----------------------------------------------------------------

int cmd_gradcheck(const std::string& scale, std::size_t seeds, bool inject_flip, std::ostream& out) {
  if (scale != "micro") throw ValidationFailure("--scale: only 'micro' is supported, got '" + scale + "'");
  if (seeds < 1) throw ValidationFailure("--seeds: must be >= 1");
  GradCheckOptions opts;
  opts.flip_analytic_sign = inject_flip;

  std::vector<std::string> names;
  std::vector<GradCheckResult> worst;
  for (std::size_t s = 1; s <= seeds; ++s) {
    auto checks = op_gradient_checks<double>(s);
    for (std::size_t i = 0; i < checks.size(); ++i) {
      auto r = checks[i].run(opts);
      if (s == 1) {
        names.push_back(checks[i].name);
        worst.push_back(r);
      } else {
        worst[i].coordinates += r.coordinates;
        if (r.max_rel_error > worst[i].max_rel_error) worst[i].max_rel_error = r.max_rel_error;
      }
    }
  }

  std::size_t failed = 0;
  char line[200];
  std::snprintf(line, sizeof line, "gradcheck: scale=%s eps=%.0e tolerance=%.0e seeds=%zu%s\n", scale.c_str(),
                opts.eps, kGradTolerance, seeds, inject_flip ? " (sign flip injected)" : "");
  out << line;
  auto report = [&](const std::string& name, const GradCheckResult& r) {
    const bool pass = r.max_rel_error < kGradTolerance;
    failed += pass ? 0 : 1;
    std::snprintf(line, sizeof line, "%s %-28s max_rel_err=%.3e coords=%zu\n", pass ? "PASS" : "FAIL", name.c_str(),
                  r.max_rel_error, r.coordinates);
    out << line;
  };
  for (std::size_t i = 0; i < names.size(); ++i) report(names[i], worst[i]);

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
  GradCheckOptions model_opts = opts;
  model_opts.richardson = true;
  auto r = grad_check<double>([&] { return mse_loss(model.forward(clip, cepstra, mask).reconstruction, clip); },
                              std::span<Tensor64>(params), model_opts);
  report("model[micro]", r);

  out << "gradcheck: " << names.size() + 1 << " checks, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitRuntime;
}

// --- ablate -------------------------------------------------------------------

int cmd_ablate(const CommonFlags& f, const std::string& axis_name, const std::string& test_data,
               std::ostream& out) {
  RunConfig cfg = load_config(f);
  AblationAxis axis;
  try {
    axis = ablation_axis_from_string(axis_name);
  } catch (const ParameterError& e) {
    throw ValidationFailure(std::string("--") + e.what());
  }
  auto& ex = cfg.experiment;
  if (f.steps) ex.pretrain.steps = *f.steps;
  ex.pretrain.seed = resolve_seed(f.seed, cfg, "pretrain.seed", ex.pretrain.seed);
  if (!cfg.has("finetune.seed")) ex.finetune.seed = ex.pretrain.seed;
  cfg.data.seed = resolve_seed(f.seed, cfg, "data.seed", cfg.data.seed);
  checked_validate(cfg);

  const auto spec = synthetic_spec_for(ex.model.grid);
  const auto train = f.data.empty() ? prepare_dataset(generate_examples(cfg.data, cfg.data.count, false, spec),
                                                      ex.model.grid)
                                    : load_prepared(f.data, ex.model);
  const auto test = !test_data.empty() ? load_prepared(test_data, ex.model, train.stats)
                    : f.data.empty()   ? prepare_dataset(generate_examples(cfg.data, cfg.data.test_count, true, spec),
                                                         ex.model.grid, train.stats)
                                       : train;
  const auto table = run_ablation(axis, ex, train, test);
  const std::string json = ablation_json(table);
  if (!f.out.empty()) io::write_file_atomic(f.out, json + "\n");
  out << ablation_text(table) << json << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-visual masked autoencoder: data generation, training, evaluation and checks", "avmask"};
  app.require_subcommand(1);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic audio-visual dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--classes", gen.classes, "Number of motion classes (1-8)");
  gen_cmd->add_option("--count", gen.count, "Number of examples");
  gen_cmd->add_option("--seed", gen.seed, "Seed (overrides the config file and AVMASK_SEED)");
  gen_cmd->add_option("--degrade", gen.degrade, "Degrade video: blur kernel,downsample factor (e.g. 3,2)");
  gen_cmd->add_option("--config", gen.config, "Run configuration file; [data] and the [model] grid apply");

  CommonFlags pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "Masked reconstruction pretraining");
  add_common(pre_cmd, pre, true);
  pre_cmd->add_option("--out", pre.out, "Checkpoint to write");

  CommonFlags ft;
  std::string pretrained;
  bool freeze = false;
  auto* ft_cmd = app.add_subcommand("finetune", "Fine-tune a classifier head");
  add_common(ft_cmd, ft, true);
  ft_cmd->add_option("--out", ft.out, "Checkpoint to write");
  ft_cmd->add_option("--pretrained", pretrained, "Pretrained checkpoint to initialise from");
  ft_cmd->add_flag("--freeze-encoder", freeze, "Train only the classifier head");

  CommonFlags ev;
  std::string checkpoint;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint: top1, top5, per-class accuracy, MSE");
  add_common(ev_cmd, ev, false);
  ev_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
  ev_cmd->add_option("--out", ev.out, "Write the JSON report here as well");

  std::string scale = "micro";
  std::size_t seeds = 5;
  bool inject_flip = false;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of every op and the micro model");
  gc_cmd->add_option("--scale", scale, "Model scale for the full-model check")->capture_default_str();
  gc_cmd->add_option("--seeds", seeds, "Random input draws per op")->capture_default_str();
  gc_cmd->add_flag("--inject-sign-flip", inject_flip, "Test hook: negate analytic gradients (must fail)");

  CommonFlags ab;
  std::string axis, test_data;
  auto* ab_cmd = app.add_subcommand("ablate", "Run an ablation axis and print the comparison table");
  add_common(ab_cmd, ab, true);
  ab_cmd->add_option("--axis", axis, "mask_ratio, cross_attention or modalities");
  ab_cmd->add_option("--out", ab.out, "Write the JSON table here");
  ab_cmd->add_option("--test-data", test_data, "Held-out dataset directory (default: generated from [data])");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "avmask: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (pre_cmd->parsed()) return cmd_pretrain(pre, out);
    if (ft_cmd->parsed()) return cmd_finetune(ft, pretrained, freeze, out);
    if (ev_cmd->parsed()) return cmd_eval(ev, checkpoint, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(scale, seeds, inject_flip, out);
    if (ab_cmd->parsed()) {
      if (axis.empty()) throw ValidationFailure("--axis: required");
      return cmd_ablate(ab, axis, test_data, out);
    }
  } catch (const ValidationFailure& e) {
    err << "avmask: invalid configuration: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "avmask: " << error_kind(e) << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace avmask::cli
