// SPDX-License-Identifier: Apache-2.0
#include "avmask/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "avmask/core/errors.hpp"
#include "avmask/core/rng.hpp"
#include "avmask/io/binary.hpp"

namespace avmask::cli {

namespace {

constexpr std::uint64_t kTrainSplitSalt = 0x747261696e;  // "train"
constexpr std::uint64_t kTestSplitSalt = 0x74657374;     // "test"

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ParameterError(key + ": expected " + expected + ", got '" + value + "'");
}

template <class N>
N parse_number(const std::string& key, const std::string& value, const char* expected) {
  N out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, expected);
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return parse_number<std::size_t>(key, value, "a non-negative integer");
}

double parse_double(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value, "a number");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "yes" || value == "1" || value == "on") return true;
  if (value == "false" || value == "no" || value == "0" || value == "off") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  if (out.empty()) bad_value(key, value, "a comma-separated list of integers");
  return out;
}

void set_train(TrainConfig& t, const std::string& full, const std::string& key, const std::string& v) {
  if (key == "steps") t.steps = parse_size(full, v);
  else if (key == "batch_size") t.batch_size = parse_size(full, v);
  else if (key == "lr") t.lr = static_cast<float>(parse_double(full, v));
  else if (key == "warmup_steps") t.warmup_steps = parse_size(full, v);
  else if (key == "weight_decay") t.weight_decay = static_cast<float>(parse_double(full, v));
  else if (key == "mask_ratio") t.mask_ratio = parse_double(full, v);
  else if (key == "loss_scope") {
    try {
      t.loss_scope = loss_scope_from_string(v);
    } catch (const ParameterError&) {
      bad_value(full, v, "full or masked_only");
    }
  } else if (key == "use_cross_attention") t.use_cross_attention = parse_bool(full, v);
  else if (key == "modalities") {
    try {
      t.modalities = modalities_from_string(v);
    } catch (const ParameterError&) {
      bad_value(full, v, "AV or V-only");
    }
  } else if (key == "seed") t.seed = parse_number<std::uint64_t>(full, v, "a non-negative integer");
  else if (key == "freeze_encoder") t.freeze_encoder = parse_bool(full, v);
  else throw ParameterError("unknown key '" + full + "'");
}

void set_model(ModelConfig& m, const std::string& full, const std::string& key, const std::string& v) {
  auto& g = m.grid;
  if (key == "preset") {
    if (v == "toy") m = ModelConfig::toy();
    else if (v == "micro") m = ModelConfig::micro();
    else bad_value(full, v, "toy or micro");
  } else if (key == "frames") g.frames = parse_size(full, v);
  else if (key == "patches_per_side") g.patches_per_side = parse_size(full, v);
  else if (key == "temporal_samples") g.temporal_samples = parse_size(full, v);
  else if (key == "frame_height") g.frame_height = parse_size(full, v);
  else if (key == "frame_width") g.frame_width = parse_size(full, v);
  else if (key == "channels") g.channels = parse_size(full, v);
  else if (key == "encoder_depth") m.encoder.depth = parse_size(full, v);
  else if (key == "encoder_dim") m.encoder.dim = parse_size(full, v);
  else if (key == "encoder_heads") m.encoder.heads = parse_size(full, v);
  else if (key == "encoder_mlp_ratio") m.encoder.mlp_ratio = parse_size(full, v);
  else if (key == "audio_channels") m.audio.stage_channels = parse_list(full, v);
  else if (key == "audio_blocks") m.audio.blocks_per_stage = parse_list(full, v);
  else if (key == "audio_dilations") m.audio.dilation_schedule = parse_list(full, v);
  else if (key == "audio_se_reduction") m.audio.se_reduction = parse_size(full, v);
  else if (key == "fusion_heads") m.fusion.heads = parse_size(full, v);
  else if (key == "decoder_depth") m.decoder.depth = parse_size(full, v);
  else if (key == "decoder_dim") m.decoder.dim = parse_size(full, v);
  else if (key == "decoder_heads") m.decoder.heads = parse_size(full, v);
  else if (key == "decoder_mlp_ratio") m.decoder.mlp_ratio = parse_size(full, v);
  else throw ParameterError("unknown key '" + full + "'");
}

void set_data(DataConfig& d, const std::string& full, const std::string& key, const std::string& v) {
  if (key == "classes") d.classes = parse_size(full, v);
  else if (key == "count") d.count = parse_size(full, v);
  else if (key == "test_count") d.test_count = parse_size(full, v);
  else if (key == "seed") d.seed = parse_number<std::uint64_t>(full, v, "a non-negative integer");
  else if (key == "degrade") {
    try {
      d.degrade = parse_degradation(v);
    } catch (const ParameterError&) {
      bad_value(full, v, "blur,factor");
    }
  } else throw ParameterError("unknown key '" + full + "'");
}

void set_eval(EvalOptions& e, const std::string& full, const std::string& key, const std::string& v) {
  if (key == "mask_ratio") e.mask_ratio = parse_double(full, v);
  else if (key == "mask_seed") e.mask_seed = parse_number<std::uint64_t>(full, v, "a non-negative integer");
  else throw ParameterError("unknown key '" + full + "'");
}

void prefixed(const std::string& section, const auto& check) {
  try {
    check();
  } catch (const ParameterError& e) {
    throw ParameterError(section + "." + e.what());
  }
}

}  // namespace

std::vector<IniEntry> parse_ini(const std::string& text, const std::string& path) {
  std::vector<IniEntry> out;
  std::stringstream ss(text);
  std::string raw, section;
  std::size_t line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    const auto cut = raw.find_first_of("#;");
    const std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (s.empty()) continue;
    const std::string where = path + ":" + std::to_string(line) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ParameterError(where + "malformed section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParameterError(where + "expected 'key = value'");
    if (section.empty()) throw ParameterError(where + "key outside any [section]");
    IniEntry e{section, trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)), line};
    if (e.key.empty()) throw ParameterError(where + "empty key");
    out.push_back(std::move(e));
  }
  return out;
}

Degradation parse_degradation(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ParameterError("degrade: expected blur,factor, got '" + text + "'");
  Degradation d;
  d.blur_kernel = parse_size("degrade", trim(std::string_view(text).substr(0, comma)));
  d.factor = parse_size("degrade", trim(std::string_view(text).substr(comma + 1)));
  if (d.blur_kernel < 1 || d.blur_kernel % 2 == 0) throw ParameterError("degrade: blur kernel must be odd and >= 1");
  if (d.factor < 1) throw ParameterError("degrade: factor must be >= 1");
  return d;
}

bool RunConfig::has(const std::string& key) const {
  return std::find(explicit_keys.begin(), explicit_keys.end(), key) != explicit_keys.end();
}

void apply_setting(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  const std::string full = section + "." + key;
  auto& ex = cfg.experiment;
  if (section == "model") set_model(ex.model, full, key, value);
  else if (section == "data") set_data(cfg.data, full, key, value);
  else if (section == "pretrain") set_train(ex.pretrain, full, key, value);
  else if (section == "finetune") set_train(ex.finetune, full, key, value);
  else if (section == "eval") set_eval(ex.eval, full, key, value);
  else throw ParameterError("unknown key '" + full + "' (unknown section [" + section + "])");
  cfg.explicit_keys.push_back(full);
}

RunConfig run_config_from_text(const std::string& text, const std::string& path) {
  RunConfig cfg;
  for (const auto& e : parse_ini(text, path)) {
    try {
      apply_setting(cfg, e.section, e.key, e.value);
    } catch (const ParameterError& err) {
      throw ParameterError(std::string(err.what()) + " (" + path + ":" + std::to_string(e.line) + ")");
    }
  }
  auto& ft = cfg.experiment.finetune;
  const auto& pre = cfg.experiment.pretrain;
  if (!cfg.has("finetune.use_cross_attention")) ft.use_cross_attention = pre.use_cross_attention;
  if (!cfg.has("finetune.modalities")) ft.modalities = pre.modalities;
  if (!cfg.has("finetune.seed")) ft.seed = pre.seed;
  return cfg;
}

RunConfig load_run_config(const std::string& path) { return run_config_from_text(io::read_file(path), path); }

void validate(const RunConfig& cfg) {
  const auto& ex = cfg.experiment;
  prefixed("model", [&] { ex.model.validate(); });
  prefixed("pretrain", [&] { ex.pretrain.validate(); });
  prefixed("finetune", [&] { ex.finetune.validate(); });
  if (!(ex.eval.mask_ratio > 0.0 && ex.eval.mask_ratio < 1.0))
    throw ParameterError("eval.mask_ratio: must lie in (0, 1)");
  const auto& d = cfg.data;
  if (d.classes < 1 || d.classes > kMaxSyntheticClasses)
    throw ParameterError("data.classes: must lie in [1, " + std::to_string(kMaxSyntheticClasses) + "]");
  if (d.count < 1) throw ParameterError("data.count: must be >= 1");
  if (d.test_count < 1) throw ParameterError("data.test_count: must be >= 1");
  if (ex.model.grid.channels != 3) throw ParameterError("model.channels: synthetic clips are RGB, must be 3");
}

SyntheticSpec synthetic_spec_for(const PatchGrid& grid) {
  SyntheticSpec spec;
  spec.frames = grid.total_frames();
  spec.height = grid.frame_height;
  spec.width = grid.frame_width;
  spec.blob = std::max<std::size_t>(2, grid.frame_height / 4);
  spec.fps = static_cast<double>(spec.frames) / spec.duration;
  return spec;
}

std::vector<LabeledExample> generate_examples(const DataConfig& data, std::size_t count, bool held_out,
                                              const SyntheticSpec& spec) {
  SyntheticSpec s = spec;
  s.num_classes = data.classes;
  std::vector<LabeledExample> out;
  out.reserve(count);
  const std::uint64_t salt = held_out ? kTestSplitSalt : kTrainSplitSalt;
  for (std::size_t i = 0; i < count; ++i) {
    auto ex = generate_synthetic_pair(mix_seed(data.seed, i, salt), i % data.classes, s);
    if (data.degrade) ex.video = degrade_video(ex.video, data.degrade->blur_kernel, data.degrade->factor);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace avmask::cli
