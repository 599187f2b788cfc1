// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avmask/training/ablation.hpp"

// Run configuration file: "key = value" lines under [section] headers.
// '#' and ';' start comments. Sections: model, data, pretrain, finetune, eval.
namespace avmask::cli {

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Throws ParameterError on malformed lines (with path and line number).
std::vector<IniEntry> parse_ini(const std::string& text, const std::string& path);

struct Degradation {
  std::size_t blur_kernel = 1;
  std::size_t factor = 1;
};

// "blur,factor", e.g. "3,2".
Degradation parse_degradation(const std::string& text);

struct DataConfig {
  std::size_t classes = 4;
  std::size_t count = 200;
  std::size_t test_count = 100;
  std::uint64_t seed = 0;
  std::optional<Degradation> degrade;
};

struct RunConfig {
  ExperimentConfig experiment;
  DataConfig data;
  // Keys that were set explicitly, as "section.key".
  std::vector<std::string> explicit_keys;

  bool has(const std::string& key) const;
};

// Sets one "section.key" from text. Unknown keys and unparsable values raise
// ParameterError naming the key.
void apply_setting(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value);

// Defaults, then the file's entries in order. The fine-tuning architecture
// switches and seed follow [pretrain] unless [finetune] sets them.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_text(const std::string& text, const std::string& path);

// Validates every section; errors name the offending "section.key".
void validate(const RunConfig& cfg);

// Generated dataset for [data]: example i has class i % classes and seed
// mix_seed(seed, i, salt). The held-out split uses a different salt.
std::vector<LabeledExample> generate_examples(const DataConfig& data, std::size_t count, bool held_out,
                                              const SyntheticSpec& spec);

// Synthetic spec matching a model grid.
SyntheticSpec synthetic_spec_for(const PatchGrid& grid);

}  // namespace avmask::cli
