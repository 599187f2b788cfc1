// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "avmask/core/optim.hpp"
#include "avmask/core/tensor.hpp"
#include "avmask/model/av_model.hpp"
#include "avmask/training/prepare.hpp"
#include "avmask/training/train_config.hpp"

// Checkpoint file, little-endian:
//   "AVMK", u32 version (1), u32 tensor count,
//   per tensor: u16 name length, UTF-8 name, u8 rank, u64 dims[rank], f32 data
//   u64 CRC-64/XZ of every preceding byte
//
// Tensor names are namespaced: "param/<name>", "adam_m/<name>", "adam_v/<name>",
// "optim/step", "config/<field>". Integers that may exceed 2^24 are stored as
// four 16-bit limbs, least significant first.
namespace avmask {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
  void add(std::string name, Tensor tensor);
};

std::uint64_t crc64(std::string_view bytes);

std::string encode_checkpoint(const Checkpoint& ckpt);
// Errors: BadMagicError, VersionMismatchError, TruncatedFileError,
// ChecksumError, UnknownTensorError (name outside the known namespaces) and
// FormatError for anything else malformed.
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& path);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Tensor encode_u64(std::uint64_t v);
std::uint64_t decode_u64(const Tensor& t);

// Parameters, optional optimizer state and optional config echo. The
// optimizer moments belong to the parameters named in `optimized`, in order;
// an empty list means every parameter.
Checkpoint make_checkpoint(const AvMaskModel<float>& model, const AdamWState* optimizer = nullptr,
                           const TrainConfig* train = nullptr, const std::vector<std::string>& optimized = {});

// Copies "param/*" tensors into the model. Unknown parameter names raise
// UnknownTensorError, extent mismatches raise TensorShapeError naming the
// tensor. With `require_all`, model parameters missing from the checkpoint
// raise UnknownTensorError as well. Optimizer state covering every parameter
// is restored when given.
void restore_model(AvMaskModel<float>& model, const Checkpoint& ckpt, const std::string& path,
                   bool require_all = true, AdamWState* optimizer = nullptr);

// Builds the model for `cfg`, adds a classifier when the checkpoint has one,
// then restores every parameter.
std::unique_ptr<AvMaskModel<float>> model_from_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt,
                                                          const std::string& path);

// Stored as "config/cepstral_mean" and "config/cepstral_stddev".
void add_cepstral_stats(Checkpoint& ckpt, const CepstralStats& stats);
// Empty when the checkpoint carries none.
CepstralStats cepstral_stats_of(const Checkpoint& ckpt);

// Number of classes of a checkpointed classifier head, 0 when absent.
std::size_t checkpoint_classes(const Checkpoint& ckpt);

}  // namespace avmask
