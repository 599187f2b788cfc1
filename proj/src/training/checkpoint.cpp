// SPDX-License-Identifier: Apache-2.0
#include "avmask/training/checkpoint.hpp"

#include <boost/crc.hpp>
#include <set>

#include "avmask/core/errors.hpp"
#include "avmask/io/binary.hpp"

namespace avmask {

namespace {

constexpr std::string_view kMagic = "AVMK";
constexpr const char* kHeadWeight = "param/head.linear.weight";

bool known_namespace(const std::string& name) {
  for (std::string_view prefix : {"param/", "adam_m/", "adam_v/", "config/"}) {
    if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) return true;
  }
  return name == "optim/step";
}

Tensor scalar_of(double v) { return Tensor::from({1}, {static_cast<float>(v)}); }

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.tensor;
  return nullptr;
}

void Checkpoint::add(std::string name, Tensor tensor) { tensors.push_back({std::move(name), std::move(tensor)}); }

std::uint64_t crc64(std::string_view bytes) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (name.size() > 0xffff) throw ParameterError("checkpoint tensor name too long: " + name.substr(0, 64));
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.u64(d);
    for (float v : tensor.data()) w.f32(v);
  }
  const std::uint64_t crc = crc64(w.buffer());
  w.u64(crc);
  return w.buffer();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& path) {
  io::ByteReader r(bytes, path);
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    if (bytes.size() < kMagic.size() && kMagic.substr(0, bytes.size()) == bytes)
      throw TruncatedFileError(path, "file ends inside the header");
    throw BadMagicError(path, "not a checkpoint (magic is not AVMK)");
  }
  r.bytes(kMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionMismatchError(path, "checkpoint version " + std::to_string(version) + ", expected " +
                                         std::to_string(kCheckpointVersion));
  }
  const std::uint32_t count = r.u32();
  Checkpoint ckpt;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    std::string name(r.bytes(len));
    if (!known_namespace(name)) throw UnknownTensorError(path, "unknown tensor name '" + name + "'");
    if (!seen.insert(name).second) throw FormatError(path, "duplicate tensor name '" + name + "'");
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d != 0 && numel > r.remaining() / d) throw TruncatedFileError(path, "tensor '" + name + "' exceeds file");
      numel *= d;
    }
    auto data = r.f32_array(numel);
    ckpt.tensors.push_back({std::move(name), Tensor::from(std::move(shape), std::move(data))});
  }
  const std::size_t body = r.position();
  if (r.remaining() < 8) throw TruncatedFileError(path, "missing checksum");
  const std::uint64_t stored = r.u64();
  if (r.remaining() != 0) throw FormatError(path, std::to_string(r.remaining()) + " trailing bytes");
  if (crc64(bytes.substr(0, body)) != stored) throw ChecksumError(path, "CRC-64 mismatch");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path), path); }

Tensor encode_u64(std::uint64_t v) {
  std::vector<float> limbs(4);
  for (int i = 0; i < 4; ++i) limbs[i] = static_cast<float>((v >> (16 * i)) & 0xffff);
  return Tensor::from({4}, std::move(limbs));
}

std::uint64_t decode_u64(const Tensor& t) {
  if (t.shape() != Shape{4}) throw DimensionError("decode_u64: expected [4], got " + shape_str(t.shape()));
  std::uint64_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const float limb = t[i];
    if (!(limb >= 0.0f && limb <= 65535.0f) || limb != static_cast<float>(static_cast<std::uint32_t>(limb)))
      throw NumericError("decode_u64: invalid limb");
    v |= std::uint64_t(static_cast<std::uint32_t>(limb)) << (16 * i);
  }
  return v;
}

Checkpoint make_checkpoint(const AvMaskModel<float>& model, const AdamWState* optimizer, const TrainConfig* train,
                           const std::vector<std::string>& optimized) {
  Checkpoint ckpt;
  const auto& entries = model.params().entries();
  for (const auto& p : entries) ckpt.add("param/" + p.name, p.tensor.detach());
  if (optimizer != nullptr) {
    std::vector<std::string> names = optimized;
    if (names.empty())
      for (const auto& p : entries) names.push_back(p.name);
    if (names.size() != optimizer->first_moment.size())
      throw DimensionError("make_checkpoint: optimizer state does not match the parameter list");
    for (std::size_t i = 0; i < names.size(); ++i) {
      ckpt.add("adam_m/" + names[i], optimizer->first_moment[i].detach());
      ckpt.add("adam_v/" + names[i], optimizer->second_moment[i].detach());
    }
    ckpt.add("optim/step", encode_u64(optimizer->step));
  }
  if (train != nullptr) {
    ckpt.add("config/steps", encode_u64(train->steps));
    ckpt.add("config/batch_size", encode_u64(train->batch_size));
    ckpt.add("config/lr", scalar_of(train->lr));
    ckpt.add("config/warmup_steps", encode_u64(train->resolved_warmup()));
    ckpt.add("config/weight_decay", scalar_of(train->weight_decay));
    ckpt.add("config/mask_ratio", scalar_of(train->mask_ratio));
    ckpt.add("config/loss_scope", scalar_of(train->loss_scope == LossScope::full ? 0 : 1));
    ckpt.add("config/use_cross_attention", scalar_of(train->use_cross_attention ? 1 : 0));
    ckpt.add("config/modalities", scalar_of(train->modalities == Modalities::audio_visual ? 0 : 1));
    ckpt.add("config/seed", encode_u64(train->seed));
    ckpt.add("config/freeze_encoder", scalar_of(train->freeze_encoder ? 1 : 0));
  }
  return ckpt;
}

void restore_model(AvMaskModel<float>& model, const Checkpoint& ckpt, const std::string& path, bool require_all,
                   AdamWState* optimizer) {
  auto& params = model.params();
  const auto& entries = params.entries();
  auto index_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].name == name) return i;
    throw UnknownTensorError(path, "tensor '" + name + "' has no counterpart in the model");
  };
  auto copy_into = [&](const std::string& name, const Tensor& src, Tensor dst) {
    if (src.shape() != dst.shape()) {
      throw TensorShapeError(path, "tensor '" + name + "' has shape " + shape_str(src.shape()) +
                                       ", model expects " + shape_str(dst.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  };

  std::vector<bool> loaded(entries.size(), false);
  for (const auto& [name, tensor] : ckpt.tensors) {
    for (std::string_view prefix : {"param/", "adam_m/", "adam_v/"}) {
      if (name.compare(0, prefix.size(), prefix) != 0) continue;
      const std::string pname = name.substr(prefix.size());
      const std::size_t i = index_of(pname);
      if (prefix == "param/") {
        copy_into(name, tensor, entries[i].tensor);
        loaded[i] = true;
      } else if (optimizer != nullptr) {
        if (optimizer->first_moment.size() != entries.size())
          throw DimensionError("restore_model: optimizer state does not cover every parameter");
        auto& moments = prefix == "adam_m/" ? optimizer->first_moment : optimizer->second_moment;
        copy_into(name, tensor, moments.at(i));
      }
    }
  }
  if (require_all) {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (!loaded[i]) throw UnknownTensorError(path, "checkpoint lacks tensor 'param/" + entries[i].name + "'");
  }
  if (optimizer != nullptr) {
    if (const Tensor* step = ckpt.find("optim/step")) optimizer->step = decode_u64(*step);
  }
}

void add_cepstral_stats(Checkpoint& ckpt, const CepstralStats& stats) {
  if (stats.empty()) return;
  ckpt.add("config/cepstral_mean", Tensor::from({stats.mean.size()}, stats.mean));
  ckpt.add("config/cepstral_stddev", Tensor::from({stats.stddev.size()}, stats.stddev));
}

CepstralStats cepstral_stats_of(const Checkpoint& ckpt) {
  const Tensor* mean = ckpt.find("config/cepstral_mean");
  const Tensor* sd = ckpt.find("config/cepstral_stddev");
  if (mean == nullptr || sd == nullptr) return {};
  if (mean->shape() != sd->shape() || mean->rank() != 1)
    throw DimensionError("checkpoint cepstral statistics have inconsistent shapes");
  return {{mean->data().begin(), mean->data().end()}, {sd->data().begin(), sd->data().end()}};
}

std::size_t checkpoint_classes(const Checkpoint& ckpt) {
  const Tensor* w = ckpt.find(kHeadWeight);
  return w != nullptr && w->rank() == 2 ? w->dim(1) : 0;
}

std::unique_ptr<AvMaskModel<float>> model_from_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt,
                                                          const std::string& path) {
  auto model = std::make_unique<AvMaskModel<float>>(cfg, 0);
  if (const std::size_t k = checkpoint_classes(ckpt); k > 0) model->add_classifier(k, 0);
  restore_model(*model, ckpt, path, true);
  return model;
}

}  // namespace avmask
