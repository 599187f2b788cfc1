// SPDX-License-Identifier: Apache-2.0
#include "avmask/data/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "avmask/core/errors.hpp"
#include "avmask/io/binary.hpp"

namespace avmask {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kVideoMagic = "AVT1";
constexpr std::string_view kAudioMagic = "AWV1";

void expect_magic(io::ByteReader& in, std::string_view magic) {
  if (in.remaining() < magic.size()) throw TruncatedFileError(in.path(), "file shorter than magic");
  if (in.bytes(magic.size()) != magic) throw BadMagicError(in.path(), "bad magic, expected " + std::string(magic));
}

void expect_end(const io::ByteReader& in) {
  if (in.remaining() != 0)
    throw FormatError(in.path(), std::to_string(in.remaining()) + " trailing bytes after record");
}

}  // namespace

std::string encode_video_record(const VideoClip& v) {
  if (v.frames.rank() != 4) throw DimensionError("video frames must be [N_f x H x W x C]");
  io::ByteWriter out;
  out.bytes(kVideoMagic);
  for (std::size_t a = 0; a < 4; ++a) out.u32(static_cast<std::uint32_t>(v.frames.dim(a)));
  for (float x : v.frames.data()) out.f32(x);
  return out.buffer();
}

std::string encode_audio_record(const AudioWave& a) {
  io::ByteWriter out;
  out.bytes(kAudioMagic);
  out.u32(a.sample_rate);
  out.u64(a.samples.size());
  for (float x : a.samples) out.f32(x);
  return out.buffer();
}

VideoClip decode_video_record(const std::string& bytes, const std::string& path, double fps) {
  io::ByteReader in(bytes, path);
  expect_magic(in, kVideoMagic);
  Shape shape(4);
  for (auto& d : shape) d = in.u32();
  for (auto d : shape)
    if (d == 0) throw FormatError(path, "zero extent in video header");
  auto pixels = in.f32_array(shape_numel(shape));
  expect_end(in);
  return {Tensor::from(std::move(shape), std::move(pixels)), fps};
}

AudioWave decode_audio_record(const std::string& bytes, const std::string& path) {
  io::ByteReader in(bytes, path);
  expect_magic(in, kAudioMagic);
  AudioWave a;
  a.sample_rate = in.u32();
  if (a.sample_rate == 0) throw FormatError(path, "zero sample rate");
  a.samples = in.f32_array(in.u64());
  expect_end(in);
  return a;
}

void write_video_record(const std::string& path, const VideoClip& v) { io::write_file_atomic(path, encode_video_record(v)); }
void write_audio_record(const std::string& path, const AudioWave& a) { io::write_file_atomic(path, encode_audio_record(a)); }
VideoClip read_video_record(const std::string& path, double fps) {
  return decode_video_record(io::read_file(path), path, fps);
}
AudioWave read_audio_record(const std::string& path) { return decode_audio_record(io::read_file(path), path); }

std::string example_basename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%05zu", index);
  return buf;
}

void write_dataset(const std::string& dir, const std::vector<LabeledExample>& examples) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(dir, "cannot create dataset directory");
  std::ostringstream manifest;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const std::string base = example_basename(i);
    write_video_record((fs::path(dir) / (base + ".avt")).string(), ex.video);
    write_audio_record((fs::path(dir) / (base + ".awv")).string(), ex.audio);
    manifest << base << '\t' << ex.label << '\t' << class_name(ex.label) << '\n';
  }
  io::write_file_atomic((fs::path(dir) / "manifest.tsv").string(), manifest.str());
}

std::vector<ManifestEntry> read_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.tsv").string();
  if (!fs::exists(path)) throw IoError(path, "manifest not found");
  std::istringstream in(io::read_file(path));
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      throw ManifestMismatchError(path, "line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    ManifestEntry e;
    e.basename = line.substr(0, t1);
    const std::string label = line.substr(t1 + 1, t2 - t1 - 1);
    e.class_name = line.substr(t2 + 1);
    auto [ptr, err] = std::from_chars(label.data(), label.data() + label.size(), e.label);
    if (err != std::errc{} || ptr != label.data() + label.size() || e.basename.empty())
      throw ManifestMismatchError(path, "line " + std::to_string(line_no) + ": malformed entry");
    if (e.label >= kMaxSyntheticClasses || class_name(e.label) != e.class_name)
      throw ManifestMismatchError(path, "line " + std::to_string(line_no) + ": class name '" + e.class_name +
                                            "' does not match index " + label);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<LabeledExample> read_dataset(const std::string& dir) {
  const auto entries = read_manifest(dir);
  const std::string manifest = (fs::path(dir) / "manifest.tsv").string();
  std::vector<LabeledExample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const std::string vpath = (fs::path(dir) / (e.basename + ".avt")).string();
    const std::string apath = (fs::path(dir) / (e.basename + ".awv")).string();
    for (const auto& p : {vpath, apath})
      if (!fs::exists(p)) throw ManifestMismatchError(manifest, "record listed but missing: " + p);
    LabeledExample ex;
    ex.label = e.label;
    ex.audio = read_audio_record(apath);
    if (ex.audio.samples.empty()) throw ManifestMismatchError(apath, "audio record has no samples");
    const double duration = ex.audio.duration();
    ex.video = read_video_record(vpath, 0.0);
    ex.video.fps = static_cast<double>(ex.video.num_frames()) / duration;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace avmask
