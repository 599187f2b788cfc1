// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "avmask/data/av_data.hpp"

// On-disk dataset: a directory holding manifest.tsv plus one video record
// (<basename>.avt) and one audio record (<basename>.awv) per example.
//
//   video: "AVT1", u32 N_f, H, W, C, then f32 pixels row-major
//   audio: "AWV1", u32 sample_rate, u64 count, then f32 samples
//   manifest.tsv: basename <TAB> class index <TAB> class name
//
// All integers and floats are little-endian.
namespace avmask {

std::string encode_video_record(const VideoClip& v);
std::string encode_audio_record(const AudioWave& a);
// `fps` is not stored in the record and must be supplied.
VideoClip decode_video_record(const std::string& bytes, const std::string& path, double fps);
AudioWave decode_audio_record(const std::string& bytes, const std::string& path);

void write_video_record(const std::string& path, const VideoClip& v);
void write_audio_record(const std::string& path, const AudioWave& a);
VideoClip read_video_record(const std::string& path, double fps);
AudioWave read_audio_record(const std::string& path);

struct ManifestEntry {
  std::string basename;
  std::size_t label = 0;
  std::string class_name;
};

std::string example_basename(std::size_t index);  // "clip_00000"

// Creates `dir` if needed. Class names come from the synthetic class table.
void write_dataset(const std::string& dir, const std::vector<LabeledExample>& examples);

std::vector<ManifestEntry> read_manifest(const std::string& dir);

// Video fps is recovered as N_f * sample_rate / sample_count.
// Errors: BadMagicError, TruncatedFileError, ManifestMismatchError (missing
// record, malformed manifest line, or class name that does not match its
// index).
std::vector<LabeledExample> read_dataset(const std::string& dir);

}  // namespace avmask
