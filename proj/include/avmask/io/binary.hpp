// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "avmask/core/errors.hpp"

// Little-endian record encoding shared by the dataset and checkpoint formats.
namespace avmask::io {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  const std::string& buffer() const noexcept { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

// Bounds-checked cursor; running off the end raises TruncatedFileError.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string path) : data_(data), path_(std::move(path)) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }

  // Reads `count` floats; the size check happens before allocating.
  std::vector<float> f32_array(std::uint64_t count) {
    if (count > remaining() / 4) throw TruncatedFileError(path_, "expected " + std::to_string(count) + " floats");
    std::vector<float> out(count);
    for (auto& v : out) v = f32();
    return out;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  const std::string& path() const noexcept { return path_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining())
      throw TruncatedFileError(path_, "unexpected end of file at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view data_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace avmask::io
