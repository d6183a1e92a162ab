// Copyright 2026 The bcpnn-higgs Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian binary writer/reader with a running CRC-32. Shared by the
// raw cache, encoded cache and model files.

#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "bcpnn/error.hpp"

namespace bcpnn::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path.string());
  }

  void bytes(const void* data, std::size_t n) {
    if (n == 0) return;  // crc32_z(crc, nullptr, 0) would reset the running CRC
    crc_ = crc32_z(crc_, static_cast<const Bytef*>(data), n);
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void value(T v) {
    bytes(&v, sizeof(T));
  }

  template <typename T>
  void array(std::span<const T> values) {
    bytes(values.data(), values.size_bytes());
  }

  void string(std::string_view s) {
    value<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }

  void magic(std::string_view m) { bytes(m.data(), m.size()); }

  // Appends the CRC of everything written so far and flushes.
  void finish() {
    const std::uint32_t crc = static_cast<std::uint32_t>(crc_);
    out_.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  uLong crc_ = crc32_z(0L, Z_NULL, 0);
};

// Reads the whole file, verifies the trailing CRC, then hands out fields.
// Any short read is reported as a CacheError rather than returning garbage.
class BinaryReader {
 public:
  BinaryReader(const std::filesystem::path& path, std::string_view magic) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    data_.resize(size);
    in.read(reinterpret_cast<char*>(data_.data()), static_cast<std::streamsize>(size));
    if (!in) throw IoError("read failed: " + path.string());

    if (size < magic.size() + sizeof(std::uint32_t) ||
        std::memcmp(data_.data(), magic.data(), magic.size()) != 0) {
      throw CacheError(path.string() + ": not a " + std::string(magic) + " file");
    }
    const std::size_t body = size - sizeof(std::uint32_t);
    std::uint32_t stored = 0;
    std::memcpy(&stored, data_.data() + body, sizeof(stored));
    const auto actual = static_cast<std::uint32_t>(crc32_z(crc32_z(0L, Z_NULL, 0), data_.data(), body));
    if (stored != actual) throw CacheError(path.string() + ": checksum mismatch (truncated or corrupt)");
    end_ = body;
    pos_ = magic.size();
  }

  void bytes(void* out, std::size_t n) {
    if (n > end_ - pos_) throw CacheError(path_.string() + ": unexpected end of data");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T value() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }

  template <typename T>
  void array(std::span<T> out) {
    bytes(out.data(), out.size_bytes());
  }

  std::string string() {
    const auto n = value<std::uint64_t>();
    if (n > end_ - pos_) throw CacheError(path_.string() + ": unexpected end of data");
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void expect_version(std::uint32_t expected) {
    const auto v = value<std::uint32_t>();
    if (v != expected) {
      throw CacheError(path_.string() + ": format version " + std::to_string(v) + ", expected " +
                       std::to_string(expected));
    }
  }

  // Guards allocations sized from header fields.
  void require_remaining(std::uint64_t n) const {
    if (n > end_ - pos_) throw CacheError(path_.string() + ": header claims more data than present");
  }

  void expect_end() const {
    if (pos_ != end_) throw CacheError(path_.string() + ": trailing bytes");
  }

 private:
  std::filesystem::path path_;
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace bcpnn::detail
