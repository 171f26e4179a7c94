/* Copyright 2026 The isoprobe Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ISOPROBE_CORE_BINARY_IO_HPP_
#define ISOPROBE_CORE_BINARY_IO_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "error.hpp"

namespace isoprobe::io {

// Little-endian writer into a byte string, independent of host byte order.
class ByteWriter {
 public:
  void Bytes(std::string_view s) { out_.append(s); }
  void U32(std::uint32_t v) { Le(v, 4); }
  void U64(std::uint64_t v) { Le(v, 8); }
  void F64(double v) { Le(std::bit_cast<std::uint64_t>(v), 8); }

  const std::string& str() const noexcept { return out_; }
  std::string release() { return std::move(out_); }

 private:
  void Le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  std::string_view Bytes(std::size_t n) {
    Need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Le(4)); }
  std::uint64_t U64() { return Le(8); }
  double F64() { return std::bit_cast<double>(Le(8)); }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void ExpectEnd() const {
    if (remaining() != 0)
      Fail(ErrorCode::kInvalidArgument,
           what_ + ": " + std::to_string(remaining()) + " trailing bytes");
  }

 private:
  void Need(std::size_t n) const {
    if (remaining() < n)
      Fail(ErrorCode::kInvalidArgument, what_ + ": truncated payload");
  }
  std::uint64_t Le(int n) {
    Need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::string ReadFile(const std::string& path);
// Writes to `path.tmp` then renames over `path`.
void WriteFileAtomic(const std::string& path, std::string_view contents);

}  // namespace isoprobe::io

#endif  // ISOPROBE_CORE_BINARY_IO_HPP_
