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

#ifndef ISOPROBE_CORE_EMBEDDING_DUMP_HPP_
#define ISOPROBE_CORE_EMBEDDING_DUMP_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "numerics.hpp"

namespace isoprobe::isotropy {

struct EmbeddingRecord {
  std::uint32_t layer = 0;
  std::uint32_t token_id = 0;
  std::uint64_t context_id = 0;
  std::vector<double> vector;
};

// Contextual embedding instances, grouped per layer and token.
class EmbeddingDump {
 public:
  EmbeddingDump() = default;
  EmbeddingDump(std::size_t dim, std::uint32_t layer_count)
      : dim_(dim), layer_count_(layer_count) {}

  void Add(EmbeddingRecord record);

  std::size_t dim() const noexcept { return dim_; }
  std::uint32_t layer_count() const noexcept { return layer_count_; }
  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
  std::vector<EmbeddingRecord>& mutable_records() noexcept { return records_; }

  // Layer ids that have at least one record, ascending.
  std::vector<std::uint32_t> Layers() const;
  // Indices into records() for `layer`, in insertion order.
  std::vector<std::size_t> LayerRecords(std::uint32_t layer) const;
  // token id → indices into records() for `layer`.
  std::map<std::uint32_t, std::vector<std::size_t>> TokenIndex(std::uint32_t layer) const;
  // Rows are the layer's vectors in LayerRecords() order.
  numerics::Matrix LayerMatrix(std::uint32_t layer) const;

  friend bool operator==(const EmbeddingDump& a, const EmbeddingDump& b);

 private:
  std::size_t dim_ = 0;
  std::uint32_t layer_count_ = 0;
  std::vector<EmbeddingRecord> records_;
};

bool operator==(const EmbeddingRecord& a, const EmbeddingRecord& b);

// Binary container: "ISOEMB1", version u32, layer count u32, D u32, record
// count u64, then per record layer u32, token_id u32, context_id u64 and D
// doubles. Little-endian throughout.
inline constexpr std::string_view kDumpMagic = "ISOEMB1";
inline constexpr std::uint32_t kDumpVersion = 1;

std::string SerializeDump(const EmbeddingDump& dump);
EmbeddingDump ParseDump(std::string_view bytes);

}  // namespace isoprobe::isotropy

#endif  // ISOPROBE_CORE_EMBEDDING_DUMP_HPP_
