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

#include "embedding_dump.hpp"

#include <algorithm>
#include <set>

#include "binary_io.hpp"
#include "error.hpp"

namespace isoprobe::isotropy {

void EmbeddingDump::Add(EmbeddingRecord record) {
  Require(record.vector.size() == dim_,
          "embedding dump: vector has dimension " + std::to_string(record.vector.size()) +
              ", expected " + std::to_string(dim_));
  Require(record.layer < std::max<std::uint32_t>(layer_count_, 1) + 1,
          "embedding dump: layer id out of range");
  records_.push_back(std::move(record));
}

std::vector<std::uint32_t> EmbeddingDump::Layers() const {
  std::set<std::uint32_t> layers;
  for (const auto& r : records_) layers.insert(r.layer);
  return {layers.begin(), layers.end()};
}

std::vector<std::size_t> EmbeddingDump::LayerRecords(std::uint32_t layer) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].layer == layer) out.push_back(i);
  return out;
}

std::map<std::uint32_t, std::vector<std::size_t>> EmbeddingDump::TokenIndex(
    std::uint32_t layer) const {
  std::map<std::uint32_t, std::vector<std::size_t>> index;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].layer == layer) index[records_[i].token_id].push_back(i);
  return index;
}

numerics::Matrix EmbeddingDump::LayerMatrix(std::uint32_t layer) const {
  const auto idx = LayerRecords(layer);
  numerics::Matrix m(idx.size(), dim_);
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(records_[idx[r]].vector.begin(), records_[idx[r]].vector.end(), m.row(r).begin());
  return m;
}

bool operator==(const EmbeddingRecord& a, const EmbeddingRecord& b) {
  return a.layer == b.layer && a.token_id == b.token_id && a.context_id == b.context_id &&
         a.vector == b.vector;
}

bool operator==(const EmbeddingDump& a, const EmbeddingDump& b) {
  return a.dim_ == b.dim_ && a.layer_count_ == b.layer_count_ && a.records_ == b.records_;
}

std::string SerializeDump(const EmbeddingDump& dump) {
  io::ByteWriter w;
  w.Bytes(kDumpMagic);
  w.U32(kDumpVersion);
  w.U32(dump.layer_count());
  w.U32(static_cast<std::uint32_t>(dump.dim()));
  w.U64(dump.size());
  for (const auto& r : dump.records()) {
    w.U32(r.layer);
    w.U32(r.token_id);
    w.U64(r.context_id);
    for (double v : r.vector) w.F64(v);
  }
  return w.release();
}

EmbeddingDump ParseDump(std::string_view bytes) {
  io::ByteReader r(bytes, "embedding dump");
  if (r.Bytes(kDumpMagic.size()) != kDumpMagic)
    Fail(ErrorCode::kInvalidArgument, "embedding dump: bad magic");
  const std::uint32_t version = r.U32();
  if (version != kDumpVersion)
    Fail(ErrorCode::kInvalidArgument,
         "embedding dump: unsupported version " + std::to_string(version));
  const std::uint32_t layers = r.U32();
  const std::uint32_t dim = r.U32();
  const std::uint64_t count = r.U64();
  const std::uint64_t record_bytes = 16 + 8ULL * dim;
  if (count > r.remaining() / record_bytes || count * record_bytes != r.remaining())
    Fail(ErrorCode::kInvalidArgument, "embedding dump: declared record count " +
                                          std::to_string(count) +
                                          " does not match payload size");
  EmbeddingDump dump(dim, layers);
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.layer = r.U32();
    rec.token_id = r.U32();
    rec.context_id = r.U64();
    rec.vector.resize(dim);
    for (auto& v : rec.vector) v = r.F64();
    dump.Add(std::move(rec));
  }
  r.ExpectEnd();
  return dump;
}

}  // namespace isoprobe::isotropy
