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

#ifndef ISOPROBE_CORE_TOKENIZER_HPP_
#define ISOPROBE_CORE_TOKENIZER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace isoprobe::tokenizer {

using TokenId = std::uint32_t;

// Uniform quantization of scaled values x/scale into vocab_size bins on
// [lo, hi]. Bin i covers [edge_i, edge_{i+1}); the top edge belongs to the
// last bin.
class TokenizerConfig {
 public:
  static constexpr std::size_t kDefaultVocabSize = 512;
  static constexpr double kDefaultLo = -15.0;
  static constexpr double kDefaultHi = 15.0;

  TokenizerConfig() : TokenizerConfig(kDefaultVocabSize, kDefaultLo, kDefaultHi) {}
  TokenizerConfig(std::size_t vocab_size, double lo, double hi);

  std::size_t vocab_size() const noexcept { return edges_.size() - 1; }
  double lo() const noexcept { return edges_.front(); }
  double hi() const noexcept { return edges_.back(); }
  double bin_width() const noexcept { return (hi() - lo()) / static_cast<double>(vocab_size()); }
  const std::vector<double>& bin_edges() const noexcept { return edges_; }
  double BinCenter(TokenId id) const;

 private:
  std::vector<double> edges_;
};

struct TokenSequence {
  std::vector<TokenId> tokens;
  double scale = 1.0;
};

// Mean absolute value of the context; 1 when that is zero.
double FitScale(std::span<const double> context);

TokenSequence Tokenize(std::span<const double> series, const TokenizerConfig& cfg,
                       double scale);

TokenId TokenizeValue(double value, const TokenizerConfig& cfg, double scale);

std::vector<double> Detokenize(const TokenSequence& seq, const TokenizerConfig& cfg);

}  // namespace isoprobe::tokenizer

#endif  // ISOPROBE_CORE_TOKENIZER_HPP_
