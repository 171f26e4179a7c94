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

#include "tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace isoprobe::tokenizer {

TokenizerConfig::TokenizerConfig(std::size_t vocab_size, double lo, double hi) {
  Require(vocab_size >= 2, "tokenizer: vocab_size must be >= 2");
  Require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
          "tokenizer: clip range must be finite with lo < hi");
  edges_.resize(vocab_size + 1);
  const double width = (hi - lo) / static_cast<double>(vocab_size);
  for (std::size_t i = 0; i <= vocab_size; ++i)
    edges_[i] = lo + width * static_cast<double>(i);
  edges_.back() = hi;
  for (std::size_t i = 1; i < edges_.size(); ++i)
    Require(edges_[i] > edges_[i - 1], "tokenizer: bin edges not strictly increasing");
}

double TokenizerConfig::BinCenter(TokenId id) const {
  Require(id < vocab_size(), "detokenize: token id " + std::to_string(id) +
                                 " >= vocab size " + std::to_string(vocab_size()));
  return 0.5 * (edges_[id] + edges_[id + 1]);
}

double FitScale(std::span<const double> context) {
  Require(!context.empty(), "fit_scale: empty context");
  double s = 0.0;
  for (std::size_t i = 0; i < context.size(); ++i) {
    Require(std::isfinite(context[i]),
            "fit_scale: non-finite value at index " + std::to_string(i));
    s += std::abs(context[i]);
  }
  s /= static_cast<double>(context.size());
  return s > 0.0 ? s : 1.0;
}

TokenId TokenizeValue(double value, const TokenizerConfig& cfg, double scale) {
  const double y = std::clamp(value / scale, cfg.lo(), cfg.hi());
  const auto& edges = cfg.bin_edges();
  // First edge strictly above y, minus one, is the containing bin.
  const auto it = std::upper_bound(edges.begin(), edges.end(), y);
  const auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
  return static_cast<TokenId>(std::min(bin, cfg.vocab_size() - 1));
}

TokenSequence Tokenize(std::span<const double> series, const TokenizerConfig& cfg,
                       double scale) {
  Require(std::isfinite(scale) && scale > 0.0, "tokenize: scale must be positive");
  TokenSequence out;
  out.scale = scale;
  out.tokens.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    Require(std::isfinite(series[i]),
            "tokenize: non-finite value at index " + std::to_string(i));
    out.tokens.push_back(TokenizeValue(series[i], cfg, scale));
  }
  return out;
}

std::vector<double> Detokenize(const TokenSequence& seq, const TokenizerConfig& cfg) {
  std::vector<double> out;
  out.reserve(seq.tokens.size());
  for (TokenId id : seq.tokens) out.push_back(cfg.BinCenter(id) * seq.scale);
  return out;
}

}  // namespace isoprobe::tokenizer
