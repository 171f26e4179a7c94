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

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "error.hpp"
#include "kernelsynth.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"

using namespace isoprobe::tokenizer;
using isoprobe::RngStream;

TEST_CASE("fit scale") {
  CHECK(FitScale(std::vector<double>{1, -1, 1, -1}) == 1.0);
  CHECK(FitScale(std::vector<double>{0, 0, 0}) == 1.0);
  CHECK(FitScale(std::vector<double>{2, -4}) == 3.0);
  RngStream s(1, 0);
  std::vector<double> x(10000);
  for (double& v : x) v = 2.0 * s.Gaussian();
  const double expect = 2.0 * std::sqrt(2.0 / std::numbers::pi);
  CHECK(std::abs(FitScale(x) - expect) <= 0.03 * expect);
  CHECK_THROWS_AS(FitScale(std::vector<double>{}), isoprobe::Error);
  CHECK_THROWS_AS(FitScale(std::vector<double>{NAN}), isoprobe::Error);
}

TEST_CASE("bin boundaries and clipping") {
  const TokenizerConfig four(4, -2, 2);
  CHECK(TokenizeValue(0.0, four, 1.0) == 2);
  CHECK(TokenizeValue(-2.0, four, 1.0) == 0);
  CHECK(TokenizeValue(2.0, four, 1.0) == 3);
  CHECK(TokenizeValue(-0.5, four, 1.0) == 1);
  CHECK(TokenizeValue(-1e-12, four, 1.0) == 1);
  const TokenizerConfig def;
  CHECK(TokenizeValue(100.0, def, 1.0) == def.vocab_size() - 1);
  CHECK(TokenizeValue(-100.0, def, 1.0) == 0);
  CHECK_THROWS_AS(TokenizerConfig(1, 0, 1), isoprobe::Error);
  CHECK_THROWS_AS(TokenizerConfig(4, 1, 1), isoprobe::Error);
  CHECK_THROWS_AS(Tokenize(std::vector<double>{1.0}, def, 0.0), isoprobe::Error);
}

TEST_CASE("bin centers") {
  const TokenizerConfig two(2, -1, 1);
  CHECK(Detokenize(TokenSequence{{0}, 1.0}, two)[0] == doctest::Approx(-0.5));
  CHECK(Detokenize(TokenSequence{{1}, 3.0}, two)[0] == doctest::Approx(1.5));
}

TEST_CASE("roundtrip error is within half a bin") {
  const TokenizerConfig cfg;
  RngStream s(2, 0);
  const double scale = 1.7;
  for (int i = 0; i < 10000; ++i) {
    const double x = (cfg.lo() + (cfg.hi() - cfg.lo()) * s.Uniform()) * scale;
    const auto seq = Tokenize(std::vector<double>{x}, cfg, scale);
    const double back = Detokenize(seq, cfg)[0];
    CHECK(std::abs(back - x) <= scale * cfg.bin_width() / 2 * (1 + 1e-12));
  }
}

TEST_CASE("detokenize then tokenize is the identity on ids") {
  const TokenizerConfig cfg(64, -3, 5);
  TokenSequence seq{{}, 0.4};
  for (TokenId i = 0; i < 64; ++i) seq.tokens.push_back(i);
  CHECK(Tokenize(Detokenize(seq, cfg), cfg, seq.scale).tokens == seq.tokens);
}

TEST_CASE("monotone and scale equivariant") {
  const TokenizerConfig cfg(128, -4, 4);
  RngStream s(3, 0);
  for (int i = 0; i < 2000; ++i) {
    const double a = 5 * s.Gaussian(), b = 5 * s.Gaussian();
    const double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(TokenizeValue(lo, cfg, 1.3) <= TokenizeValue(hi, cfg, 1.3));
    // Powers of two keep the scaled division exact.
    for (double alpha : {0.25, 2.0, 8.0})
      CHECK(TokenizeValue(alpha * a, cfg, alpha * 1.3) == TokenizeValue(a, cfg, 1.3));
  }
}

TEST_CASE("quantization floor matches the uniform-noise estimate") {
  using namespace isoprobe::kernelsynth;
  const KernelSpec bank[] = {KernelSpec::Periodic(0.1, 1.0)};
  RngStream s(4, 2);
  const auto ts = KernelSynthSample(bank, SynthOptions{1, 2048, true}, s);
  const TokenizerConfig cfg;
  const double scale = FitScale(ts.values);
  const auto back = Detokenize(Tokenize(ts.values, cfg, scale), cfg);
  double err = 0, energy = 0;
  for (std::size_t i = 0; i < back.size(); ++i) {
    err += (back[i] - ts.values[i]) * (back[i] - ts.values[i]);
    energy += ts.values[i] * ts.values[i];
  }
  const double w = scale * cfg.bin_width();
  const double predicted = (w * w / 12.0) / (energy / back.size());
  CHECK(err / energy == doctest::Approx(predicted).epsilon(0.2));
}
