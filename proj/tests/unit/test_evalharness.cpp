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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "attention_model.hpp"
#include "doctest.h"
#include "error.hpp"
#include "evalharness.hpp"
#include "kernelsynth.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"

using namespace isoprobe;
using namespace isoprobe::eval;

namespace {

std::vector<double> SeasonalSeries(std::uint64_t seed, std::size_t length) {
  const kernelsynth::KernelSpec bank[] = {kernelsynth::KernelSpec::Periodic(0.1, 1.0)};
  RngStream s(seed, 0);
  return kernelsynth::KernelSynthSample(bank, {1, length, true}, s).values;
}

// A small model trained briefly on two seasonal series, shared by the sweep tests.
const EvalSetup& SmallSetup() {
  static const EvalSetup setup = [] {
    EvalSetup e;
    e.tokenizer = tokenizer::TokenizerConfig(64, -15.0, 15.0);
    e.context_length = 16;
    e.horizon = 4;
    e.eval_begin = 192;
    e.eval_windows = 6;
    e.sample_count = 5;
    e.analysis.k_max = 4;
    e.analysis.silhouette_sample = 100;
    e.analysis.pair_budget = 500;
    e.series = {{"a", SeasonalSeries(1, 256)}, {"b", SeasonalSeries(2, 256)}};
    std::vector<model::Window> windows;
    for (const auto& s : e.series) {
      const std::span<const double> head(s.values.data(), 192);
      auto w = model::MakeWindows(head, e.tokenizer, 16, 4, 4);
      windows.insert(windows.end(), w.begin(), w.end());
    }
    model::Hyper h;
    h.vocab_size = 64;
    h.embed_dim = 8;
    h.attn_dim = 4;
    h.layer_count = 2;
    model::TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.steps = 60;
    cfg.batch_size = 8;
    cfg.seed = 3;
    e.params = model::Train(h, windows, cfg).params;
    return e;
  }();
  return setup;
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("nmse examples") {
  const std::vector<double> truth = {1.0, -2.0, 3.0, 0.5};
  CHECK(Nmse(truth, truth) == 0.0);
  CHECK(Nmse(std::vector<double>(4, 0.0), truth) == doctest::Approx(1.0));
  const double eps = 0.01;
  std::vector<double> shifted = truth;
  double energy = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    shifted[i] += eps;
    energy += truth[i] * truth[i];
  }
  CHECK(Nmse(shifted, truth) == doctest::Approx(truth.size() * eps * eps / energy).epsilon(1e-12));
}

TEST_CASE("nmse is invariant to a common rescale") {
  RngStream s(2, 0);
  std::vector<double> p(50), t(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p[i] = s.Gaussian();
    t[i] = s.Gaussian();
  }
  const double base = Nmse(p, t);
  for (double alpha : {-3.0, 1e-3, 7.5}) {
    std::vector<double> ap(p), at(t);
    for (double& v : ap) v *= alpha;
    for (double& v : at) v *= alpha;
    CHECK(Nmse(ap, at) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("nmse input errors") {
  const std::vector<double> zero(3, 0.0), one(3, 1.0), two(2, 1.0);
  try {
    Nmse(one, zero);
    FAIL("expected an undefined metric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUndefinedMetric);
  }
  CHECK_THROWS_AS(Nmse(two, one), Error);
  CHECK_THROWS_AS(Nmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("naive baseline") {
  CHECK(NaiveBaseline(std::vector<double>{1, 2, 3}, 2) == std::vector<double>{3, 3});
  const std::vector<double> flat(10, 4.2);
  CHECK(Nmse(NaiveBaseline(flat, 5), std::vector<double>(5, 4.2)) == 0.0);
  CHECK_THROWS_AS(NaiveBaseline(std::vector<double>{}, 2), Error);
}

TEST_CASE("shuffled forecasts give twice the variance ratio") {
  // For p an independent reshuffle of t: E(p - t)^2 = 2 var, so NMSE -> 2 var / E t^2.
  auto values = SeasonalSeries(5, 4096);
  for (double& v : values) v += 0.7;
  RngStream s(5, 1);
  for (std::size_t len : {1024u, 4096u}) {
    std::vector<double> t(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(len));
    std::vector<double> p = t;
    for (std::size_t i = p.size() - 1; i > 0; --i) std::swap(p[i], p[s.UniformIndex(i + 1)]);
    const double m = Mean(t);
    double var = 0, sq = 0;
    for (double v : t) {
      var += (v - m) * (v - m);
      sq += v * v;
    }
    CHECK(Nmse(p, t) == doctest::Approx(2 * var / sq).epsilon(0.1));
  }
}

TEST_CASE("input noise does not lower the quantization floor") {
  const auto x = SeasonalSeries(6, 512);
  const tokenizer::TokenizerConfig cfg(64, -15.0, 15.0);
  auto floor_nmse = [&](const std::vector<double>& input) {
    const double scale = tokenizer::FitScale(input);
    return Nmse(tokenizer::Detokenize(tokenizer::Tokenize(input, cfg, scale), cfg), x);
  };
  const double clean = floor_nmse(x);
  RngStream s(6, 1);
  for (double sigma : {0.05, 0.2}) {
    double total = 0;
    for (int r = 0; r < 30; ++r) total += floor_nmse(kernelsynth::AddNoise(x, sigma, s));
    CHECK(total / 30 >= clean);
  }
}

TEST_CASE("zero noise row equals the noiseless evaluation") {
  const EvalSetup& e = SmallSetup();
  SweepConfig cfg;
  cfg.values = {0.0, 0.05};
  cfg.repetitions = 2;
  cfg.base_seed = 11;
  const auto rows = NoiseSweep(e, cfg);
  REQUIRE(rows.size() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& r = rows[i];
    const auto ref = EvaluatePoint(e, SweepVariable::kContextLength, 16, 16, 0.0, i / 2, r.seed);
    CHECK(r.nmse == ref.nmse);
    CHECK(r.naive_nmse == ref.naive_nmse);
    CHECK(r.d08 == ref.d08);
    CHECK(r.iso_i == ref.iso_i);
    CHECK(std::isnan(r.zeta_prime) == std::isnan(ref.zeta_prime));
    if (!std::isnan(r.zeta_prime)) CHECK(r.zeta_prime == ref.zeta_prime);
  }
}

TEST_CASE("sweep rows are ordered, seeded and reproducible") {
  const EvalSetup& e = SmallSetup();
  SweepConfig cfg;
  cfg.values = {16, 8};
  cfg.repetitions = 2;
  cfg.base_seed = 40;
  const auto rows = ContextLengthSweep(e, cfg);
  REQUIRE(rows.size() == 8);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].sweep_var == "context_length");
    CHECK(rows[i].value == cfg.values[i / 4]);
    CHECK(rows[i].dataset == (i % 4 < 2 ? "a" : "b"));
    CHECK(rows[i].seed == 40 + i % 2);
    CHECK(rows[i].nmse >= 0.0);
    CHECK(rows[i].naive_nmse >= 0.0);
    CHECK(rows[i].d08 >= 1);
  }
  cfg.workers = 3;
  CHECK(SweepCsv(ContextLengthSweep(e, cfg)) == SweepCsv(rows));
  const std::string csv = SweepCsv(rows);
  CHECK(csv.rfind(std::string(kSweepCsvHeader) + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
}

TEST_CASE("sweep argument checks") {
  const EvalSetup& e = SmallSetup();
  SweepConfig cfg;
  cfg.values = {16, 1};
  cfg.repetitions = 1;
  CHECK_THROWS_AS(ContextLengthSweep(e, cfg), Error);
  cfg.values = {16, 32};
  CHECK_THROWS_AS(ContextLengthSweep(e, cfg), Error);
  cfg.values = {0.0, -0.1};
  CHECK_THROWS_AS(NoiseSweep(e, cfg), Error);
  cfg.values = {0.0};
  CHECK_THROWS_AS(NoiseSweep(e, cfg), Error);
  cfg.values = {0.0, 0.1};
  cfg.datasets = {"missing"};
  CHECK_THROWS_AS(NoiseSweep(e, cfg), Error);
}

TEST_CASE("directional verdict counting") {
  auto row = [](double value, std::uint64_t seed, double nmse, double zeta) {
    SweepRow r;
    r.value = value;
    r.dataset = "d";
    r.seed = seed;
    r.nmse = nmse;
    r.zeta_prime = zeta;
    return r;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<SweepRow> noise = {
      row(0.0, 1, 1.0, 0.1), row(0.0, 2, 1.0, 0.1), row(0.0, 3, 1.0, 0.1), row(0.0, 4, 1.0, 0.1),
      row(0.05, 1, 2.0, 0.2), row(0.05, 2, 2.0, -0.3), row(0.05, 3, 0.5, 0.05),
      row(0.05, 4, 1.0, nan)};
  const auto v = DirectionalChecks(noise, SweepVariable::kNoiseSigma);
  REQUIRE(v.size() == 2);
  CHECK(v[0].name == "noise_increases_anisotropy");
  CHECK(v[0].agree == 2);
  CHECK(v[0].total == 4);
  CHECK_FALSE(v[0].passed);
  CHECK(v[1].agree == 3);
  CHECK(v[1].fraction == doctest::Approx(0.75));
  CHECK_FALSE(v[1].passed);

  const std::vector<SweepRow> lengths = {row(8, 1, 2.0, 0.3), row(16, 1, 1.0, 0.1),
                                         row(8, 2, 1.0, 0.1), row(16, 2, 3.0, -0.4),
                                         row(8, 3, 1.0, 0.5), row(16, 3, 3.0, 0.1)};
  const auto c = DirectionalChecks(lengths, SweepVariable::kContextLength);
  REQUIRE(c.size() == 1);
  CHECK(c[0].agree == 2);
  CHECK(c[0].total == 3);
  CHECK(c[0].passed);
}
