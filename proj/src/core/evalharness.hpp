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

#ifndef ISOPROBE_CORE_EVALHARNESS_HPP_
#define ISOPROBE_CORE_EVALHARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attention_model.hpp"
#include "isotropy_metrics.hpp"
#include "tokenizer.hpp"

namespace isoprobe::eval {

// Σ(pred - truth)² / Σ truth².
double Nmse(std::span<const double> pred, std::span<const double> truth);

// The last context value repeated `horizon` times.
std::vector<double> NaiveBaseline(std::span<const double> context, std::size_t horizon);

enum class SweepVariable { kContextLength, kNoiseSigma };

const char* SweepVariableName(SweepVariable v);

struct EvalSeries {
  std::string name;
  std::vector<double> values;
};

// Everything a sweep row depends on besides (value, dataset, seed).
struct EvalSetup {
  model::ModelParams params;
  tokenizer::TokenizerConfig tokenizer;
  std::vector<EvalSeries> series;
  std::size_t context_length = 16;  // T at training time, the longest usable context
  std::size_t horizon = 4;
  std::size_t eval_begin = 0;       // forecast origins are drawn from [eval_begin, len - L]
  std::size_t eval_windows = 32;    // forecast origins per row
  std::size_t sample_count = model::kDefaultSampleCount;
  isotropy::AnalyzeOptions analysis;  // seed and workers are overridden per row
};

struct SweepConfig {
  SweepVariable variable = SweepVariable::kNoiseSigma;
  std::vector<double> values;
  std::vector<std::string> datasets;  // empty means every series in the setup
  std::size_t repetitions = 20;
  std::uint64_t base_seed = 1;
  int workers = 1;
  // Used by the noise sweep as the fixed context length (0 → setup T), and by
  // the context-length sweep as the fixed noise level.
  std::size_t context_length = 0;
  double noise_sigma = 0.0;
};

struct SweepRow {
  std::string sweep_var;
  double value = 0.0;
  std::string dataset;
  std::uint64_t seed = 0;
  double nmse = 0.0;
  double naive_nmse = 0.0;
  double zeta_prime = 0.0;  // NaN when undefined for this row
  std::size_t d08 = 0;
  double iso_i = 0.0;
};

// One row for a given (value, dataset, seed). Forecast origins, input noise
// and forecast sampling use streams that depend only on (seed, dataset), so
// rows for different sweep values are paired. Inputs are perturbed before
// tokenization; the truth is never perturbed.
SweepRow EvaluatePoint(const EvalSetup& setup, SweepVariable variable, double value,
                       std::size_t context_length, double noise_sigma,
                       std::size_t dataset_index, std::uint64_t seed);

// Rows in (value, dataset, seed) order; seeds are base_seed + r.
std::vector<SweepRow> RunSweep(const EvalSetup& setup, const SweepConfig& cfg);
std::vector<SweepRow> ContextLengthSweep(const EvalSetup& setup, SweepConfig cfg);
std::vector<SweepRow> NoiseSweep(const EvalSetup& setup, SweepConfig cfg);

struct DirectionalVerdict {
  std::string name;
  std::string description;
  std::size_t agree = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

// Compares the smallest and largest sweep value per (dataset, seed). Pairs
// with an undefined ζ′ count as disagreeing.
std::vector<DirectionalVerdict> DirectionalChecks(std::span<const SweepRow> rows,
                                                  SweepVariable variable);

inline constexpr char kSweepCsvHeader[] = "sweep_var,value,dataset,seed,nmse,zeta_prime,d08,iso_I";

std::string SweepCsv(std::span<const SweepRow> rows);

}  // namespace isoprobe::eval

#endif  // ISOPROBE_CORE_EVALHARNESS_HPP_
