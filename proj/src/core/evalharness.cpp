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

#include "evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "error.hpp"
#include "format.hpp"
#include "parallel.hpp"
#include "theory_checks.hpp"

namespace isoprobe::eval {

double Nmse(std::span<const double> pred, std::span<const double> truth) {
  Require(!truth.empty() && pred.size() == truth.size(),
          "nmse: prediction and truth must have the same non-zero length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = pred[i] - truth[i];
    num += e * e;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) Fail(ErrorCode::kUndefinedMetric, "nmse: truth is identically zero");
  return num / den;
}

std::vector<double> NaiveBaseline(std::span<const double> context, std::size_t horizon) {
  Require(!context.empty(), "naive baseline: empty context");
  return std::vector<double>(horizon, context.back());
}

const char* SweepVariableName(SweepVariable v) {
  return v == SweepVariable::kContextLength ? "context_length" : "noise_sigma";
}

SweepRow EvaluatePoint(const EvalSetup& setup, SweepVariable variable, double value,
                       std::size_t context_length, double noise_sigma,
                       std::size_t dataset_index, std::uint64_t seed) {
  Require(dataset_index < setup.series.size(), "eval: dataset index out of range");
  Require(context_length >= 2, "eval: context length must be >= 2");
  Require(context_length <= setup.context_length,
          "eval: context length exceeds the model's training context");
  Require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "eval: noise sigma must be >= 0");
  Require(setup.horizon >= 1 && setup.eval_windows >= 1, "eval: bad horizon or window count");
  const EvalSeries& es = setup.series[dataset_index];
  const std::vector<double>& s = es.values;
  const std::size_t lo = std::max(setup.eval_begin, setup.context_length);
  Require(s.size() >= setup.horizon && lo + setup.horizon <= s.size(),
          "eval: series '" + es.name + "' too short for the evaluation range");
  const std::size_t hi = s.size() - setup.horizon;

  RngStream base(seed, 0xe7a1'0000ULL + dataset_index);
  RngStream origins = base.Derive(0);
  RngStream noise = base.Derive(1);
  RngStream sampling = base.Derive(2);

  std::vector<double> pred;
  std::vector<double> naive;
  std::vector<double> truth;
  std::vector<std::vector<tokenizer::TokenId>> contexts;
  std::vector<double> draws(setup.context_length);
  for (std::size_t w = 0; w < setup.eval_windows; ++w) {
    const std::size_t origin = lo + origins.UniformIndex(hi - lo + 1);
    // Noise draws cover the longest context so every row consumes the same
    // stream positions.
    for (double& d : draws) d = noise.Gaussian();
    std::vector<double> ctx(s.begin() + static_cast<std::ptrdiff_t>(origin - context_length),
                            s.begin() + static_cast<std::ptrdiff_t>(origin));
    if (noise_sigma > 0.0) {
      const std::size_t offset = setup.context_length - context_length;
      for (std::size_t i = 0; i < ctx.size(); ++i) ctx[i] += noise_sigma * draws[offset + i];
    }
    const double scale = tokenizer::FitScale(ctx);
    tokenizer::TokenSequence tokens = tokenizer::Tokenize(ctx, setup.tokenizer, scale);
    RngStream fs = sampling.Derive(w);
    const model::ForecastResult fc = model::Forecast(setup.params, tokens.tokens, setup.horizon,
                                                     setup.sample_count, fs, setup.tokenizer,
                                                     scale);
    const std::vector<double> nv = NaiveBaseline(ctx, setup.horizon);
    pred.insert(pred.end(), fc.point.begin(), fc.point.end());
    naive.insert(naive.end(), nv.begin(), nv.end());
    truth.insert(truth.end(), s.begin() + static_cast<std::ptrdiff_t>(origin),
                 s.begin() + static_cast<std::ptrdiff_t>(origin + setup.horizon));
    contexts.push_back(std::move(tokens.tokens));
  }

  SweepRow row;
  row.sweep_var = SweepVariableName(variable);
  row.value = value;
  row.dataset = es.name;
  row.seed = seed;
  row.nmse = Nmse(pred, truth);
  row.naive_nmse = Nmse(naive, truth);

  const auto layer = static_cast<std::uint32_t>(setup.params.layers.size());
  const std::uint32_t selected[] = {layer};
  const isotropy::EmbeddingDump dump = model::DumpEmbeddings(setup.params, contexts, selected);
  const numerics::Matrix x = dump.LayerMatrix(layer);
  row.d08 = isotropy::EffectiveDim(x, 0.8).value;
  row.iso_i = theory::IsotropyFromPartition(x).value;
  RngStream analysis(seed, 0xa7a1'0000ULL + dataset_index);
  try {
    const std::size_t k_max = std::min(setup.analysis.k_max, x.rows());
    RngStream cs = analysis.Derive(0);
    const isotropy::ClusterSelection sel = isotropy::SelectClusterCount(
        x, setup.analysis.k_min, k_max, cs, setup.analysis.silhouette_sample);
    RngStream ps = analysis.Derive(1);
    row.zeta_prime = isotropy::AdjustedInterTokenCos(dump, layer, sel.clustering,
                                                     setup.analysis.pair_budget, ps)
                         .value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUndefinedMetric) throw;
    row.zeta_prime = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

std::vector<SweepRow> RunSweep(const EvalSetup& setup, const SweepConfig& cfg) {
  Require(cfg.values.size() >= 2, "sweep: need at least two sweep values");
  Require(cfg.repetitions >= 1, "sweep: repetitions must be >= 1");
  std::vector<std::size_t> datasets;
  if (cfg.datasets.empty()) {
    for (std::size_t i = 0; i < setup.series.size(); ++i) datasets.push_back(i);
  } else {
    for (const auto& name : cfg.datasets) {
      auto it = std::find_if(setup.series.begin(), setup.series.end(),
                             [&](const EvalSeries& s) { return s.name == name; });
      Require(it != setup.series.end(), "sweep: unknown dataset '" + name + "'");
      datasets.push_back(static_cast<std::size_t>(it - setup.series.begin()));
    }
  }
  Require(!datasets.empty(), "sweep: no datasets");
  for (double v : cfg.values) {
    if (cfg.variable == SweepVariable::kContextLength) {
      Require(v >= 2.0 && v == std::floor(v), "sweep: context lengths must be integers >= 2");
    } else {
      Require(v >= 0.0 && std::isfinite(v), "sweep: noise levels must be >= 0");
    }
  }

  const std::size_t per_value = datasets.size() * cfg.repetitions;
  std::vector<SweepRow> rows(cfg.values.size() * per_value);
  ParallelFor(rows.size(), cfg.workers, [&](std::size_t i) {
    const double value = cfg.values[i / per_value];
    const std::size_t d = datasets[(i % per_value) / cfg.repetitions];
    const std::uint64_t seed = cfg.base_seed + i % cfg.repetitions;
    std::size_t length = cfg.context_length == 0 ? setup.context_length : cfg.context_length;
    double sigma = cfg.noise_sigma;
    if (cfg.variable == SweepVariable::kContextLength)
      length = static_cast<std::size_t>(value);
    else
      sigma = value;
    rows[i] = EvaluatePoint(setup, cfg.variable, value, length, sigma, d, seed);
  });
  return rows;
}

std::vector<SweepRow> ContextLengthSweep(const EvalSetup& setup, SweepConfig cfg) {
  cfg.variable = SweepVariable::kContextLength;
  return RunSweep(setup, cfg);
}

std::vector<SweepRow> NoiseSweep(const EvalSetup& setup, SweepConfig cfg) {
  cfg.variable = SweepVariable::kNoiseSigma;
  return RunSweep(setup, cfg);
}

std::vector<DirectionalVerdict> DirectionalChecks(std::span<const SweepRow> rows,
                                                  SweepVariable variable) {
  Require(!rows.empty(), "directional checks: no rows");
  double lo = rows.front().value;
  double hi = lo;
  for (const auto& r : rows) {
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
  }
  Require(lo < hi, "directional checks: need two distinct sweep values");
  std::map<std::pair<std::string, std::uint64_t>, std::pair<const SweepRow*, const SweepRow*>>
      pairs;
  for (const auto& r : rows) {
    auto& slot = pairs[{r.dataset, r.seed}];
    if (r.value == lo) slot.first = &r;
    if (r.value == hi) slot.second = &r;
  }
  auto finish = [](DirectionalVerdict v) {
    v.fraction = v.total == 0 ? 0.0 : static_cast<double>(v.agree) / static_cast<double>(v.total);
    v.passed = v.total > 0 && v.fraction >= v.threshold;
    return v;
  };

  std::vector<DirectionalVerdict> out;
  if (variable == SweepVariable::kNoiseSigma) {
    DirectionalVerdict iso{"noise_increases_anisotropy",
                           "|zeta_prime| at the highest noise level exceeds |zeta_prime| at "
                           "the lowest",
                           0, 0, 0.0, 0.6, false};
    DirectionalVerdict err{"noise_increases_nmse",
                           "NMSE at the highest noise level is at least NMSE at the lowest",
                           0, 0, 0.0, 0.8, false};
    for (const auto& [key, p] : pairs) {
      if (p.first == nullptr || p.second == nullptr) continue;
      ++iso.total;
      ++err.total;
      if (std::abs(p.second->zeta_prime) > std::abs(p.first->zeta_prime)) ++iso.agree;
      if (p.second->nmse >= p.first->nmse) ++err.agree;
    }
    out.push_back(finish(iso));
    out.push_back(finish(err));
  } else {
    DirectionalVerdict v{"anisotropy_tracks_nmse",
                         "the context length with larger |zeta_prime| has NMSE at least that "
                         "of the other length",
                         0, 0, 0.0, 0.6, false};
    for (const auto& [key, p] : pairs) {
      if (p.first == nullptr || p.second == nullptr) continue;
      ++v.total;
      const double a = std::abs(p.first->zeta_prime);
      const double b = std::abs(p.second->zeta_prime);
      if (std::isnan(a) || std::isnan(b) || a == b) continue;
      const SweepRow* more = a > b ? p.first : p.second;
      const SweepRow* less = a > b ? p.second : p.first;
      if (more->nmse >= less->nmse) ++v.agree;
    }
    out.push_back(finish(v));
  }
  return out;
}

std::string SweepCsv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows)
    os << r.sweep_var << ',' << FormatDouble(r.value) << ',' << r.dataset << ',' << r.seed << ','
       << FormatDouble(r.nmse) << ',' << FormatDouble(r.zeta_prime) << ',' << r.d08 << ','
       << FormatDouble(r.iso_i) << '\n';
  return os.str();
}

}  // namespace isoprobe::eval
