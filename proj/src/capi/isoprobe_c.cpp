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

#include "isoprobe/isoprobe.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "attention_model.hpp"
#include "binary_io.hpp"
#include "embedding_dump.hpp"
#include "error.hpp"
#include "evalharness.hpp"
#include "isotropy_metrics.hpp"
#include "kernelsynth.hpp"
#include "manifest.hpp"
#include "pipeline.hpp"
#include "theory_checks.hpp"

struct isoprobe_options {
  isoprobe::pipeline::CommandOptions options;
};

struct isoprobe_series {
  std::vector<double> values;
};

struct isoprobe_model {
  isoprobe::model::ModelParams params;
};

struct isoprobe_embeddings {
  isoprobe::isotropy::EmbeddingDump dump;
};

namespace {

using isoprobe::ErrorCode;

thread_local std::string g_last_error;

isoprobe_status Record(ErrorCode code, const std::string& message) {
  g_last_error = message;
  return static_cast<isoprobe_status>(code);
}

template <typename Fn>
isoprobe_status Guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return ISOPROBE_OK;
  } catch (const isoprobe::Error& e) {
    return Record(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return Record(ErrorCode::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return Record(ErrorCode::kInternal, e.what());
  } catch (...) {
    return Record(ErrorCode::kInternal, "unknown exception");
  }
}

void NotNull(const void* p, const char* what) {
  if (p == nullptr) isoprobe::Fail(ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

}  // namespace

extern "C" {

const char* isoprobe_version(void) { return isoprobe::kToolVersion; }

const char* isoprobe_status_name(isoprobe_status status) {
  return isoprobe::ErrorCodeName(static_cast<ErrorCode>(status));
}

const char* isoprobe_last_error(void) { return g_last_error.c_str(); }

int isoprobe_exit_code(isoprobe_status status) {
  return isoprobe::ExitCodeFor(static_cast<ErrorCode>(status));
}

isoprobe_status isoprobe_options_create(isoprobe_options** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = new isoprobe_options();
  });
}

void isoprobe_options_destroy(isoprobe_options* options) { delete options; }

isoprobe_status isoprobe_options_set_config(isoprobe_options* options, const char* path) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(path, "path");
    options->options.config_path = path;
  });
}

isoprobe_status isoprobe_options_set_seed(isoprobe_options* options, uint64_t seed) {
  return Guard([&] {
    NotNull(options, "options");
    options->options.seed = seed;
  });
}

isoprobe_status isoprobe_options_set_out(isoprobe_options* options, const char* dir) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(dir, "dir");
    options->options.out = std::string(dir);
  });
}

isoprobe_status isoprobe_options_set_workers(isoprobe_options* options, int workers) {
  return Guard([&] {
    NotNull(options, "options");
    isoprobe::Require(workers >= 1, "workers must be at least 1");
    options->options.workers = workers;
  });
}

isoprobe_status isoprobe_options_add_override(isoprobe_options* options, const char* assignment) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(assignment, "assignment");
    options->options.overrides.emplace_back(assignment);
  });
}

isoprobe_status isoprobe_options_set_log(isoprobe_options* options, isoprobe_log_fn fn,
                                         void* user) {
  return Guard([&] {
    NotNull(options, "options");
    if (fn == nullptr) {
      options->options.log = nullptr;
    } else {
      options->options.log = [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
    }
  });
}

size_t isoprobe_command_count(void) { return isoprobe::pipeline::CommandNames().size(); }

const char* isoprobe_command_name(size_t index) {
  const auto& names = isoprobe::pipeline::CommandNames();
  return index < names.size() ? names[index].c_str() : nullptr;
}

isoprobe_status isoprobe_run(const char* command, const isoprobe_options* options) {
  return Guard([&] {
    NotNull(command, "command");
    static const isoprobe::pipeline::CommandOptions kDefaults;
    isoprobe::pipeline::RunCommand(command, options ? options->options : kDefaults);
  });
}

isoprobe_status isoprobe_series_synthesize(const char* dataset, uint64_t seed, size_t length,
                                           int standardize, isoprobe_series** out) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(out, "out");
    const auto all = isoprobe::kernelsynth::DefaultDatasets();
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& d) { return d.name == dataset; });
    isoprobe::Require(it != all.end(), std::string("unknown dataset '") + dataset + "'");
    isoprobe::kernelsynth::SynthOptions opts;
    opts.length = length;
    opts.max_kernels = 1;
    opts.standardize = standardize != 0;
    // Same stream assignment as the synth command.
    isoprobe::RngStream stream(seed, static_cast<std::uint64_t>(it - all.begin()));
    const isoprobe::kernelsynth::KernelSpec bank[] = {it->kernel};
    auto ts = isoprobe::kernelsynth::KernelSynthSample(bank, opts, stream);
    *out = new isoprobe_series{std::move(ts.values)};
  });
}

void isoprobe_series_destroy(isoprobe_series* series) { delete series; }

size_t isoprobe_series_length(const isoprobe_series* series) {
  return series ? series->values.size() : 0;
}

const double* isoprobe_series_data(const isoprobe_series* series) {
  return series ? series->values.data() : nullptr;
}

isoprobe_status isoprobe_model_load(const char* path, isoprobe_model** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    auto params = isoprobe::model::ParseCheckpoint(isoprobe::io::ReadFile(path));
    *out = new isoprobe_model{std::move(params)};
  });
}

void isoprobe_model_destroy(isoprobe_model* model) { delete model; }

isoprobe_status isoprobe_model_get_info(const isoprobe_model* model, isoprobe_model_info* info) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(info, "info");
    const auto& h = model->params.hyper;
    *info = {h.vocab_size, h.embed_dim, h.attn_dim, h.layer_count, model->params.ParameterCount()};
  });
}

isoprobe_status isoprobe_model_predict(const isoprobe_model* model, const uint32_t* tokens,
                                       size_t count, double* probs, size_t probs_len) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(tokens, "tokens");
    NotNull(probs, "probs");
    isoprobe::Require(count >= 1, "need at least one token");
    isoprobe::Require(probs_len == model->params.hyper.vocab_size,
                      "probs_len must equal the vocabulary size");
    const std::vector<isoprobe::tokenizer::TokenId> ids(tokens, tokens + count);
    const auto trace = isoprobe::model::Forward(ids, model->params);
    std::copy(trace.probabilities.begin(), trace.probabilities.end(), probs);
  });
}

isoprobe_status isoprobe_model_isotropy(const isoprobe_model* model, double* value) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(value, "value");
    *value = isoprobe::theory::IsotropyFromPartition(model->params.embed).value;
  });
}

isoprobe_status isoprobe_embeddings_load(const char* path, isoprobe_embeddings** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    auto dump = isoprobe::isotropy::ParseDump(isoprobe::io::ReadFile(path));
    *out = new isoprobe_embeddings{std::move(dump)};
  });
}

void isoprobe_embeddings_destroy(isoprobe_embeddings* dump) { delete dump; }

size_t isoprobe_embeddings_dim(const isoprobe_embeddings* dump) {
  return dump ? dump->dump.dim() : 0;
}

size_t isoprobe_embeddings_size(const isoprobe_embeddings* dump) {
  return dump ? dump->dump.size() : 0;
}

size_t isoprobe_embeddings_layers(const isoprobe_embeddings* dump, uint32_t* layers,
                                  size_t capacity) {
  if (dump == nullptr) return 0;
  const auto ids = dump->dump.Layers();
  if (layers != nullptr) std::copy_n(ids.begin(), std::min(capacity, ids.size()), layers);
  return ids.size();
}

isoprobe_status isoprobe_embeddings_analyze(const isoprobe_embeddings* dump, uint32_t layer,
                                            uint64_t seed, isoprobe_layer_metrics* out) {
  return Guard([&] {
    NotNull(dump, "dump");
    NotNull(out, "out");
    isoprobe::isotropy::EmbeddingDump one(dump->dump.dim(), dump->dump.layer_count());
    for (const auto& r : dump->dump.records())
      if (r.layer == layer) one.Add(r);
    isoprobe::Require(one.size() > 0, "no records for layer " + std::to_string(layer));
    isoprobe::isotropy::AnalyzeOptions opts;
    opts.seed = seed;
    const auto r = isoprobe::isotropy::Analyze(one, opts).at(0);
    *out = {r.layer,           r.records, r.tokens, r.d08, r.d09, r.zeta_cos.value,
            r.cluster_count,   r.mean_silhouette,   r.zeta_prime.value,
            r.isotropy_partition};
  });
}

isoprobe_status isoprobe_effective_dim(const double* data, size_t rows, size_t cols, double eps,
                                       size_t* out) {
  return Guard([&] {
    NotNull(data, "data");
    NotNull(out, "out");
    const isoprobe::numerics::Matrix a(rows, cols, std::vector<double>(data, data + rows * cols));
    *out = isoprobe::isotropy::EffectiveDim(a, eps).value;
  });
}

isoprobe_status isoprobe_nmse(const double* pred, const double* truth, size_t count,
                              double* out) {
  return Guard([&] {
    NotNull(pred, "pred");
    NotNull(truth, "truth");
    NotNull(out, "out");
    *out = isoprobe::eval::Nmse({pred, count}, {truth, count});
  });
}

}  // extern "C"
