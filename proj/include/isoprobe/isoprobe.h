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

/* C interface to the isoprobe library. All functions return an
 * isoprobe_status; on failure isoprobe_last_error() holds a message for the
 * calling thread. Handles are opaque and released with their _destroy call. */

#ifndef ISOPROBE_ISOPROBE_H_
#define ISOPROBE_ISOPROBE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ISOPROBE_API __declspec(dllexport)
#else
#define ISOPROBE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum isoprobe_status {
  ISOPROBE_OK = 0,
  ISOPROBE_INVALID_ARGUMENT = 1,
  ISOPROBE_NUMERIC_FAILURE = 2,
  ISOPROBE_NOT_PSD = 3,
  ISOPROBE_GENERATION_FAILURE = 4,
  ISOPROBE_TRAINING_FAILURE = 5,
  ISOPROBE_UNDEFINED_METRIC = 6,
  ISOPROBE_RANK_DEFICIENT = 7,
  ISOPROBE_CONFIG_ERROR = 8,
  ISOPROBE_MISSING_INPUT = 9,
  ISOPROBE_STALE_ARTIFACT = 10,
  ISOPROBE_CHECK_FAILED = 11,
  ISOPROBE_MERGE_REFUSED = 12,
  ISOPROBE_IO_ERROR = 13,
  ISOPROBE_INTERNAL = 14
} isoprobe_status;

ISOPROBE_API const char* isoprobe_version(void);
ISOPROBE_API const char* isoprobe_status_name(isoprobe_status status);
/* Message of the last failed call on this thread; "" if none. */
ISOPROBE_API const char* isoprobe_last_error(void);
/* Process exit code: 0 ok, 2 config or argument error, 3 missing, stale or
 * unreadable input, 4 check failure, 5 numeric failure, 1 anything else. */
ISOPROBE_API int isoprobe_exit_code(isoprobe_status status);

/* ------------------------------------------------------------ pipeline */

typedef void (*isoprobe_log_fn)(const char* message, void* user);
typedef struct isoprobe_options isoprobe_options;

ISOPROBE_API isoprobe_status isoprobe_options_create(isoprobe_options** out);
ISOPROBE_API void isoprobe_options_destroy(isoprobe_options* options);
ISOPROBE_API isoprobe_status isoprobe_options_set_config(isoprobe_options* options,
                                                         const char* path);
ISOPROBE_API isoprobe_status isoprobe_options_set_seed(isoprobe_options* options, uint64_t seed);
ISOPROBE_API isoprobe_status isoprobe_options_set_out(isoprobe_options* options,
                                                      const char* dir);
ISOPROBE_API isoprobe_status isoprobe_options_set_workers(isoprobe_options* options,
                                                          int workers);
/* "section.key=value"; applied after the config file, before flags. */
ISOPROBE_API isoprobe_status isoprobe_options_add_override(isoprobe_options* options,
                                                           const char* assignment);
ISOPROBE_API isoprobe_status isoprobe_options_set_log(isoprobe_options* options,
                                                      isoprobe_log_fn fn, void* user);

/* Number of pipeline commands and their names, in pipeline order. */
ISOPROBE_API size_t isoprobe_command_count(void);
ISOPROBE_API const char* isoprobe_command_name(size_t index);
/* Runs synth, train, embed, analyze, verify, eval or report. */
ISOPROBE_API isoprobe_status isoprobe_run(const char* command, const isoprobe_options* options);

/* ------------------------------------------------------------ series */

typedef struct isoprobe_series isoprobe_series;

/* Draws one of the built-in synthetic datasets by name. */
ISOPROBE_API isoprobe_status isoprobe_series_synthesize(const char* dataset, uint64_t seed,
                                                        size_t length, int standardize,
                                                        isoprobe_series** out);
ISOPROBE_API void isoprobe_series_destroy(isoprobe_series* series);
ISOPROBE_API size_t isoprobe_series_length(const isoprobe_series* series);
ISOPROBE_API const double* isoprobe_series_data(const isoprobe_series* series);

/* ------------------------------------------------------------ model */

typedef struct isoprobe_model isoprobe_model;

typedef struct isoprobe_model_info {
  size_t vocab_size;
  size_t embed_dim;
  size_t attn_dim;
  size_t layer_count;
  size_t parameter_count;
} isoprobe_model_info;

ISOPROBE_API isoprobe_status isoprobe_model_load(const char* path, isoprobe_model** out);
ISOPROBE_API void isoprobe_model_destroy(isoprobe_model* model);
ISOPROBE_API isoprobe_status isoprobe_model_get_info(const isoprobe_model* model,
                                                     isoprobe_model_info* info);
/* Next-token distribution after `tokens`; `probs` holds vocab_size values. */
ISOPROBE_API isoprobe_status isoprobe_model_predict(const isoprobe_model* model,
                                                    const uint32_t* tokens, size_t count,
                                                    double* probs, size_t probs_len);
/* Partition-function isotropy of the embedding table, in (0, 1]. */
ISOPROBE_API isoprobe_status isoprobe_model_isotropy(const isoprobe_model* model, double* value);

/* ------------------------------------------------------------ embeddings */

typedef struct isoprobe_embeddings isoprobe_embeddings;

typedef struct isoprobe_layer_metrics {
  uint32_t layer;
  size_t records;
  size_t tokens;
  size_t d08;
  size_t d09;
  double zeta_cos;
  size_t clusters;
  double mean_silhouette;
  double zeta_prime; /* NaN when every cluster was too small */
  double isotropy_partition;
} isoprobe_layer_metrics;

ISOPROBE_API isoprobe_status isoprobe_embeddings_load(const char* path,
                                                      isoprobe_embeddings** out);
ISOPROBE_API void isoprobe_embeddings_destroy(isoprobe_embeddings* dump);
ISOPROBE_API size_t isoprobe_embeddings_dim(const isoprobe_embeddings* dump);
ISOPROBE_API size_t isoprobe_embeddings_size(const isoprobe_embeddings* dump);
/* Layer ids present in the dump; writes up to `capacity`, returns the total. */
ISOPROBE_API size_t isoprobe_embeddings_layers(const isoprobe_embeddings* dump, uint32_t* layers,
                                               size_t capacity);
ISOPROBE_API isoprobe_status isoprobe_embeddings_analyze(const isoprobe_embeddings* dump,
                                                         uint32_t layer, uint64_t seed,
                                                         isoprobe_layer_metrics* out);

/* ------------------------------------------------------------ metrics */

/* d(eps) of a row-major rows x cols sample matrix. */
ISOPROBE_API isoprobe_status isoprobe_effective_dim(const double* data, size_t rows, size_t cols,
                                                    double eps, size_t* out);
/* Normalized mean squared error sum((p - t)^2) / sum(t^2). */
ISOPROBE_API isoprobe_status isoprobe_nmse(const double* pred, const double* truth, size_t count,
                                           double* out);

#ifdef __cplusplus
}
#endif

#endif /* ISOPROBE_ISOPROBE_H_ */
