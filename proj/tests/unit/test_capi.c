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

/* Exercises the public header from C. */

#define _POSIX_C_SOURCE 200809L
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

#include "isoprobe/isoprobe.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: EXPECT(%s)\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static int log_lines = 0;
static void count_log(const char* message, void* user) {
  (void)message;
  ++*(int*)user;
}

static void test_basics(void) {
  EXPECT(strcmp(isoprobe_version(), "0.1.0") == 0);
  EXPECT(strlen(isoprobe_status_name(ISOPROBE_STALE_ARTIFACT)) > 0);
  EXPECT(isoprobe_exit_code(ISOPROBE_OK) == 0);
  EXPECT(isoprobe_exit_code(ISOPROBE_CONFIG_ERROR) == 2);
  EXPECT(isoprobe_exit_code(ISOPROBE_MISSING_INPUT) == 3);
  EXPECT(isoprobe_exit_code(ISOPROBE_CHECK_FAILED) == 4);
  EXPECT(isoprobe_exit_code(ISOPROBE_NUMERIC_FAILURE) == 5);
  EXPECT(isoprobe_command_count() == 7);
  EXPECT(strcmp(isoprobe_command_name(0), "synth") == 0);
  EXPECT(isoprobe_command_name(99) == NULL);
}

static void test_metrics(void) {
  double truth[3] = {1.0, 2.0, 2.0};
  double pred[3] = {1.0, 2.0, 5.0};
  double zero[3] = {0.0, 0.0, 0.0};
  double v = -1.0;
  EXPECT(isoprobe_nmse(pred, truth, 3, &v) == ISOPROBE_OK);
  EXPECT(fabs(v - 1.0) < 1e-15);
  EXPECT(isoprobe_nmse(pred, zero, 3, &v) == ISOPROBE_UNDEFINED_METRIC);
  EXPECT(strlen(isoprobe_last_error()) > 0);
  EXPECT(isoprobe_nmse(NULL, truth, 3, &v) == ISOPROBE_INVALID_ARGUMENT);

  /* Two orthogonal directions with variances 9 and 1: d(0.8) = 1, d(0.95) = 2. */
  double data[8] = {3, 0, -3, 0, 0, 1, 0, -1};
  size_t d = 0;
  EXPECT(isoprobe_effective_dim(data, 4, 2, 0.8, &d) == ISOPROBE_OK);
  EXPECT(d == 1);
  EXPECT(isoprobe_effective_dim(data, 4, 2, 0.95, &d) == ISOPROBE_OK);
  EXPECT(d == 2);
  EXPECT(isoprobe_effective_dim(data, 4, 2, 0.0, &d) == ISOPROBE_INVALID_ARGUMENT);
}

static void test_series(void) {
  isoprobe_series* a = NULL;
  isoprobe_series* b = NULL;
  EXPECT(isoprobe_series_synthesize("seasonality1", 3, 64, 1, &a) == ISOPROBE_OK);
  EXPECT(isoprobe_series_synthesize("seasonality1", 3, 64, 1, &b) == ISOPROBE_OK);
  if (a && b) {
    EXPECT(isoprobe_series_length(a) == 64);
    EXPECT(memcmp(isoprobe_series_data(a), isoprobe_series_data(b), 64 * sizeof(double)) == 0);
  }
  isoprobe_series_destroy(a);
  isoprobe_series_destroy(b);
  isoprobe_series* c = NULL;
  EXPECT(isoprobe_series_synthesize("unknown", 3, 64, 1, &c) == ISOPROBE_INVALID_ARGUMENT);
  EXPECT(c == NULL);
}

static void test_pipeline(void) {
  char dir[] = "/tmp/isoprobe_capi_XXXXXX";
  EXPECT(mkdtemp(dir) != NULL);
  isoprobe_options* o = NULL;
  EXPECT(isoprobe_options_create(&o) == ISOPROBE_OK);
  const char* sets[] = {"synth.datasets=[trend1]", "synth.length=64", "tokenizer.vocab_size=16",
                        "model.embed_dim=6", "model.attn_dim=3", "train.steps=5",
                        "train.context_length=6", "train.horizon=2", "embed.windows=4"};
  for (size_t i = 0; i < sizeof sets / sizeof *sets; ++i)
    EXPECT(isoprobe_options_add_override(o, sets[i]) == ISOPROBE_OK);
  EXPECT(isoprobe_options_add_override(o, NULL) == ISOPROBE_INVALID_ARGUMENT);
  EXPECT(isoprobe_options_set_out(o, dir) == ISOPROBE_OK);
  EXPECT(isoprobe_options_set_seed(o, 4) == ISOPROBE_OK);
  EXPECT(isoprobe_options_set_workers(o, 0) == ISOPROBE_INVALID_ARGUMENT);
  EXPECT(isoprobe_options_set_log(o, count_log, &log_lines) == ISOPROBE_OK);

  EXPECT(isoprobe_run("train", o) == ISOPROBE_MISSING_INPUT);
  EXPECT(isoprobe_run("bogus", o) == ISOPROBE_INVALID_ARGUMENT);
  EXPECT(isoprobe_run("synth", o) == ISOPROBE_OK);
  EXPECT(isoprobe_run("train", o) == ISOPROBE_OK);
  EXPECT(isoprobe_run("embed", o) == ISOPROBE_OK);
  EXPECT(log_lines > 0);

  char path[512];
  snprintf(path, sizeof path, "%s/train/model.isop", dir);
  isoprobe_model* m = NULL;
  EXPECT(isoprobe_model_load(path, &m) == ISOPROBE_OK);
  if (m) {
    isoprobe_model_info info;
    EXPECT(isoprobe_model_get_info(m, &info) == ISOPROBE_OK);
    EXPECT(info.vocab_size == 16 && info.embed_dim == 6 && info.attn_dim == 3);
    EXPECT(info.layer_count == 2);
    EXPECT(info.parameter_count == 16 * 6 + 2 * 2 * 6 * 3);
    uint32_t tokens[3] = {1, 5, 9};
    double probs[16];
    double sum = 0.0;
    EXPECT(isoprobe_model_predict(m, tokens, 3, probs, 16) == ISOPROBE_OK);
    for (int i = 0; i < 16; ++i) sum += probs[i];
    EXPECT(fabs(sum - 1.0) < 1e-12);
    EXPECT(isoprobe_model_predict(m, tokens, 3, probs, 8) == ISOPROBE_INVALID_ARGUMENT);
    tokens[0] = 16;
    EXPECT(isoprobe_model_predict(m, tokens, 3, probs, 16) == ISOPROBE_INVALID_ARGUMENT);
    double iso = 0.0;
    EXPECT(isoprobe_model_isotropy(m, &iso) == ISOPROBE_OK);
    EXPECT(iso > 0.0 && iso <= 1.0);
  }
  isoprobe_model_destroy(m);

  snprintf(path, sizeof path, "%s/embed/embeddings.isoemb", dir);
  isoprobe_embeddings* e = NULL;
  EXPECT(isoprobe_embeddings_load(path, &e) == ISOPROBE_OK);
  if (e) {
    uint32_t layers[4] = {0};
    EXPECT(isoprobe_embeddings_dim(e) == 6);
    EXPECT(isoprobe_embeddings_layers(e, layers, 4) == 2);
    EXPECT(layers[0] == 1 && layers[1] == 2);
    EXPECT(isoprobe_embeddings_size(e) == 2 * 4 * 6);
    isoprobe_layer_metrics a, b;
    EXPECT(isoprobe_embeddings_analyze(e, 2, 7, &a) == ISOPROBE_OK);
    EXPECT(isoprobe_embeddings_analyze(e, 2, 7, &b) == ISOPROBE_OK);
    EXPECT(a.layer == 2 && a.records == 24);
    EXPECT(a.d08 >= 1 && a.d08 <= a.d09 && a.d09 <= 6);
    EXPECT(a.zeta_cos == b.zeta_cos);
    EXPECT(a.isotropy_partition > 0.0 && a.isotropy_partition <= 1.0);
    EXPECT(isoprobe_embeddings_analyze(e, 9, 7, &a) == ISOPROBE_INVALID_ARGUMENT);
  }
  isoprobe_embeddings_destroy(e);
  EXPECT(isoprobe_embeddings_load("/nonexistent/x.isoemb", &e) != ISOPROBE_OK);
  isoprobe_options_destroy(o);

  char cmd[600];
  snprintf(cmd, sizeof cmd, "rm -rf '%s'", dir);
  if (system(cmd) != 0) ++failures;
}

int main(void) {
  test_basics();
  test_metrics();
  test_series();
  test_pipeline();
  if (failures) {
    fprintf(stderr, "%d expectation(s) failed\n", failures);
    return 1;
  }
  printf("c api: all expectations passed\n");
  return 0;
}
