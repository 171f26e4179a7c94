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

#ifndef ISOPROBE_CORE_ATTENTION_MODEL_HPP_
#define ISOPROBE_CORE_ATTENTION_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embedding_dump.hpp"
#include "numerics.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"

namespace isoprobe::model {

using numerics::Matrix;
using tokenizer::TokenId;

struct Hyper {
  std::size_t vocab_size = 512;
  std::size_t embed_dim = 64;  // D
  std::size_t attn_dim = 16;   // m
  std::size_t layer_count = 2;

  friend bool operator==(const Hyper&, const Hyper&) = default;
};

struct AttentionLayer {
  Matrix query;  // D×m
  Matrix key;    // D×m

  // Λ = W_Q·W_Kᵀ.
  Matrix Lambda() const;

  friend bool operator==(const AttentionLayer&, const AttentionLayer&) = default;
};

// The network is stacked g(Ψ) = softmax(ΨΛΨᵀ)Ψ with a head tied to the
// embedding table: logits = embed · (last row of the final layer).
// Gradients use the same layout.
struct ModelParams {
  Hyper hyper;
  Matrix embed;  // N×D
  std::vector<AttentionLayer> layers;

  static ModelParams Zeros(const Hyper& hyper);
  // embed ~ N(0, embed_scale²); W_Q, W_K ~ N(0, 1/D).
  static ModelParams Random(const Hyper& hyper, double embed_scale, RngStream& stream);

  void Validate() const;
  std::size_t ParameterCount() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Row i is Σ_j p_ij ψ_j with p_ij ∝ exp(ψ_iᵀΛψ_j); causal restricts j ≤ i.
// When `weights` is non-null it receives p (n×n, zero above the diagonal
// when causal).
Matrix SelfAttention(const Matrix& psi, const Matrix& lambda, bool causal,
                     Matrix* weights = nullptr);

std::vector<double> Softmax(std::span<const double> logits);
double LogSumExp(std::span<const double> logits);

struct ForwardTrace {
  std::vector<Matrix> activations;  // [0] input lookups, [l] after layer l
  std::vector<Matrix> attention;    // per layer
  std::vector<double> encoding;     // last row of the final layer
  std::vector<double> logits;
  std::vector<double> probabilities;
};

ForwardTrace Forward(std::span<const TokenId> tokens, const ModelParams& params);

// Logits embed · h for an arbitrary encoding row h.
std::vector<double> HeadLogits(const ModelParams& params, std::span<const double> encoding);

// Mean of -log softmax(logits[i])[targets[i]].
double CrossEntropy(std::span<const std::vector<double>> logits,
                    std::span<const TokenId> targets);

// A tokenized training window of length T + L. The model reads tokens
// [0, T+L-1) and predicts tokens T..T+L-1 from positions T-1..T+L-2.
struct Window {
  std::vector<TokenId> tokens;
  double scale = 1.0;
  std::size_t start = 0;  // offset in the source series
};

// Sliding windows over `series`; each is scaled by its own context.
std::vector<Window> MakeWindows(std::span<const double> series,
                                const tokenizer::TokenizerConfig& cfg,
                                std::size_t context_length, std::size_t horizon,
                                std::size_t stride = 1);

// Per-window logits at every predicted position, in order.
std::vector<std::vector<double>> PredictionLogits(const ModelParams& params,
                                                  const Window& window,
                                                  std::size_t context_length);

double BatchLoss(const ModelParams& params, std::span<const Window> batch,
                 std::size_t context_length);

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

// Exact reverse-mode gradient of BatchLoss. Per-window contributions are
// computed on up to `workers` threads and summed in window order.
LossAndGradient ComputeGradient(const ModelParams& params, std::span<const Window> batch,
                                std::size_t context_length, int workers = 1);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t steps = 5000;
  std::size_t batch_size = 16;
  std::size_t context_length = 16;  // T
  std::size_t horizon = 4;          // L
  std::uint64_t seed = 1;
  std::size_t log_every = 50;
  double embed_init_scale = 0.1;
  int workers = 1;

  void Validate() const;
};

struct LossPoint {
  std::size_t step = 0;  // steps completed
  double loss = 0.0;     // mean batch loss over the preceding log_every steps
};

struct TrainResult {
  ModelParams params;
  std::vector<double> step_losses;
  std::vector<LossPoint> curve;
  double initial_loss = 0.0;
};

// Plain SGD with a fixed learning rate; batches drawn with replacement.
TrainResult Train(const Hyper& hyper, std::span<const Window> dataset, const TrainConfig& cfg);

struct ForecastResult {
  std::vector<std::vector<TokenId>> trajectories;
  std::vector<double> point;  // mean of detokenized trajectories
};

inline constexpr std::size_t kDefaultSampleCount = 20;

ForecastResult Forecast(const ModelParams& params, std::span<const TokenId> context,
                        std::size_t horizon, std::size_t sample_count, RngStream& stream,
                        const tokenizer::TokenizerConfig& cfg, double scale);

// Draws an index from a categorical distribution.
std::size_t SampleCategorical(std::span<const double> probabilities, RngStream& stream);

std::uint64_t ContextHash(std::span<const TokenId> tokens);

// One record per (window, layer, position); `layers` lists 1-based layer ids,
// empty meaning every layer.
isotropy::EmbeddingDump DumpEmbeddings(const ModelParams& params,
                                       std::span<const std::vector<TokenId>> windows,
                                       std::span<const std::uint32_t> layers = {});

// "ISOP", version u32, N, D, m, layer count (u32 each), then embed and each
// layer's W_Q, W_K as row-major little-endian doubles.
inline constexpr std::string_view kCheckpointMagic = "ISOP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string SerializeCheckpoint(const ModelParams& params);
ModelParams ParseCheckpoint(std::string_view bytes);

}  // namespace isoprobe::model

#endif  // ISOPROBE_CORE_ATTENTION_MODEL_HPP_
