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

#include "attention_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace isoprobe::model {

Matrix AttentionLayer::Lambda() const { return numerics::MultiplyTransposed(query, key); }

ModelParams ModelParams::Zeros(const Hyper& hyper) {
  ModelParams p;
  p.hyper = hyper;
  p.embed = Matrix(hyper.vocab_size, hyper.embed_dim);
  p.layers.assign(hyper.layer_count, AttentionLayer{Matrix(hyper.embed_dim, hyper.attn_dim),
                                                    Matrix(hyper.embed_dim, hyper.attn_dim)});
  return p;
}

ModelParams ModelParams::Random(const Hyper& hyper, double embed_scale, RngStream& stream) {
  ModelParams p = Zeros(hyper);
  p.Validate();
  for (double& v : p.embed.data()) v = embed_scale * stream.Gaussian();
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(hyper.embed_dim));
  for (auto& layer : p.layers) {
    for (double& v : layer.query.data()) v = attn_scale * stream.Gaussian();
    for (double& v : layer.key.data()) v = attn_scale * stream.Gaussian();
  }
  return p;
}

void ModelParams::Validate() const {
  Require(hyper.vocab_size >= 2, "model: vocab_size must be >= 2");
  Require(hyper.embed_dim >= 1, "model: embed_dim must be >= 1");
  Require(hyper.attn_dim >= 1 && hyper.attn_dim <= hyper.embed_dim,
          "model: attn_dim must satisfy 1 <= m <= D");
  Require(embed.rows() == hyper.vocab_size && embed.cols() == hyper.embed_dim,
          "model: embedding table shape mismatch");
  Require(layers.size() == hyper.layer_count, "model: layer count mismatch");
  Require(embed.AllFinite(), "model: embedding table has non-finite entries");
  for (const auto& l : layers) {
    Require(l.query.rows() == hyper.embed_dim && l.query.cols() == hyper.attn_dim &&
                l.key.rows() == hyper.embed_dim && l.key.cols() == hyper.attn_dim,
            "model: attention weight shape mismatch");
    Require(l.query.AllFinite() && l.key.AllFinite(),
            "model: attention weights have non-finite entries");
  }
}

std::size_t ModelParams::ParameterCount() const {
  std::size_t n = embed.size();
  for (const auto& l : layers) n += l.query.size() + l.key.size();
  return n;
}

namespace {

// Row-wise softmax of scores in place, optionally masked to j <= i.
void SoftmaxRows(Matrix& s, bool causal) {
  const std::size_t n = s.rows();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = s.row(i);
    const std::size_t limit = causal ? i + 1 : s.cols();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, row[j]);
    if (!std::isfinite(mx))
      Fail(ErrorCode::kNumericFailure,
           "self_attention: non-finite attention logits in row " + std::to_string(i));
    double z = 0.0;
    for (std::size_t j = 0; j < limit; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < limit; ++j) row[j] /= z;
    for (std::size_t j = limit; j < s.cols(); ++j) row[j] = 0.0;
  }
}

struct LayerCache {
  Matrix queries;  // X·W_Q
  Matrix keys;     // X·W_K
  Matrix weights;  // causal softmax of queries·keysᵀ
};

void ForwardStack(const ModelParams& params, std::span<const TokenId> tokens,
                  std::vector<Matrix>& xs, std::vector<LayerCache>* caches) {
  const std::size_t n = tokens.size(), d = params.hyper.embed_dim;
  xs.assign(params.layers.size() + 1, Matrix());
  xs[0] = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    Require(tokens[i] < params.hyper.vocab_size,
            "forward: token id " + std::to_string(tokens[i]) + " at position " +
                std::to_string(i) + " >= vocab size");
    std::copy_n(params.embed.row(tokens[i]).begin(), d, xs[0].row(i).begin());
  }
  if (caches) caches->resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Matrix& x = xs[l];
    Matrix q = x * params.layers[l].query;
    Matrix k = x * params.layers[l].key;
    Matrix p = numerics::MultiplyTransposed(q, k);
    SoftmaxRows(p, /*causal=*/true);
    xs[l + 1] = p * x;
    if (caches) (*caches)[l] = LayerCache{std::move(q), std::move(k), std::move(p)};
  }
}

}  // namespace

Matrix SelfAttention(const Matrix& psi, const Matrix& lambda, bool causal, Matrix* weights) {
  Require(lambda.rows() == psi.cols() && lambda.cols() == psi.cols(),
          "self_attention: Λ must be D×D with D = " + std::to_string(psi.cols()));
  Matrix p = numerics::MultiplyTransposed(psi * lambda, psi);
  SoftmaxRows(p, causal);
  Matrix out = p * psi;
  if (weights) *weights = std::move(p);
  return out;
}

double LogSumExp(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return mx + std::log(s);
}

std::vector<double> Softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z);
  if (!std::isfinite(mx)) Fail(ErrorCode::kNumericFailure, "softmax: non-finite logits");
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

std::vector<double> HeadLogits(const ModelParams& params, std::span<const double> encoding) {
  return numerics::MatVec(params.embed, encoding);
}

ForwardTrace Forward(std::span<const TokenId> tokens, const ModelParams& params) {
  Require(!tokens.empty(), "forward: empty token sequence");
  ForwardTrace trace;
  std::vector<LayerCache> caches;
  ForwardStack(params, tokens, trace.activations, &caches);
  for (auto& c : caches) trace.attention.push_back(std::move(c.weights));
  const Matrix& last = trace.activations.back();
  auto row = last.row(last.rows() - 1);
  trace.encoding.assign(row.begin(), row.end());
  trace.logits = HeadLogits(params, trace.encoding);
  for (double z : trace.logits)
    if (!std::isfinite(z)) Fail(ErrorCode::kNumericFailure, "forward: non-finite logits");
  trace.probabilities = Softmax(trace.logits);
  return trace;
}

double CrossEntropy(std::span<const std::vector<double>> logits,
                    std::span<const TokenId> targets) {
  Require(logits.size() == targets.size(), "loss: one target per predicted position");
  Require(!logits.empty(), "loss: no predictions");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Require(targets[i] < logits[i].size(),
            "loss: target " + std::to_string(targets[i]) + " >= vocab size");
    total += LogSumExp(logits[i]) - logits[i][targets[i]];
  }
  return total / static_cast<double>(logits.size());
}

std::vector<Window> MakeWindows(std::span<const double> series,
                                const tokenizer::TokenizerConfig& cfg,
                                std::size_t context_length, std::size_t horizon,
                                std::size_t stride) {
  Require(context_length >= 1 && horizon >= 1, "windows: T and L must be positive");
  Require(stride >= 1, "windows: stride must be positive");
  std::vector<Window> out;
  const std::size_t len = context_length + horizon;
  for (std::size_t start = 0; start + len <= series.size(); start += stride) {
    auto window = series.subspan(start, len);
    const double scale = tokenizer::FitScale(window.first(context_length));
    Window w;
    w.tokens = tokenizer::Tokenize(window, cfg, scale).tokens;
    w.scale = scale;
    w.start = start;
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

std::span<const TokenId> ModelInput(const Window& w, std::size_t context_length) {
  Require(context_length >= 1 && w.tokens.size() > context_length,
          "window: need more than T tokens");
  return std::span<const TokenId>(w.tokens).first(w.tokens.size() - 1);
}

}  // namespace

std::vector<std::vector<double>> PredictionLogits(const ModelParams& params,
                                                  const Window& window,
                                                  std::size_t context_length) {
  auto input = ModelInput(window, context_length);
  std::vector<Matrix> xs;
  ForwardStack(params, input, xs, nullptr);
  std::vector<std::vector<double>> out;
  for (std::size_t t = context_length - 1; t < input.size(); ++t)
    out.push_back(HeadLogits(params, xs.back().row(t)));
  return out;
}

double BatchLoss(const ModelParams& params, std::span<const Window> batch,
                 std::size_t context_length) {
  std::vector<std::vector<double>> logits;
  std::vector<TokenId> targets;
  for (const auto& w : batch) {
    auto l = PredictionLogits(params, w, context_length);
    for (std::size_t i = 0; i < l.size(); ++i) {
      logits.push_back(std::move(l[i]));
      targets.push_back(w.tokens[context_length + i]);
    }
  }
  return CrossEntropy(logits, targets);
}

namespace {

// Accumulates un-normalized loss and gradient sums for one window.
void WindowGradient(const ModelParams& params, const Window& window,
                    std::size_t context_length, ModelParams& grad, double& loss_sum,
                    std::size_t& predictions) {
  auto input = ModelInput(window, context_length);
  const std::size_t n = input.size(), d = params.hyper.embed_dim;
  const std::size_t vocab = params.hyper.vocab_size;
  std::vector<Matrix> xs;
  std::vector<LayerCache> caches;
  ForwardStack(params, input, xs, &caches);

  Matrix dy(n, d);
  for (std::size_t t = context_length - 1; t < n; ++t) {
    const TokenId target = window.tokens[t + 1];
    Require(target < vocab, "loss: target " + std::to_string(target) + " >= vocab size");
    auto h = xs.back().row(t);
    std::vector<double> z = HeadLogits(params, h);
    const double lse = LogSumExp(z);
    loss_sum += lse - z[target];
    ++predictions;
    auto dh = dy.row(t);
    for (std::size_t i = 0; i < vocab; ++i) {
      const double dz = std::exp(z[i] - lse) - (i == target ? 1.0 : 0.0);
      if (dz == 0.0) continue;
      auto e = params.embed.row(i);
      auto ge = grad.embed.row(i);
      for (std::size_t k = 0; k < d; ++k) {
        ge[k] += dz * h[k];
        dh[k] += dz * e[k];
      }
    }
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Matrix& x = xs[l];
    const LayerCache& c = caches[l];
    const AttentionLayer& layer = params.layers[l];
    // Y = P·X: dP = dY·Xᵀ, dX = Pᵀ·dY.
    Matrix dp = numerics::MultiplyTransposed(dy, x);
    Matrix dx = c.weights.Transposed() * dy;
    // Softmax rows: dS_ij = P_ij (dP_ij - Σ_k P_ik dP_ik).
    Matrix ds(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j <= i; ++j) inner += c.weights(i, j) * dp(i, j);
      for (std::size_t j = 0; j <= i; ++j) ds(i, j) = c.weights(i, j) * (dp(i, j) - inner);
    }
    // S = Q·Kᵀ: dQ = dS·K, dK = dSᵀ·Q.
    Matrix dq = ds * c.keys;
    Matrix dk = ds.Transposed() * c.queries;
    grad.layers[l].query += x.Transposed() * dq;
    grad.layers[l].key += x.Transposed() * dk;
    dx += numerics::MultiplyTransposed(dq, layer.query);
    dx += numerics::MultiplyTransposed(dk, layer.key);
    dy = std::move(dx);
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto ge = grad.embed.row(input[i]);
    auto g = dy.row(i);
    for (std::size_t k = 0; k < d; ++k) ge[k] += g[k];
  }
}

void CheckFinite(const Matrix& m, const std::string& name) {
  if (!m.AllFinite())
    Fail(ErrorCode::kNumericFailure, "grad: non-finite gradient for parameter " + name);
}

}  // namespace

LossAndGradient ComputeGradient(const ModelParams& params, std::span<const Window> batch,
                                std::size_t context_length, int workers) {
  Require(!batch.empty(), "grad: empty batch");
  params.Validate();
  struct Slot {
    ModelParams grad;
    double loss = 0.0;
    std::size_t predictions = 0;
  };
  std::vector<Slot> slots(batch.size());
  ParallelFor(batch.size(), workers, [&](std::size_t i) {
    slots[i].grad = ModelParams::Zeros(params.hyper);
    WindowGradient(params, batch[i], context_length, slots[i].grad, slots[i].loss,
                   slots[i].predictions);
  });

  LossAndGradient out;
  out.gradient = ModelParams::Zeros(params.hyper);
  std::size_t predictions = 0;
  for (const auto& s : slots) {
    out.loss += s.loss;
    predictions += s.predictions;
    out.gradient.embed += s.grad.embed;
    for (std::size_t l = 0; l < s.grad.layers.size(); ++l) {
      out.gradient.layers[l].query += s.grad.layers[l].query;
      out.gradient.layers[l].key += s.grad.layers[l].key;
    }
  }
  const double inv = 1.0 / static_cast<double>(predictions);
  out.loss *= inv;
  out.gradient.embed *= inv;
  CheckFinite(out.gradient.embed, "embed");
  for (std::size_t l = 0; l < out.gradient.layers.size(); ++l) {
    out.gradient.layers[l].query *= inv;
    out.gradient.layers[l].key *= inv;
    CheckFinite(out.gradient.layers[l].query, "layer" + std::to_string(l + 1) + ".W_Q");
    CheckFinite(out.gradient.layers[l].key, "layer" + std::to_string(l + 1) + ".W_K");
  }
  return out;
}

void TrainConfig::Validate() const {
  Require(std::isfinite(learning_rate) && learning_rate > 0.0, "train: learning_rate must be > 0");
  Require(steps > 0, "train: steps must be > 0");
  Require(batch_size > 0, "train: batch_size must be > 0");
  Require(context_length > 0, "train: context_length must be > 0");
  Require(horizon > 0, "train: horizon must be > 0");
  Require(log_every > 0, "train: log_every must be > 0");
  Require(std::isfinite(embed_init_scale) && embed_init_scale > 0.0,
          "train: embed_init_scale must be > 0");
}

TrainResult Train(const Hyper& hyper, std::span<const Window> dataset, const TrainConfig& cfg) {
  cfg.Validate();
  Require(!dataset.empty(), "train: empty dataset");
  for (const auto& w : dataset)
    Require(w.tokens.size() == cfg.context_length + cfg.horizon,
            "train: window length must equal T + L");

  RngStream init_stream(cfg.seed, 0);
  RngStream batch_stream(cfg.seed, 1);
  TrainResult result;
  result.params = ModelParams::Random(hyper, cfg.embed_init_scale, init_stream);

  std::vector<Window> batch(cfg.batch_size);
  double window_sum = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& w : batch) w = dataset[batch_stream.UniformIndex(dataset.size())];
    LossAndGradient lg = ComputeGradient(result.params, batch, cfg.context_length, cfg.workers);
    if (step == 0) result.initial_loss = lg.loss;
    if (!std::isfinite(lg.loss) || lg.loss > 1e3 * result.initial_loss)
      Fail(ErrorCode::kTrainingFailure,
           "train: diverged at step " + std::to_string(step) + " (loss " +
               std::to_string(lg.loss) + ", initial " + std::to_string(result.initial_loss) +
               ")");
    result.step_losses.push_back(lg.loss);
    window_sum += lg.loss;
    if ((step + 1) % cfg.log_every == 0) {
      result.curve.push_back({step + 1, window_sum / static_cast<double>(cfg.log_every)});
      window_sum = 0.0;
    }

    auto& p = result.params;
    const auto& g = lg.gradient;
    p.embed -= g.embed * cfg.learning_rate;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      p.layers[l].query -= g.layers[l].query * cfg.learning_rate;
      p.layers[l].key -= g.layers[l].key * cfg.learning_rate;
    }
  }
  return result;
}

std::size_t SampleCategorical(std::span<const double> probabilities, RngStream& stream) {
  Require(!probabilities.empty(), "sample: empty distribution");
  const double u = stream.Uniform();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    cum += probabilities[i];
    last_positive = i;
    if (u < cum) return i;
  }
  return last_positive;
}

ForecastResult Forecast(const ModelParams& params, std::span<const TokenId> context,
                        std::size_t horizon, std::size_t sample_count, RngStream& stream,
                        const tokenizer::TokenizerConfig& cfg, double scale) {
  Require(horizon >= 1, "forecast: horizon must be >= 1");
  Require(sample_count >= 1, "forecast: sample_count must be >= 1");
  Require(cfg.vocab_size() == params.hyper.vocab_size,
          "forecast: tokenizer and model vocabularies differ");
  const std::vector<double> first = Forward(context, params).probabilities;

  ForecastResult out;
  out.point.assign(horizon, 0.0);
  std::vector<TokenId> seq;
  for (std::size_t s = 0; s < sample_count; ++s) {
    seq.assign(context.begin(), context.end());
    std::vector<TokenId> traj;
    for (std::size_t h = 0; h < horizon; ++h) {
      const auto tok = static_cast<TokenId>(
          h == 0 ? SampleCategorical(first, stream)
                 : SampleCategorical(Forward(seq, params).probabilities, stream));
      seq.push_back(tok);
      traj.push_back(tok);
      out.point[h] += cfg.BinCenter(tok) * scale;
    }
    out.trajectories.push_back(std::move(traj));
  }
  for (double& v : out.point) v /= static_cast<double>(sample_count);
  return out;
}

std::uint64_t ContextHash(std::span<const TokenId> tokens) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (TokenId t : tokens) {
    for (int b = 0; b < 4; ++b) {
      h ^= (t >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

isotropy::EmbeddingDump DumpEmbeddings(const ModelParams& params,
                                       std::span<const std::vector<TokenId>> windows,
                                       std::span<const std::uint32_t> layers) {
  params.Validate();
  std::vector<std::uint32_t> selected(layers.begin(), layers.end());
  if (selected.empty())
    for (std::uint32_t l = 1; l <= params.hyper.layer_count; ++l) selected.push_back(l);
  for (auto l : selected)
    Require(l >= 1 && l <= params.hyper.layer_count,
            "dump_embeddings: layer " + std::to_string(l) + " out of range");

  isotropy::EmbeddingDump dump(params.hyper.embed_dim,
                               static_cast<std::uint32_t>(params.hyper.layer_count));
  std::vector<Matrix> xs;
  for (const auto& tokens : windows) {
    if (tokens.empty()) continue;
    ForwardStack(params, tokens, xs, nullptr);
    const std::uint64_t ctx = ContextHash(tokens);
    for (auto l : selected) {
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        auto row = xs[l].row(t);
        dump.Add({l, tokens[t], ctx, std::vector<double>(row.begin(), row.end())});
      }
    }
  }
  return dump;
}

std::string SerializeCheckpoint(const ModelParams& params) {
  params.Validate();
  io::ByteWriter w;
  w.Bytes(kCheckpointMagic);
  w.U32(kCheckpointVersion);
  w.U32(static_cast<std::uint32_t>(params.hyper.vocab_size));
  w.U32(static_cast<std::uint32_t>(params.hyper.embed_dim));
  w.U32(static_cast<std::uint32_t>(params.hyper.attn_dim));
  w.U32(static_cast<std::uint32_t>(params.hyper.layer_count));
  for (double v : params.embed.data()) w.F64(v);
  for (const auto& l : params.layers) {
    for (double v : l.query.data()) w.F64(v);
    for (double v : l.key.data()) w.F64(v);
  }
  return w.release();
}

ModelParams ParseCheckpoint(std::string_view bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.Bytes(kCheckpointMagic.size()) != kCheckpointMagic)
    Fail(ErrorCode::kInvalidArgument, "checkpoint: bad magic");
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion)
    Fail(ErrorCode::kInvalidArgument, "checkpoint: unsupported version " + std::to_string(version));
  Hyper h;
  h.vocab_size = r.U32();
  h.embed_dim = r.U32();
  h.attn_dim = r.U32();
  h.layer_count = r.U32();
  const std::uint64_t expected =
      8ULL * (static_cast<std::uint64_t>(h.vocab_size) * h.embed_dim +
              2ULL * h.layer_count * h.embed_dim * h.attn_dim);
  if (expected != r.remaining())
    Fail(ErrorCode::kInvalidArgument, "checkpoint: payload size does not match dims");
  ModelParams p = ModelParams::Zeros(h);
  for (double& v : p.embed.data()) v = r.F64();
  for (auto& l : p.layers) {
    for (double& v : l.query.data()) v = r.F64();
    for (double& v : l.key.data()) v = r.F64();
  }
  r.ExpectEnd();
  p.Validate();
  return p;
}

}  // namespace isoprobe::model
