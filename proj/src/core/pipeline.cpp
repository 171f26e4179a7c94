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

#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "attention_model.hpp"
#include "binary_io.hpp"
#include "embedding_dump.hpp"
#include "error.hpp"
#include "evalharness.hpp"
#include "format.hpp"
#include "isotropy_metrics.hpp"
#include "kernelsynth.hpp"
#include "manifest.hpp"
#include "parallel.hpp"
#include "theory_checks.hpp"
#include "tokenizer.hpp"
#include "verification.hpp"

namespace isoprobe::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stream ids for verification draws; the master seed is the stream seed.
constexpr std::uint64_t kShiftStream = 101;
constexpr std::uint64_t kBoundStream = 102;
constexpr std::uint64_t kLambdaStream = 103;
constexpr std::uint64_t kApproxStream = 104;

const std::vector<std::string> kModelPrefixes = {"synth.", "tokenizer.", "model.", "train."};

struct Context {
  Config cfg;
  json snapshot;
  fs::path root;
  std::uint64_t seed = 0;
  int workers = 1;
  LogFn log;

  void Log(const std::string& msg) const {
    if (log) log(msg);
  }
};

void ConfigCheck(bool ok, const std::string& key, const std::string& what) {
  if (!ok) Fail(ErrorCode::kConfigError, key + ": " + what);
}

// ---------------------------------------------------------------- files

void WriteOutput(const Context& ctx, RunManifest& m, const std::string& rel,
                 std::string_view contents) {
  io::WriteFileAtomic((ctx.root / rel).string(), contents);
  m.outputs.push_back({rel, ""});
}

const ArtifactEntry& FindOutput(const RunManifest& m, const std::string& rel) {
  for (const auto& e : m.outputs)
    if (e.path == rel) return e;
  Fail(ErrorCode::kMissingInput,
       rel + " is not listed in the '" + m.command + "' manifest; rerun '" + m.command + "'");
}

std::string SeriesCsv(std::span<const double> values) {
  std::string out = "index,value\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    out += std::to_string(i) + "," + FormatDouble(values[i]) + "\n";
  return out;
}

std::vector<double> ParseSeriesCsv(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "index,value")
    Fail(ErrorCode::kInvalidArgument, what + ": expected header 'index,value'");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != std::to_string(values.size()))
      Fail(ErrorCode::kInvalidArgument,
           what + ": malformed row " + std::to_string(values.size() + 1));
    values.push_back(ParseDouble(line.substr(comma + 1)));
  }
  return values;
}

json ParseJsonFile(const fs::path& path) {
  try {
    return json::parse(io::ReadFile(path.string()));
  } catch (const json::exception& e) {
    Fail(ErrorCode::kStaleArtifact, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- config views

tokenizer::TokenizerConfig TokenizerFrom(const Config& c) {
  const std::size_t n = c.Count("tokenizer.vocab_size");
  const double lo = c.Real("tokenizer.lo");
  const double hi = c.Real("tokenizer.hi");
  ConfigCheck(n >= 2, "tokenizer.vocab_size", "must be at least 2");
  ConfigCheck(lo < hi, "tokenizer.hi", "must exceed tokenizer.lo");
  return tokenizer::TokenizerConfig(n, lo, hi);
}

model::Hyper HyperFrom(const Config& c) {
  model::Hyper h;
  h.vocab_size = c.Count("tokenizer.vocab_size");
  h.embed_dim = c.Count("model.embed_dim");
  h.attn_dim = c.Count("model.attn_dim");
  h.layer_count = c.Count("model.layers");
  ConfigCheck(h.embed_dim >= 1, "model.embed_dim", "must be positive");
  ConfigCheck(h.attn_dim >= 1 && h.attn_dim <= h.embed_dim, "model.attn_dim",
              "must be in [1, model.embed_dim]");
  ConfigCheck(h.layer_count >= 1, "model.layers", "must be positive");
  return h;
}

model::TrainConfig TrainFrom(const Context& ctx) {
  const Config& c = ctx.cfg;
  model::TrainConfig t;
  t.learning_rate = c.Real("train.learning_rate");
  t.steps = c.Count("train.steps");
  t.batch_size = c.Count("train.batch_size");
  t.context_length = c.Count("train.context_length");
  t.horizon = c.Count("train.horizon");
  t.log_every = c.Count("train.log_every");
  t.embed_init_scale = c.Real("train.embed_init_scale");
  t.seed = ctx.seed;
  t.workers = ctx.workers;
  ConfigCheck(t.learning_rate > 0.0, "train.learning_rate", "must be positive");
  ConfigCheck(t.steps >= 1, "train.steps", "must be positive");
  ConfigCheck(t.batch_size >= 1, "train.batch_size", "must be positive");
  ConfigCheck(t.context_length >= 1, "train.context_length", "must be positive");
  ConfigCheck(t.horizon >= 1, "train.horizon", "must be positive");
  ConfigCheck(t.log_every >= 1, "train.log_every", "must be positive");
  ConfigCheck(t.embed_init_scale > 0.0, "train.embed_init_scale", "must be positive");
  return t;
}

std::size_t SplitIndex(const Config& c, std::size_t length) {
  const double f = c.Real("train.train_fraction");
  ConfigCheck(f > 0.0 && f <= 1.0, "train.train_fraction", "must be in (0, 1]");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(f * static_cast<double>(length))));
}

// ---------------------------------------------------------------- upstream loading

struct Series {
  std::string name;
  std::vector<double> values;
  ArtifactEntry entry;
};

RunManifest SynthManifest(const Context& ctx) {
  RunManifest m = ReadManifest(ctx.root, "synth");
  RequireSameConfig(m, ctx.snapshot, {"synth."});
  return m;
}

std::vector<std::string> SynthesizedNames(const RunManifest& synth) {
  std::vector<std::string> names;
  for (const auto& e : synth.outputs) {
    const fs::path p(e.path);
    if (p.extension() == ".csv") names.push_back(p.stem().string());
  }
  return names;
}

Series LoadSeries(const Context& ctx, const RunManifest& synth, const std::string& name) {
  Series s;
  s.name = name;
  s.entry = VerifyArtifact(ctx.root, FindOutput(synth, "synth/" + name + ".csv"));
  s.values = ParseSeriesCsv(io::ReadFile((ctx.root / s.entry.path).string()), s.entry.path);
  return s;
}

struct Trained {
  model::ModelParams params;
  json meta;
  std::vector<std::string> datasets;
  std::vector<ArtifactEntry> entries;
};

Trained LoadTrained(const Context& ctx) {
  const RunManifest m = ReadManifest(ctx.root, "train");
  RequireSameConfig(m, ctx.snapshot, kModelPrefixes);
  Trained t;
  t.entries.push_back(VerifyArtifact(ctx.root, FindOutput(m, "train/model.isop")));
  t.entries.push_back(VerifyArtifact(ctx.root, FindOutput(m, "train/model.json")));
  t.params = model::ParseCheckpoint(io::ReadFile((ctx.root / "train/model.isop").string()));
  t.meta = ParseJsonFile(ctx.root / "train/model.json");
  t.datasets = t.meta.at("datasets").get<std::vector<std::string>>();
  return t;
}

std::vector<std::string> DatasetsOr(const Config& c, const std::string& key,
                                    const std::vector<std::string>& fallback) {
  std::vector<std::string> names = c.StrList(key);
  if (names.empty()) names = fallback;
  std::set<std::string> seen;
  for (const auto& n : names) ConfigCheck(seen.insert(n).second, key, "duplicate dataset '" + n + "'");
  return names;
}

// ---------------------------------------------------------------- json helpers

const char* KindName(kernelsynth::KernelKind k) {
  switch (k) {
    case kernelsynth::KernelKind::kDotProduct: return "DotProduct";
    case kernelsynth::KernelKind::kRbf: return "RBF";
    case kernelsynth::KernelKind::kPeriodic: return "Periodic";
    case kernelsynth::KernelKind::kRationalQuadratic: return "RationalQuadratic";
    case kernelsynth::KernelKind::kWhite: return "White";
  }
  return "unknown";
}

json KernelJson(const kernelsynth::KernelSpec& k) {
  using kernelsynth::KernelKind;
  json j{{"kind", KindName(k.kind)}};
  switch (k.kind) {
    case KernelKind::kDotProduct: j["c"] = k.c; break;
    case KernelKind::kRbf: j["length_scale"] = k.length_scale; break;
    case KernelKind::kPeriodic:
      j["period"] = k.period;
      j["length_scale"] = k.length_scale;
      break;
    case KernelKind::kRationalQuadratic:
      j["alpha"] = k.alpha;
      j["length_scale"] = k.length_scale;
      break;
    case KernelKind::kWhite: j["noise_level"] = k.noise_level; break;
  }
  return j;
}

json CosineJson(const isotropy::CosineStat& s) {
  return {{"value", s.value},         {"std_error", s.std_error},
          {"pairs", s.pairs},         {"tokens", s.tokens},
          {"exhaustive", s.exhaustive}, {"zero_vectors_excluded", s.zero_vectors_excluded}};
}

json RowJson(const eval::SweepRow& r) {
  return {{"value", r.value},           {"dataset", r.dataset}, {"seed", r.seed},
          {"nmse", r.nmse},             {"naive_nmse", r.naive_nmse},
          {"zeta_prime", r.zeta_prime}, {"d08", r.d08},         {"iso_I", r.iso_i}};
}

RunManifest NewManifest(const Context& ctx, const std::string& command) {
  RunManifest m;
  m.command = command;
  m.config = ctx.snapshot;
  m.seeds = json{{"master", ctx.seed}};
  fs::create_directories(ctx.root / command);
  return m;
}

// ---------------------------------------------------------------- commands

void CmdSynth(const Context& ctx) {
  const Config& c = ctx.cfg;
  kernelsynth::SynthOptions opts;
  opts.length = c.Count("synth.length");
  opts.max_kernels = c.Count("synth.max_kernels");
  opts.standardize = c.Bool("synth.standardize");
  ConfigCheck(opts.length >= 2, "synth.length", "must be at least 2");
  ConfigCheck(opts.max_kernels >= 1, "synth.max_kernels", "must be at least 1");

  const auto all = kernelsynth::DefaultDatasets();
  std::vector<std::string> every;
  for (const auto& d : all) every.push_back(d.name);
  const std::vector<std::string> names = DatasetsOr(c, "synth.datasets", every);
  std::vector<std::size_t> index;
  for (const auto& n : names) {
    auto it = std::find(every.begin(), every.end(), n);
    ConfigCheck(it != every.end(), "synth.datasets", "unknown dataset '" + n + "'");
    index.push_back(static_cast<std::size_t>(it - every.begin()));
  }

  RunManifest m = NewManifest(ctx, "synth");
  std::vector<kernelsynth::TimeSeries> series(names.size());
  ParallelFor(names.size(), ctx.workers, [&](std::size_t i) {
    RngStream stream(ctx.seed, index[i]);
    const kernelsynth::KernelSpec bank[] = {all[index[i]].kernel};
    series[i] = kernelsynth::KernelSynthSample(bank, opts, stream);
  });
  json streams = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& ts = series[i];
    const auto& spec = all[index[i]];
    json leaves = json::array();
    for (const auto& k : ts.origin.kernel.leaves) leaves.push_back(KernelJson(k));
    json ops = json::array();
    for (auto op : ts.origin.kernel.ops) ops.push_back(op == kernelsynth::ComposeOp::kAdd ? "+" : "*");
    const json sidecar{{"name", spec.name},
                       {"family", spec.family},
                       {"length", ts.length()},
                       {"J", ts.origin.kernel.leaf_count()},
                       {"max_kernels", opts.max_kernels},
                       {"seed", ts.origin.seed},
                       {"stream_id", ts.origin.stream_id},
                       {"standardized", ts.origin.standardized},
                       {"jitter", ts.origin.jitter},
                       {"kernel", ts.origin.kernel.Describe()},
                       {"leaves", leaves},
                       {"ops", ops},
                       {"bank", json::array({KernelJson(spec.kernel)})}};
    WriteOutput(ctx, m, "synth/" + spec.name + ".csv", SeriesCsv(ts.values));
    WriteOutput(ctx, m, "synth/" + spec.name + ".json", sidecar.dump(2) + "\n");
    streams[spec.name] = index[i];
    ctx.Log("synth: " + spec.name + " " + ts.origin.kernel.Describe());
  }
  m.seeds["streams"] = streams;
  WriteManifest(ctx.root, m);
}

void CmdTrain(const Context& ctx) {
  const Config& c = ctx.cfg;
  const RunManifest synth = SynthManifest(ctx);
  const auto tok = TokenizerFrom(c);
  const model::Hyper hyper = HyperFrom(c);
  const model::TrainConfig tcfg = TrainFrom(ctx);
  const std::size_t stride = c.Count("train.stride");
  ConfigCheck(stride >= 1, "train.stride", "must be positive");
  const std::vector<std::string> names = DatasetsOr(c, "train.datasets", SynthesizedNames(synth));
  ConfigCheck(!names.empty(), "train.datasets", "no datasets to train on");

  RunManifest m = NewManifest(ctx, "train");
  std::vector<model::Window> windows;
  std::vector<Series> loaded;
  for (const auto& name : names) {
    Series s = LoadSeries(ctx, synth, name);
    const std::size_t split = SplitIndex(c, s.values.size());
    auto w = model::MakeWindows(std::span<const double>(s.values).first(split), tok,
                                tcfg.context_length, tcfg.horizon, stride);
    windows.insert(windows.end(), w.begin(), w.end());
    m.inputs.push_back(s.entry);
    loaded.push_back(std::move(s));
  }
  ConfigCheck(!windows.empty(), "train.train_fraction",
              "leaves no complete T + L window in the training split");
  ctx.Log("train: " + std::to_string(windows.size()) + " windows, " +
          std::to_string(tcfg.steps) + " steps");
  const model::TrainResult result = model::Train(hyper, windows, tcfg);

  std::string curve = "step,loss\n";
  for (const auto& p : result.curve)
    curve += std::to_string(p.step) + "," + FormatDouble(p.loss) + "\n";
  json tensors = json::array({"embed"});
  for (std::size_t l = 1; l <= hyper.layer_count; ++l) {
    tensors.push_back("layer" + std::to_string(l) + ".query");
    tensors.push_back("layer" + std::to_string(l) + ".key");
  }
  // Mean of the last logged block; a single batch loss is too noisy.
  const double final_loss =
      result.curve.empty() ? result.step_losses.back() : result.curve.back().loss;
  const json meta{
      {"format", std::string(model::kCheckpointMagic)},
      {"version", model::kCheckpointVersion},
      {"hyper",
       {{"vocab_size", hyper.vocab_size},
        {"embed_dim", hyper.embed_dim},
        {"attn_dim", hyper.attn_dim},
        {"layer_count", hyper.layer_count}}},
      {"tokenizer", {{"vocab_size", tok.vocab_size()}, {"lo", tok.lo()}, {"hi", tok.hi()}}},
      {"train",
       {{"learning_rate", tcfg.learning_rate},
        {"steps", tcfg.steps},
        {"batch_size", tcfg.batch_size},
        {"context_length", tcfg.context_length},
        {"horizon", tcfg.horizon},
        {"log_every", tcfg.log_every},
        {"embed_init_scale", tcfg.embed_init_scale},
        {"train_fraction", c.Real("train.train_fraction")},
        {"stride", stride},
        {"seed", tcfg.seed}}},
      {"tensors", tensors},
      {"datasets", names},
      {"training_windows", windows.size()},
      {"parameter_count", result.params.ParameterCount()},
      {"initial_loss", result.initial_loss},
      {"final_loss", final_loss}};
  WriteOutput(ctx, m, "train/model.isop", model::SerializeCheckpoint(result.params));
  WriteOutput(ctx, m, "train/model.json", meta.dump(2) + "\n");
  WriteOutput(ctx, m, "train/loss_curve.csv", curve);
  for (const auto& s : loaded) {
    const std::size_t split = SplitIndex(c, s.values.size());
    const double scale = tokenizer::FitScale(std::span<const double>(s.values).first(split));
    const auto seq = tokenizer::Tokenize(s.values, tok, scale);
    std::string csv = "position,token_id\n";
    for (std::size_t i = 0; i < seq.tokens.size(); ++i)
      csv += std::to_string(i) + "," + std::to_string(seq.tokens[i]) + "\n";
    WriteOutput(ctx, m, "train/tokens_" + s.name + ".csv", csv);
  }
  m.seeds["init_stream"] = 0;
  m.seeds["batch_stream"] = 1;
  ctx.Log("train: loss " + FormatDouble(result.initial_loss) + " -> " + FormatDouble(final_loss));
  WriteManifest(ctx.root, m);
}

void CmdEmbed(const Context& ctx) {
  const Config& c = ctx.cfg;
  const Trained trained = LoadTrained(ctx);
  const RunManifest synth = SynthManifest(ctx);
  const auto tok = TokenizerFrom(c);
  const std::size_t t = c.Count("train.context_length");
  const std::size_t per = c.Count("embed.windows");
  ConfigCheck(per >= 1, "embed.windows", "must be positive");
  std::vector<std::uint32_t> layers;
  for (std::size_t l : c.CountList("embed.layers")) {
    ConfigCheck(l >= 1 && l <= trained.params.hyper.layer_count, "embed.layers",
                "layer " + std::to_string(l) + " out of range");
    layers.push_back(static_cast<std::uint32_t>(l));
  }

  RunManifest m = NewManifest(ctx, "embed");
  m.inputs = trained.entries;
  std::vector<std::vector<tokenizer::TokenId>> contexts;
  for (const auto& name : DatasetsOr(c, "embed.datasets", trained.datasets)) {
    const Series s = LoadSeries(ctx, synth, name);
    m.inputs.push_back(s.entry);
    Require(s.values.size() >= t, "embed: series '" + name + "' shorter than the context");
    const std::size_t span = s.values.size() - t;
    for (std::size_t k = 0; k < per; ++k) {
      const std::size_t start = per == 1 ? 0 : k * span / (per - 1);
      const auto ctx_values = std::span<const double>(s.values).subspan(start, t);
      contexts.push_back(
          tokenizer::Tokenize(ctx_values, tok, tokenizer::FitScale(ctx_values)).tokens);
    }
  }
  const isotropy::EmbeddingDump dump = model::DumpEmbeddings(trained.params, contexts, layers);
  WriteOutput(ctx, m, "embed/embeddings.isoemb", isotropy::SerializeDump(dump));
  ctx.Log("embed: " + std::to_string(dump.size()) + " records from " +
          std::to_string(contexts.size()) + " contexts");
  WriteManifest(ctx.root, m);
}

void CmdAnalyze(const Context& ctx) {
  const Config& c = ctx.cfg;
  const RunManifest em = ReadManifest(ctx.root, "embed");
  std::vector<std::string> prefixes = kModelPrefixes;
  prefixes.push_back("embed.");
  RequireSameConfig(em, ctx.snapshot, prefixes);
  const ArtifactEntry entry = VerifyArtifact(ctx.root, FindOutput(em, "embed/embeddings.isoemb"));
  const isotropy::EmbeddingDump dump =
      isotropy::ParseDump(io::ReadFile((ctx.root / entry.path).string()));

  isotropy::AnalyzeOptions opts;
  opts.pair_budget = c.Count("analyze.pair_budget");
  opts.k_min = c.Count("analyze.k_min");
  opts.k_max = c.Count("analyze.k_max");
  opts.silhouette_sample = c.Count("analyze.silhouette_sample");
  opts.seed = ctx.seed;
  opts.workers = ctx.workers;
  ConfigCheck(opts.pair_budget >= 1, "analyze.pair_budget", "must be positive");
  ConfigCheck(opts.k_min >= 2 && opts.k_min <= opts.k_max, "analyze.k_min",
              "need 2 <= analyze.k_min <= analyze.k_max");
  const std::vector<isotropy::LayerIsotropy> layers = isotropy::Analyze(dump, opts);

  RunManifest m = NewManifest(ctx, "analyze");
  m.inputs.push_back(entry);
  json jl = json::array();
  std::string plot = "layer,pc1,pc2,pc3,cluster_id,token_id\n";
  for (const auto& r : layers) {
    json by_k = json::array();
    for (const auto& [k, s] : r.silhouette_by_k) by_k.push_back({{"k", k}, {"mean", s}});
    jl.push_back(
        {{"layer", r.layer},
         {"records", r.records},
         {"tokens", r.tokens},
         {"d08", r.d08},
         {"d09", r.d09},
         {"pca_degenerate", r.pca_degenerate},
         {"explained_ratio", r.explained_ratio},
         {"zeta_cos", CosineJson(r.zeta_cos)},
         {"clusters",
          {{"k", r.cluster_count},
           {"mean_silhouette", r.mean_silhouette},
           {"low_silhouette", r.low_silhouette},
           {"silhouette_by_k", by_k}}},
         {"zeta_prime",
          {{"value", r.zeta_prime.value},
           {"per_cluster", r.zeta_prime.per_cluster},
           {"clusters_used", r.zeta_prime.clusters_used},
           {"clusters_skipped", r.zeta_prime.clusters_skipped},
           {"zero_vectors_excluded", r.zeta_prime.zero_vectors_excluded}}},
         {"isotropy_partition",
          {{"value", r.isotropy_partition}, {"degenerate", r.partition_degenerate}}}});
    for (std::size_t i = 0; i < r.records; ++i) {
      plot += std::to_string(r.layer);
      for (std::size_t k = 0; k < 3; ++k)
        plot += "," + FormatDouble(k < r.pca3.cols() ? r.pca3(i, k) : 0.0);
      plot += "," + std::to_string(r.assignment[i]) + "," + std::to_string(r.token_ids[i]) + "\n";
    }
    ctx.Log("analyze: layer " + std::to_string(r.layer) + " d(0.8)=" + std::to_string(r.d08) +
            " zeta_cos=" + FormatDouble(r.zeta_cos.value) + " k=" +
            std::to_string(r.cluster_count) + " zeta_prime=" + FormatDouble(r.zeta_prime.value) +
            " I=" + FormatDouble(r.isotropy_partition));
  }
  const json report{{"schema_version", kReportSchemaVersion},
                    {"section", "isotropy"},
                    {"seed", ctx.seed},
                    {"embedding_dim", dump.dim()},
                    {"layers", jl}};
  WriteOutput(ctx, m, "analyze/isotropy.json", report.dump(2) + "\n");
  WriteOutput(ctx, m, "analyze/pca_plot.csv", plot);
  m.seeds["layer_streams"] = "stream id = layer";
  WriteManifest(ctx.root, m);
}

void CmdVerify(const Context& ctx) {
  const Config& c = ctx.cfg;
  const Trained trained = LoadTrained(ctx);
  const RunManifest synth = SynthManifest(ctx);
  const auto tok = TokenizerFrom(c);
  const std::size_t t = c.Count("train.context_length");
  const std::size_t l = c.Count("train.horizon");
  const std::size_t per = c.Count("verify.windows");
  const std::size_t heads = c.Count("verify.heads");
  ConfigCheck(per >= 1, "verify.windows", "must be positive");
  ConfigCheck(heads >= 1, "verify.heads", "must be positive");

  RunManifest m = NewManifest(ctx, "verify");
  m.inputs = trained.entries;
  std::vector<model::Window> windows;
  for (const auto& name : trained.datasets) {
    const Series s = LoadSeries(ctx, synth, name);
    m.inputs.push_back(s.entry);
    // Held-out windows when the split leaves room, else the whole series.
    const std::size_t split = SplitIndex(c, s.values.size());
    const std::size_t begin = split >= t && s.values.size() - (split - t) >= t + l ? split - t : 0;
    const auto all = model::MakeWindows(std::span<const double>(s.values).subspan(begin), tok, t, l);
    Require(!all.empty(), "verify: series '" + name + "' shorter than T + L");
    const std::size_t take = std::min(per, all.size());
    for (std::size_t k = 0; k < take; ++k)
      windows.push_back(all[take == 1 ? 0 : k * (all.size() - 1) / (take - 1)]);
  }

  const auto positions = theory::CollectPositions(trained.params, windows, t);
  RngStream shift_stream(ctx.seed, kShiftStream);
  const theory::ShiftSuite shift = theory::RunShiftSuite(positions, heads, shift_stream);

  const std::size_t bound_n = c.Count("verify.bound_instances");
  const std::size_t max_n = c.Count("verify.bound_max_n");
  const std::size_t max_dim = c.Count("verify.bound_max_dim");
  const double max_norm = c.Real("verify.bound_max_norm");
  ConfigCheck(max_n >= 2, "verify.bound_max_n", "must be at least 2");
  ConfigCheck(max_dim >= 2, "verify.bound_max_dim", "must be at least 2");
  ConfigCheck(max_norm > 0.0, "verify.bound_max_norm", "must be positive");
  const theory::BoundSuite bound = theory::RunBoundSuite(
      bound_n, max_n, max_dim, max_norm, RngStream(ctx.seed, kBoundStream), ctx.workers);

  const std::size_t lambda_n = c.Count("verify.lambda_instances");
  const std::size_t lmax_n = c.Count("verify.lambda_max_n");
  const std::size_t lmax_dim = c.Count("verify.lambda_max_dim");
  const std::size_t starts = c.Count("verify.descent_starts");
  ConfigCheck(lmax_dim >= 2, "verify.lambda_max_dim", "must be at least 2");
  ConfigCheck(starts >= 1, "verify.descent_starts", "must be positive");
  const theory::LambdaSuite lambda = theory::RunLambdaSuite(
      lambda_n, lmax_n, lmax_dim, starts, RngStream(ctx.seed, kLambdaStream), ctx.workers);

  const theory::ApproxSuite approx = theory::RunApproxSuite(
      c.Count("verify.approx_instances"), theory::kDefaultRhoSweep,
      RngStream(ctx.seed, kApproxStream));

  const theory::IsotropyPartition iso = theory::IsotropyFromPartition(trained.params.embed);
  const bool iso_ok = iso.value > 0.0 && iso.value <= 1.0;

  json bound_cases = json::array();
  for (const auto& k : bound.cases)
    bound_cases.push_back({{"n", k.n},
                           {"dim", k.dim},
                           {"lambda_norm", k.lambda_norm},
                           {"bound", k.bound},
                           {"main_text_bound", k.main_text_bound},
                           {"measured", k.measured},
                           {"margin", k.margin}});
  json lambda_cases = json::array();
  for (const auto& k : lambda.cases)
    lambda_cases.push_back({{"n", k.n},
                            {"dim", k.dim},
                            {"rank", k.rank},
                            {"objective", k.objective},
                            {"trailing_sum", k.trailing_sum},
                            {"relative_error", k.relative_error},
                            {"descent_objective", k.descent_objective},
                            {"descent_improvement", k.descent_improvement}});

  json checks{
      {"theorem1_shift",
       {{"passed", shift.passed},
        {"gating", true},
        {"heads", shift.heads},
        {"heads_passed", shift.heads_passed},
        {"positions", shift.positions},
        {"windows", windows.size()},
        {"max_total_variation", shift.max_total_variation},
        {"max_loss_difference", shift.max_loss_difference},
        {"max_relu_argument", shift.max_relu_argument},
        {"max_abs_shifted_downstream", shift.max_abs_shifted_downstream},
        {"tolerance", theory::kShiftTolerance},
        {"vocab_size", trained.params.hyper.vocab_size},
        {"seed", ctx.seed},
        {"stream_id", kShiftStream}}},
      {"lemma1_bound",
       {{"passed", bound.passed},
        {"gating", true},
        {"instances", bound.cases.size()},
        {"holds", bound.holds},
        {"main_text_holds", bound.main_text_holds},
        {"min_margin", bound.cases.empty() ? 0.0 : bound.min_margin},
        {"tolerance", theory::kBoundMarginTolerance},
        {"max_n", max_n},
        {"max_dim", max_dim},
        {"max_norm", max_norm},
        {"seed", ctx.seed},
        {"stream_id", kBoundStream},
        {"cases", bound_cases}}},
      {"theorem2_optimal_lambda",
       {{"passed", lambda.passed},
        {"gating", true},
        {"instances", lambda.cases.size()},
        {"max_relative_error", lambda.max_relative_error},
        {"max_descent_improvement", lambda.max_descent_improvement},
        {"relative_tolerance", theory::kLambdaRelativeTolerance},
        {"descent_tolerance", theory::kDescentTolerance},
        {"descent_starts", starts},
        {"max_n", lmax_n},
        {"max_dim", lmax_dim},
        {"seed", ctx.seed},
        {"stream_id", kLambdaStream},
        {"cases", lambda_cases}}},
      {"isotropy_partition",
       {{"passed", iso_ok},
        {"gating", true},
        {"value", iso.value},
        {"degenerate", iso.degenerate},
        {"vocab_size", trained.params.embed.rows()},
        {"embed_dim", trained.params.embed.cols()}}},
      {"small_lambda_approx",
       {{"passed", approx.monotone == approx.cases.size()},
        {"gating", false},
        {"instances", approx.cases.size()},
        {"monotone", approx.monotone},
        {"centering_helps", approx.centering_helps},
        {"rhos", theory::kDefaultRhoSweep},
        {"seed", ctx.seed},
        {"stream_id", kApproxStream}}}};

  std::vector<std::string> failing;
  for (const auto& [name, check] : checks.items())
    if (check.at("gating").get<bool>() && !check.at("passed").get<bool>()) failing.push_back(name);
  const json report{{"schema_version", kReportSchemaVersion},
                    {"section", "verification"},
                    {"passed", failing.empty()},
                    {"failing", failing},
                    {"checks", checks}};
  WriteOutput(ctx, m, "verify/verify.json", report.dump(2) + "\n");
  m.seeds["streams"] = {{"theorem1_shift", kShiftStream},
                        {"lemma1_bound", kBoundStream},
                        {"theorem2_optimal_lambda", kLambdaStream},
                        {"small_lambda_approx", kApproxStream}};
  WriteManifest(ctx.root, m);
  for (const auto& [name, check] : checks.items())
    ctx.Log(std::string("verify: ") +
            (check.at("passed").get<bool>() ? "PASS " : check.at("gating").get<bool>() ? "FAIL " : "WARN ") +
            name);
  if (!failing.empty()) {
    std::string names;
    for (const auto& f : failing) names += (names.empty() ? "" : ", ") + f;
    Fail(ErrorCode::kCheckFailed, "failing checks: " + names);
  }
}

json SweepSummary(const eval::SweepConfig& cfg, const std::vector<eval::SweepRow>& rows) {
  json rj = json::array();
  for (const auto& r : rows) rj.push_back(RowJson(r));
  json means = json::array();
  for (double v : cfg.values) {
    double nmse = 0.0, naive = 0.0, zeta = 0.0;
    std::size_t count = 0, zeta_count = 0;
    for (const auto& r : rows) {
      if (r.value != v) continue;
      nmse += r.nmse;
      naive += r.naive_nmse;
      ++count;
      if (!std::isnan(r.zeta_prime)) {
        zeta += std::abs(r.zeta_prime);
        ++zeta_count;
      }
    }
    means.push_back({{"value", v},
                     {"mean_nmse", count ? nmse / count : 0.0},
                     {"mean_naive_nmse", count ? naive / count : 0.0},
                     {"mean_abs_zeta_prime", zeta_count ? zeta / zeta_count : 0.0},
                     {"rows", count}});
  }
  json verdicts = json::array();
  for (const auto& v : eval::DirectionalChecks(rows, cfg.variable))
    verdicts.push_back({{"name", v.name},
                        {"description", v.description},
                        {"agree", v.agree},
                        {"total", v.total},
                        {"fraction", v.fraction},
                        {"threshold", v.threshold},
                        {"passed", v.passed}});
  return {{"values", cfg.values},
          {"repetitions", cfg.repetitions},
          {"base_seed", cfg.base_seed},
          {"means", means},
          {"verdicts", verdicts},
          {"rows", rj}};
}

void CmdEval(const Context& ctx) {
  const Config& c = ctx.cfg;
  const Trained trained = LoadTrained(ctx);
  const RunManifest synth = SynthManifest(ctx);

  eval::EvalSetup setup;
  setup.params = trained.params;
  setup.tokenizer = TokenizerFrom(c);
  setup.context_length = c.Count("train.context_length");
  setup.horizon = c.Count("train.horizon");
  setup.eval_windows = c.Count("eval.windows");
  setup.sample_count = c.Count("eval.samples");
  setup.analysis.pair_budget = c.Count("analyze.pair_budget");
  setup.analysis.k_min = c.Count("analyze.k_min");
  setup.analysis.k_max = c.Count("analyze.k_max");
  setup.analysis.silhouette_sample = c.Count("eval.silhouette_sample");
  ConfigCheck(setup.eval_windows >= 1, "eval.windows", "must be positive");
  ConfigCheck(setup.sample_count >= 1, "eval.samples", "must be positive");

  RunManifest m = NewManifest(ctx, "eval");
  m.inputs = trained.entries;
  std::size_t eval_begin = 0;
  for (const auto& name : DatasetsOr(c, "eval.datasets", trained.datasets)) {
    Series s = LoadSeries(ctx, synth, name);
    m.inputs.push_back(s.entry);
    eval_begin = std::max(eval_begin, SplitIndex(c, s.values.size()));
    setup.series.push_back({name, std::move(s.values)});
  }
  setup.eval_begin = eval_begin;

  eval::SweepConfig base;
  base.repetitions = c.Count("eval.repetitions");
  base.base_seed = ctx.seed;
  base.workers = ctx.workers;
  ConfigCheck(base.repetitions >= 1, "eval.repetitions", "must be positive");

  eval::SweepConfig lengths = base;
  lengths.variable = eval::SweepVariable::kContextLength;
  for (std::size_t v : c.CountList("eval.context_lengths")) {
    ConfigCheck(v >= 2 && v <= setup.context_length, "eval.context_lengths",
                "values must be in [2, train.context_length]");
    lengths.values.push_back(static_cast<double>(v));
  }
  ConfigCheck(lengths.values.size() >= 2, "eval.context_lengths", "need at least two values");
  eval::SweepConfig noise = base;
  noise.variable = eval::SweepVariable::kNoiseSigma;
  noise.values = c.RealList("eval.noise_levels");
  ConfigCheck(noise.values.size() >= 2, "eval.noise_levels", "need at least two values");
  for (double v : noise.values) ConfigCheck(v >= 0.0, "eval.noise_levels", "values must be >= 0");

  const auto length_rows = eval::RunSweep(setup, lengths);
  const auto noise_rows = eval::RunSweep(setup, noise);
  WriteOutput(ctx, m, "eval/sweep_context_length.csv", eval::SweepCsv(length_rows));
  WriteOutput(ctx, m, "eval/sweep_noise.csv", eval::SweepCsv(noise_rows));
  const json summary{
      {"schema_version", kReportSchemaVersion},
      {"section", "evaluation"},
      {"note", "directional trends from a small model; absolute values are not comparable "
               "to large pretrained forecasters"},
      {"datasets", json::array()},
      {"eval_begin", eval_begin},
      {"windows", setup.eval_windows},
      {"samples", setup.sample_count},
      {"sweeps",
       {{"context_length", SweepSummary(lengths, length_rows)},
        {"noise_sigma", SweepSummary(noise, noise_rows)}}}};
  json with_names = summary;
  for (const auto& s : setup.series) with_names["datasets"].push_back(s.name);
  WriteOutput(ctx, m, "eval/eval_summary.json", with_names.dump(2) + "\n");
  for (const auto* sweep : {&with_names["sweeps"]["context_length"], &with_names["sweeps"]["noise_sigma"]})
    for (const auto& v : sweep->at("verdicts"))
      ctx.Log("eval: " + v.at("name").get<std::string>() + " " +
              std::to_string(v.at("agree").get<std::size_t>()) + "/" +
              std::to_string(v.at("total").get<std::size_t>()) +
              (v.at("passed").get<bool>() ? " (holds)" : " (does not hold)"));
  m.seeds["rows"] = "seed = master + repetition index";
  WriteManifest(ctx.root, m);
}

void CmdReport(const Context& ctx) {
  std::vector<std::string> runs = ctx.cfg.StrList("report.runs");
  if (runs.empty()) runs.push_back(ctx.root.string());

  struct Section {
    const char* command;
    const char* file;
    const char* key;
  };
  static constexpr Section kSections[] = {{"analyze", "isotropy.json", "isotropy"},
                                          {"verify", "verify.json", "verification"},
                                          {"eval", "eval_summary.json", "evaluation"}};
  static constexpr const char* kPlots[][2] = {{"analyze", "pca_plot.csv"},
                                              {"eval", "sweep_context_length.csv"},
                                              {"eval", "sweep_noise.csv"}};

  RunManifest m = NewManifest(ctx, "report");
  json merged_runs = json::array();
  std::set<int> versions;
  std::size_t sections = 0;
  std::vector<std::pair<std::string, std::string>> plots;  // (output name, contents)
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path root(runs[i]);
    json run{{"run", i}};
    for (const auto& sec : kSections) {
      if (!fs::exists(root / sec.command / "manifest.json")) continue;
      const RunManifest sm = ReadManifest(root, sec.command);
      const std::string rel = std::string(sec.command) + "/" + sec.file;
      ArtifactEntry entry = VerifyArtifact(root, FindOutput(sm, rel));
      json doc = ParseJsonFile(root / rel);
      if (!doc.contains("schema_version") || !doc.at("schema_version").is_number_integer())
        Fail(ErrorCode::kMergeRefused, (root / rel).string() + ": no schema_version");
      versions.insert(doc.at("schema_version").get<int>());
      run["seed"] = sm.config.at("seed");
      run[sec.key] = std::move(doc);
      ++sections;
      entry.path = (root / rel).lexically_normal().generic_string();
      m.inputs.push_back(entry);
    }
    for (const auto& plot : kPlots) {
      const fs::path p = root / plot[0] / plot[1];
      if (!fs::exists(p)) continue;
      const std::string stem = fs::path(plot[1]).stem().string();
      plots.emplace_back("report/" + stem + "_run" + std::to_string(i) + ".csv",
                         io::ReadFile(p.string()));
    }
    merged_runs.push_back(std::move(run));
  }
  if (sections == 0)
    Fail(ErrorCode::kMissingInput, "report: no completed analyze, verify or eval outputs");
  if (versions.size() > 1 || *versions.begin() != kReportSchemaVersion)
    Fail(ErrorCode::kMergeRefused, "report: sections carry conflicting schema versions");

  const json report{{"schema_version", kReportSchemaVersion},
                    {"tool", kToolName},
                    {"tool_version", kToolVersion},
                    {"runs", merged_runs}};
  WriteOutput(ctx, m, "report/report.json", report.dump(2) + "\n");
  for (const auto& [name, contents] : plots) WriteOutput(ctx, m, name, contents);
  ctx.Log("report: merged " + std::to_string(sections) + " sections from " +
          std::to_string(runs.size()) + " run(s)");
  WriteManifest(ctx.root, m);
}

}  // namespace

const std::vector<std::string>& CommandNames() {
  static const std::vector<std::string> names = {"synth",  "train", "embed", "analyze",
                                                 "verify", "eval",  "report"};
  return names;
}

Config ResolveConfig(const CommandOptions& options) {
  Config cfg = options.config_path.empty() ? Config() : Config::Load(options.config_path);
  for (const auto& o : options.overrides) cfg.Override(o);
  if (options.seed) cfg.Set("seed", *options.seed);
  if (options.out) cfg.Set("out", *options.out);
  if (options.workers) cfg.Set("workers", *options.workers);
  return cfg;
}

int ResolveWorkers(const Config& config, const std::optional<int>& flag) {
  if (flag) {
    Require(*flag >= 1, "--workers must be at least 1");
    return *flag;
  }
  const std::int64_t w = config.Int("workers");
  ConfigCheck(w >= 0, "workers", "must be non-negative");
  if (w > 0) return static_cast<int>(w);
  if (const char* env = std::getenv("ISOPROBE_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      Fail(ErrorCode::kConfigError, "ISOPROBE_WORKERS: expected a positive integer");
    return static_cast<int>(v);
  }
  return 1;
}

void RunCommand(const std::string& command, const CommandOptions& options) {
  const auto& names = CommandNames();
  if (std::find(names.begin(), names.end(), command) == names.end())
    Fail(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
  Context ctx;
  ctx.cfg = ResolveConfig(options);
  ctx.workers = ResolveWorkers(ctx.cfg, options.workers);
  // Worker count never changes outputs, so it is left out of the snapshot.
  ctx.cfg.Set("workers", 0);
  ctx.snapshot = ctx.cfg.Snapshot();
  ctx.seed = ctx.cfg.Seed("seed");
  ctx.root = fs::path(ctx.cfg.Str("out"));
  ConfigCheck(!ctx.root.empty(), "out", "must not be empty");
  ctx.log = options.log;
  try {
    if (command == "synth") CmdSynth(ctx);
    else if (command == "train") CmdTrain(ctx);
    else if (command == "embed") CmdEmbed(ctx);
    else if (command == "analyze") CmdAnalyze(ctx);
    else if (command == "verify") CmdVerify(ctx);
    else if (command == "eval") CmdEval(ctx);
    else CmdReport(ctx);
  } catch (const fs::filesystem_error& e) {
    Fail(ErrorCode::kIoError, e.what());
  } catch (const json::exception& e) {
    Fail(ErrorCode::kStaleArtifact, std::string("malformed artifact: ") + e.what());
  }
}

}  // namespace isoprobe::pipeline
