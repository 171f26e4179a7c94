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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "doctest.h"
#include "error.hpp"
#include "isotropy_fixtures.hpp"
#include "manifest.hpp"
#include "pipeline.hpp"
#include "temp_dir.hpp"

using namespace isoprobe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kTiny = {
    "synth.datasets=[seasonality1, trend1]",
    "synth.length=96",
    "tokenizer.vocab_size=32",
    "model.embed_dim=8",
    "model.attn_dim=4",
    "train.steps=20",
    "train.batch_size=4",
    "train.context_length=8",
    "train.horizon=2",
    "train.log_every=5",
    "embed.windows=6",
    "analyze.k_max=4",
    "analyze.pair_budget=200",
    "analyze.silhouette_sample=50",
    "verify.heads=5",
    "verify.windows=3",
    "verify.bound_instances=20",
    "verify.lambda_instances=10",
    "verify.descent_starts=3",
    "verify.approx_instances=10",
    "eval.context_lengths=[8, 4]",
    "eval.repetitions=2",
    "eval.windows=3",
    "eval.samples=3",
    "eval.silhouette_sample=50",
};

pipeline::CommandOptions Options(const fs::path& out, std::vector<std::string> extra = {}) {
  pipeline::CommandOptions o;
  o.overrides = kTiny;
  o.overrides.insert(o.overrides.end(), extra.begin(), extra.end());
  o.out = out.string();
  o.seed = 5;
  o.log = [](const std::string&) {};
  return o;
}

ErrorCode Run(const std::string& cmd, const pipeline::CommandOptions& o) {
  try {
    pipeline::RunCommand(cmd, o);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

void RunAll(const fs::path& out) {
  for (const auto& cmd : pipeline::CommandNames()) REQUIRE(Run(cmd, Options(out)) == ErrorCode::kOk);
}

std::map<std::string, std::string> OutputHashes(const fs::path& root) {
  std::map<std::string, std::string> h;
  for (const auto& cmd : pipeline::CommandNames()) {
    if (cmd == "report") continue;  // report inputs name absolute run roots
    for (const auto& e : ReadManifest(root, cmd).outputs) h[e.path] = e.sha256;
  }
  return h;
}

json ReadJson(const fs::path& p) { return json::parse(io::ReadFile(p.string())); }

// Rewrites one artifact and refreshes its manifest hash, as a foreign tool would.
void Replace(const fs::path& root, const std::string& command, const std::string& rel,
             const std::string& contents) {
  io::WriteFileAtomic((root / rel).string(), contents);
  RunManifest m = ReadManifest(root, command);
  WriteManifest(root, m);
}

}  // namespace

TEST_CASE("command list") {
  CHECK(pipeline::CommandNames() ==
        std::vector<std::string>{"synth", "train", "embed", "analyze", "verify", "eval", "report"});
  testing::TempDir dir("cmd");
  CHECK(Run("fly", Options(dir.path())) == ErrorCode::kInvalidArgument);
}

TEST_CASE("full pipeline is deterministic and the report merges verbatim") {
  testing::TempDir a("pipe_a"), b("pipe_b");
  RunAll(a.path());
  // Second run reuses the first run's recorded configuration.
  pipeline::CommandOptions o;
  o.config_path = (a / "train/manifest.json").string();
  o.out = b.path().string();
  o.log = [](const std::string&) {};
  for (const auto& cmd : pipeline::CommandNames()) REQUIRE(Run(cmd, o) == ErrorCode::kOk);
  const auto ha = OutputHashes(a.path());
  CHECK(ha.size() > 10);
  CHECK(ha == OutputHashes(b.path()));
  CHECK(io::ReadFile((a / "report/report.json").string()) ==
        io::ReadFile((b / "report/report.json").string()));

  const json report = ReadJson(a / "report/report.json");
  CHECK(report.at("schema_version") == pipeline::kReportSchemaVersion);
  REQUIRE(report.at("runs").size() == 1);
  const json& run = report.at("runs")[0];
  CHECK(run.at("seed") == 5);
  CHECK(run.at("isotropy") == ReadJson(a / "analyze/isotropy.json"));
  CHECK(run.at("verification") == ReadJson(a / "verify/verify.json"));
  CHECK(run.at("evaluation") == ReadJson(a / "eval/eval_summary.json"));
  CHECK(run.at("verification").at("passed") == true);
  CHECK(io::ReadFile((a / "report/pca_plot_run0.csv").string()) ==
        io::ReadFile((a / "analyze/pca_plot.csv").string()));

  SUBCASE("merging two runs") {
    pipeline::CommandOptions m = Options(a.path(), {"report.runs=[\"" + a.path().string() +
                                                    "\", \"" + b.path().string() + "\"]"});
    REQUIRE(Run("report", m) == ErrorCode::kOk);
    const json merged = ReadJson(a / "report/report.json");
    REQUIRE(merged.at("runs").size() == 2);
    CHECK(merged.at("runs")[0].at("isotropy") == merged.at("runs")[1].at("isotropy"));
    CHECK(fs::exists(a / "report/sweep_noise_run1.csv"));

    json iso = ReadJson(b / "analyze/isotropy.json");
    iso["schema_version"] = 2;
    Replace(b.path(), "analyze", "analyze/isotropy.json", iso.dump(2));
    CHECK(Run("report", m) == ErrorCode::kMergeRefused);
    iso.erase("schema_version");
    Replace(b.path(), "analyze", "analyze/isotropy.json", iso.dump(2));
    CHECK(Run("report", m) == ErrorCode::kMergeRefused);
  }
  SUBCASE("changed inputs are detected") {
    const fs::path csv = a / "synth/trend1.csv";
    io::WriteFileAtomic(csv.string(), io::ReadFile(csv.string()) + "96,0.5\n");
    CHECK(Run("train", Options(a.path())) == ErrorCode::kStaleArtifact);
    fs::remove(csv);
    CHECK(Run("train", Options(a.path())) == ErrorCode::kMissingInput);
    io::WriteFileAtomic((a / "train/model.isop").string(), "junk");
    CHECK(Run("embed", Options(a.path())) == ErrorCode::kStaleArtifact);
    io::WriteFileAtomic((a / "analyze/isotropy.json").string(), "{}");
    CHECK(Run("report", Options(a.path())) == ErrorCode::kStaleArtifact);
  }
  SUBCASE("config drift is detected") {
    CHECK(Run("train", Options(a.path(), {"synth.length=80"})) == ErrorCode::kStaleArtifact);
    CHECK(Run("analyze", Options(a.path(), {"embed.windows=7"})) == ErrorCode::kStaleArtifact);
    CHECK(Run("analyze", Options(a.path(), {"analyze.k_max=5"})) == ErrorCode::kOk);
    pipeline::CommandOptions reseeded = Options(a.path());
    reseeded.seed = 6;
    CHECK(Run("embed", reseeded) == ErrorCode::kStaleArtifact);
  }
}

TEST_CASE("missing upstream outputs") {
  testing::TempDir dir("missing");
  for (const char* cmd : {"train", "embed", "analyze", "verify", "eval", "report"})
    CHECK(Run(cmd, Options(dir.path())) == ErrorCode::kMissingInput);
}

TEST_CASE("config errors surface before any work") {
  testing::TempDir dir("cfgerr");
  CHECK(Run("synth", Options(dir.path(), {"synth.datasets=[nowhere]"})) == ErrorCode::kConfigError);
  CHECK(Run("synth", Options(dir.path(), {"synth.datasets=[trend1, trend1]"})) ==
        ErrorCode::kConfigError);
  CHECK(Run("synth", Options(dir.path(), {"bogus.key=1"})) == ErrorCode::kConfigError);
  CHECK_FALSE(fs::exists(dir / "synth/manifest.json"));
  REQUIRE(Run("synth", Options(dir.path())) == ErrorCode::kOk);
  REQUIRE(Run("train", Options(dir.path())) == ErrorCode::kOk);
  CHECK(Run("eval", Options(dir.path(), {"eval.context_lengths=[8, 1]"})) == ErrorCode::kConfigError);
  CHECK(Run("eval", Options(dir.path(), {"eval.context_lengths=[8, 16]"})) == ErrorCode::kConfigError);
  CHECK(Run("eval", Options(dir.path(), {"eval.noise_levels=[0]"})) == ErrorCode::kConfigError);
  CHECK(Run("embed", Options(dir.path(), {"embed.layers=[3]"})) == ErrorCode::kConfigError);
  CHECK(Run("analyze", Options(dir.path(), {"analyze.k_min=1"})) == ErrorCode::kMissingInput);
}

TEST_CASE("worker resolution") {
  Config c;
  CHECK(pipeline::ResolveWorkers(c, 3) == 3);
  CHECK_THROWS_AS(pipeline::ResolveWorkers(c, 0), Error);
  c.Override("workers=2");
  CHECK(pipeline::ResolveWorkers(c, std::nullopt) == 2);
}

TEST_CASE("worker count does not change outputs") {
  testing::TempDir a("w1"), b("w3");
  for (const char* cmd : {"synth", "train", "embed", "analyze"}) {
    auto oa = Options(a.path());
    oa.workers = 1;
    auto ob = Options(b.path());
    ob.workers = 3;
    REQUIRE(Run(cmd, oa) == ErrorCode::kOk);
    REQUIRE(Run(cmd, ob) == ErrorCode::kOk);
  }
  for (const char* rel : {"train/model.isop", "embed/embeddings.isoemb", "analyze/isotropy.json"})
    CHECK(Sha256File(a / rel) == Sha256File(b / rel));
}

TEST_CASE("analysis recovers a planted four-dimensional layer") {
  RngStream s(21, 0);
  const auto x = fixture::PlantedDirections(3000, 16, 4, 5.0, 0.3, s);
  const auto dump = fixture::DumpFromRows(x, 60);
  isotropy::AnalyzeOptions opts;
  opts.k_max = 4;
  opts.silhouette_sample = 300;
  opts.pair_budget = 500;
  const auto layers = isotropy::Analyze(dump, opts);
  REQUIRE(layers.size() == 1);
  CHECK(layers[0].d08 == 4);
  CHECK(layers[0].records == 3000);
  CHECK(layers[0].tokens == 60);
}
