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
#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "config.hpp"
#include "doctest.h"
#include "error.hpp"
#include "manifest.hpp"
#include "temp_dir.hpp"

using namespace isoprobe;
using nlohmann::json;

namespace {

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

}  // namespace

TEST_CASE("config defaults cover the whole schema") {
  const Config c;
  const json snap = c.Snapshot();
  CHECK(snap.size() == ConfigSchema().size());
  CHECK(c.Seed("seed") == 1);
  CHECK(c.Count("tokenizer.vocab_size") == 512);
  CHECK(c.RealList("eval.noise_levels") == std::vector<double>{0.0, 0.05});
  CHECK(c.StrList("synth.datasets").empty());
  CHECK_FALSE(c.IsExplicit("seed"));
}

TEST_CASE("config text form") {
  const Config c = Config::Parse(
      "# leading comment\n"
      "seed = 7\n"
      "out = \"runs/x # not a comment\"\n"
      "[train]\n"
      "steps = 200   # trailing\n"
      "learning_rate = 1e-2\n"
      "\n"
      "[synth]\n"
      "datasets = [\"trend1\", seasonality2]\n"
      "standardize = false\n");
  CHECK(c.Seed("seed") == 7);
  CHECK(c.Str("out") == "runs/x # not a comment");
  CHECK(c.Count("train.steps") == 200);
  CHECK(c.Real("train.learning_rate") == doctest::Approx(0.01));
  CHECK(c.StrList("synth.datasets") == std::vector<std::string>{"trend1", "seasonality2"});
  CHECK_FALSE(c.Bool("synth.standardize"));
  CHECK(c.IsExplicit("train.steps"));
  CHECK_FALSE(c.IsExplicit("train.horizon"));
}

TEST_CASE("config errors are config errors") {
  const char* bad[] = {"nope = 1\n",           "[train]\nsteps = \n",     "seed 7\n",
                       "[train\nsteps = 1\n",  "seed = 1\nseed = 2\n",    "out = \"open\n",
                       "[eval]\nnoise_levels = [0, 1\n"};
  for (const char* text : bad) CHECK(CodeOf([&] { Config::Parse(text); }) == ErrorCode::kConfigError);
  const Config typed = Config::Parse("[train]\nsteps = \"many\"\nlearning_rate = -1\n");
  CHECK(CodeOf([&] { typed.Count("train.steps"); }) == ErrorCode::kConfigError);
  const Config neg = Config::Parse("[train]\nsteps = -3\n");
  CHECK(CodeOf([&] { neg.Count("train.steps"); }) == ErrorCode::kConfigError);
}

TEST_CASE("config overrides") {
  Config c;
  c.Override("train.steps=12");
  c.Override("eval.context_lengths = [8, 4]");
  CHECK(c.Count("train.steps") == 12);
  CHECK(c.CountList("eval.context_lengths") == std::vector<std::size_t>{8, 4});
  CHECK(CodeOf([&] { c.Override("train.steps"); }) == ErrorCode::kConfigError);
  CHECK(CodeOf([&] { c.Override("train.nothing=1"); }) == ErrorCode::kConfigError);
}

TEST_CASE("config section and snapshot round trip") {
  Config c = Config::Parse("seed = 3\n[model]\nlayers = 4\n");
  const json section = c.Section("model.");
  CHECK(section.at("seed") == 3);
  CHECK(section.at("model.layers") == 4);
  CHECK_FALSE(section.contains("train.steps"));
  const Config back = Config::FromJson(c.Snapshot());
  CHECK(back.Snapshot() == c.Snapshot());
}

TEST_CASE("config loads from a run manifest") {
  testing::TempDir dir("config");
  Config c = Config::Parse("seed = 9\n[train]\nsteps = 33\n");
  RunManifest m;
  m.command = "train";
  m.config = c.Snapshot();
  m.seeds = json::object();
  WriteManifest(dir.path(), m);
  const Config loaded = Config::Load((dir / "train/manifest.json").string());
  CHECK(loaded.Snapshot() == c.Snapshot());
  io::WriteFileAtomic((dir / "c.conf").string(), "seed = 4\n");
  CHECK(Config::Load((dir / "c.conf").string()).Seed("seed") == 4);
  io::WriteFileAtomic((dir / "bad.json").string(), "{\"x\": 1}");
  CHECK(CodeOf([&] { Config::Load((dir / "bad.json").string()); }) == ErrorCode::kConfigError);
}

TEST_CASE("sha256 test vectors") {
  CHECK(Sha256Hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256Hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(Sha256Hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("manifest round trip and artifact checks") {
  testing::TempDir dir("manifest");
  io::WriteFileAtomic((dir / "synth/a.csv").string(), "index,value\n0,1\n");
  RunManifest m;
  m.command = "synth";
  m.config = Config().Snapshot();
  m.seeds = {{"a", 0}};
  m.outputs.push_back({"synth/a.csv", ""});
  WriteManifest(dir.path(), m);
  const RunManifest r = ReadManifest(dir.path(), "synth");
  CHECK(r.command == "synth");
  CHECK(r.config == m.config);
  REQUIRE(r.outputs.size() == 1);
  CHECK(r.outputs[0].sha256 == Sha256Hex("index,value\n0,1\n"));
  CHECK_NOTHROW(VerifyArtifact(dir.path(), r.outputs[0]));

  io::WriteFileAtomic((dir / "synth/a.csv").string(), "index,value\n0,2\n");
  CHECK(CodeOf([&] { VerifyArtifact(dir.path(), r.outputs[0]); }) == ErrorCode::kStaleArtifact);
  std::filesystem::remove(dir / "synth/a.csv");
  CHECK(CodeOf([&] { VerifyArtifact(dir.path(), r.outputs[0]); }) == ErrorCode::kMissingInput);
  CHECK(CodeOf([&] { ReadManifest(dir.path(), "train"); }) == ErrorCode::kMissingInput);

  io::WriteFileAtomic((dir / "synth/manifest.json").string(), "{ not json");
  CHECK(CodeOf([&] { ReadManifest(dir.path(), "synth"); }) == ErrorCode::kStaleArtifact);
  json wrong = m.ToJson();
  wrong["schema_version"] = 99;
  CHECK(CodeOf([&] { RunManifest::FromJson(wrong); }) == ErrorCode::kStaleArtifact);
}

TEST_CASE("upstream config must agree on relevant keys") {
  Config up;
  RunManifest m;
  m.command = "synth";
  m.config = up.Snapshot();
  Config now;
  now.Override("train.steps=7");
  CHECK_NOTHROW(RequireSameConfig(m, now.Snapshot(), {"synth."}));
  now.Override("synth.length=64");
  CHECK(CodeOf([&] { RequireSameConfig(m, now.Snapshot(), {"synth."}); }) ==
        ErrorCode::kStaleArtifact);
  Config reseeded;
  reseeded.Override("seed=2");
  CHECK(CodeOf([&] { RequireSameConfig(m, reseeded.Snapshot(), {}); }) == ErrorCode::kStaleArtifact);
}

TEST_CASE("exit codes") {
  CHECK(ExitCodeFor(ErrorCode::kOk) == 0);
  CHECK(ExitCodeFor(ErrorCode::kConfigError) == 2);
  CHECK(ExitCodeFor(ErrorCode::kInvalidArgument) == 2);
  CHECK(ExitCodeFor(ErrorCode::kMissingInput) == 3);
  CHECK(ExitCodeFor(ErrorCode::kStaleArtifact) == 3);
  CHECK(ExitCodeFor(ErrorCode::kMergeRefused) == 3);
  CHECK(ExitCodeFor(ErrorCode::kIoError) == 3);
  CHECK(ExitCodeFor(ErrorCode::kCheckFailed) == 4);
  CHECK(ExitCodeFor(ErrorCode::kNumericFailure) == 5);
  CHECK(ExitCodeFor(ErrorCode::kInternal) == 1);
  CHECK(std::string(ErrorCodeName(ErrorCode::kStaleArtifact)).size() > 0);
}
