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

#ifndef ISOPROBE_CORE_MANIFEST_HPP_
#define ISOPROBE_CORE_MANIFEST_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace isoprobe {

inline constexpr char kToolName[] = "isoprobe";
inline constexpr char kToolVersion[] = "0.1.0";
inline constexpr int kManifestSchemaVersion = 1;

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::filesystem::path& path);

struct ArtifactEntry {
  std::string path;  // relative to the run root
  std::string sha256;
};

// Record of one command invocation. Paths are relative to the run root so
// two runs into different roots produce comparable manifests.
struct RunManifest {
  std::string command;
  nlohmann::json config;  // full snapshot
  nlohmann::json seeds;   // named seeds used by the command
  std::vector<ArtifactEntry> inputs;
  std::vector<ArtifactEntry> outputs;

  nlohmann::json ToJson() const;
  static RunManifest FromJson(const nlohmann::json& j);
};

// Hashes every output under `root` and writes <root>/<command>/manifest.json
// atomically.
void WriteManifest(const std::filesystem::path& root, RunManifest manifest);

// Reads <root>/<command>/manifest.json. Missing → missing-input.
RunManifest ReadManifest(const std::filesystem::path& root, const std::string& command);

// Re-hashes `entry` under `root`; a mismatch is a stale-artifact error and a
// missing file a missing-input error.
ArtifactEntry VerifyArtifact(const std::filesystem::path& root, const ArtifactEntry& entry);

// Config keys with `prefixes` (plus seed) must agree between an upstream
// manifest and the current config, otherwise the upstream output is stale.
void RequireSameConfig(const RunManifest& upstream, const nlohmann::json& current,
                       const std::vector<std::string>& prefixes);

}  // namespace isoprobe

#endif  // ISOPROBE_CORE_MANIFEST_HPP_
