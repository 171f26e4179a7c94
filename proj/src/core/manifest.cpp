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

#include "manifest.hpp"

#include <openssl/evp.h>

#include <memory>

#include "binary_io.hpp"
#include "error.hpp"

namespace isoprobe {

using nlohmann::json;

std::string Sha256Hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    Fail(ErrorCode::kInternal, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string Sha256File(const std::filesystem::path& path) {
  return Sha256Hex(io::ReadFile(path.string()));
}

json RunManifest::ToJson() const {
  auto entries = [](const std::vector<ArtifactEntry>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back({{"path", e.path}, {"sha256", e.sha256}});
    return a;
  };
  return json{{"schema_version", kManifestSchemaVersion},
              {"tool", kToolName},
              {"tool_version", kToolVersion},
              {"command", command},
              {"config", config},
              {"seeds", seeds},
              {"inputs", entries(inputs)},
              {"outputs", entries(outputs)}};
}

RunManifest RunManifest::FromJson(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kManifestSchemaVersion)
      Fail(ErrorCode::kStaleArtifact, "manifest schema version differs from this tool's");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.at("seeds");
    for (const auto& e : j.at("inputs"))
      m.inputs.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
    for (const auto& e : j.at("outputs"))
      m.outputs.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
    return m;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kStaleArtifact, std::string("malformed manifest: ") + e.what());
  }
}

void WriteManifest(const std::filesystem::path& root, RunManifest manifest) {
  for (auto& e : manifest.outputs) e.sha256 = Sha256File(root / e.path);
  const std::filesystem::path path = root / manifest.command / "manifest.json";
  io::WriteFileAtomic(path.string(), manifest.ToJson().dump(2) + "\n");
}

RunManifest ReadManifest(const std::filesystem::path& root, const std::string& command) {
  const std::filesystem::path path = root / command / "manifest.json";
  if (!std::filesystem::exists(path))
    Fail(ErrorCode::kMissingInput,
         "missing " + path.string() + "; run '" + command + "' first");
  json j;
  try {
    j = json::parse(io::ReadFile(path.string()));
  } catch (const json::exception& e) {
    Fail(ErrorCode::kStaleArtifact, path.string() + ": " + e.what());
  }
  return RunManifest::FromJson(j);
}

ArtifactEntry VerifyArtifact(const std::filesystem::path& root, const ArtifactEntry& entry) {
  const std::filesystem::path path = root / entry.path;
  if (!std::filesystem::exists(path))
    Fail(ErrorCode::kMissingInput, "missing input " + path.string());
  const std::string actual = Sha256File(path);
  if (actual != entry.sha256)
    Fail(ErrorCode::kStaleArtifact,
         entry.path + ": content hash differs from its manifest; rerun the producing command");
  return entry;
}

void RequireSameConfig(const RunManifest& upstream, const json& current,
                       const std::vector<std::string>& prefixes) {
  auto relevant = [&](const std::string& key) {
    if (key == "seed") return true;
    for (const auto& p : prefixes)
      if (key.rfind(p, 0) == 0) return true;
    return false;
  };
  for (const auto& [key, value] : current.items()) {
    if (!relevant(key)) continue;
    if (!upstream.config.contains(key) || upstream.config.at(key) != value)
      Fail(ErrorCode::kStaleArtifact, "'" + upstream.command + "' outputs were produced with a different " +
                                          key + "; rerun '" + upstream.command + "'");
  }
}

}  // namespace isoprobe
