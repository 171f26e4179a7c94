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

#ifndef ISOPROBE_CORE_CONFIG_HPP_
#define ISOPROBE_CORE_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace isoprobe {

// Run configuration: flat dotted keys with typed values.
//
// Text form, one entry per line:
//
//   seed = 7
//   [train]
//   steps = 200            # comment
//   datasets = ["seasonality1", "seasonality2"]
//
// Every key must be declared in the schema below; unset keys take their
// defaults, so Snapshot() is always the full configuration.
class Config {
 public:
  Config();

  static Config Parse(std::string_view text, const std::string& origin = "<config>");
  // A config text file, or a run manifest whose "config" object is reused.
  static Config Load(const std::string& path);
  static Config FromJson(const nlohmann::json& flat);

  // `assignment` is "key=value" using the text-form value syntax.
  void Override(std::string_view assignment);
  void Set(const std::string& key, const nlohmann::json& value);
  bool IsExplicit(const std::string& key) const { return explicit_.count(key) != 0; }

  std::int64_t Int(const std::string& key) const;
  std::size_t Count(const std::string& key) const;  // integer >= 0
  std::uint64_t Seed(const std::string& key) const;
  double Real(const std::string& key) const;
  bool Bool(const std::string& key) const;
  std::string Str(const std::string& key) const;
  std::vector<std::string> StrList(const std::string& key) const;
  std::vector<double> RealList(const std::string& key) const;
  std::vector<std::size_t> CountList(const std::string& key) const;

  // Keys with `prefix` (e.g. "synth.") and their values, plus seed.
  nlohmann::json Section(const std::string& prefix) const;
  nlohmann::json Snapshot() const;

 private:
  const nlohmann::json& At(const std::string& key) const;
  [[noreturn]] static void Bad(const std::string& key, const std::string& what);

  std::map<std::string, nlohmann::json> values_;
  std::map<std::string, bool> explicit_;
};

struct ConfigKey {
  const char* key;
  const char* default_value;  // text-form literal
  const char* help;
};

const std::vector<ConfigKey>& ConfigSchema();

// Parses one text-form value: number, true/false, quoted or bare string, or
// a one-line [list].
nlohmann::json ParseConfigValue(std::string_view text);

}  // namespace isoprobe

#endif  // ISOPROBE_CORE_CONFIG_HPP_
