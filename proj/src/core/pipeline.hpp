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

#ifndef ISOPROBE_CORE_PIPELINE_HPP_
#define ISOPROBE_CORE_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace isoprobe::pipeline {

using LogFn = std::function<void(const std::string&)>;

struct CommandOptions {
  std::string config_path;  // empty: schema defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::vector<std::string> overrides;  // "key=value", applied before the flags above
  LogFn log;
};

inline constexpr int kReportSchemaVersion = 1;

// synth, train, embed, analyze, verify, eval, report.
const std::vector<std::string>& CommandNames();

// Config file, then overrides, then flags.
Config ResolveConfig(const CommandOptions& options);

// Flag, else an explicit positive `workers` key, else ISOPROBE_WORKERS, else 1.
int ResolveWorkers(const Config& config, const std::optional<int>& flag);

// Runs one command against <out>/<command>. Throws Error; verify throws
// check-failure after writing its report when any gating check fails.
void RunCommand(const std::string& command, const CommandOptions& options);

}  // namespace isoprobe::pipeline

#endif  // ISOPROBE_CORE_PIPELINE_HPP_
