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

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isoprobe/isoprobe.h"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void LogToStderr(const char* message, void* /*user*/) { std::fprintf(stderr, "%s\n", message); }

int Fail(const std::string& command, isoprobe_status status) {
  std::fprintf(stderr, "isoprobe %s: %s: %s\n", command.c_str(), isoprobe_status_name(status),
               isoprobe_last_error());
  return isoprobe_exit_code(status);
}

int Run(const std::string& command, const Flags& flags) {
  isoprobe_options* options = nullptr;
  isoprobe_status st = isoprobe_options_create(&options);
  if (st != ISOPROBE_OK) return Fail(command, st);
  if (!flags.config.empty()) st = isoprobe_options_set_config(options, flags.config.c_str());
  if (st == ISOPROBE_OK && flags.seed) st = isoprobe_options_set_seed(options, *flags.seed);
  if (st == ISOPROBE_OK && flags.out) st = isoprobe_options_set_out(options, flags.out->c_str());
  if (st == ISOPROBE_OK && flags.workers)
    st = isoprobe_options_set_workers(options, *flags.workers);
  for (const auto& o : flags.overrides)
    if (st == ISOPROBE_OK) st = isoprobe_options_add_override(options, o.c_str());
  if (st == ISOPROBE_OK && !flags.quiet) st = isoprobe_options_set_log(options, LogToStderr, nullptr);
  if (st == ISOPROBE_OK) st = isoprobe_run(command.c_str(), options);
  isoprobe_options_destroy(options);
  return st == ISOPROBE_OK ? 0 : Fail(command, st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isoprobe: embedding isotropy experiments for time-series transformers"};
  app.set_version_flag("--version", std::string(isoprobe_version()));
  app.require_subcommand(1, 1);

  Flags flags;
  std::string chosen;
  for (std::size_t i = 0; i < isoprobe_command_count(); ++i) {
    const std::string name = isoprobe_command_name(i);
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
    sub->add_option("--config", flags.config, "config file (key = value with [sections])")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--out", flags.out, "run directory");
    sub->add_option("--workers", flags.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--set", flags.overrides, "override, e.g. train.steps=100")
        ->allow_extra_args(false);
    sub->add_flag("--quiet,-q", flags.quiet, "no progress messages");
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // Usage errors share the config-error exit code; help and version exit 0.
    return code == 0 ? 0 : 2;
  }
  return Run(chosen, flags);
}
