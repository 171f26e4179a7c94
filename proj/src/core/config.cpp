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

#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "error.hpp"
#include "format.hpp"

namespace isoprobe {
namespace {

using nlohmann::json;

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool ValidKey(std::string_view k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

// Drops a trailing comment, ignoring '#' inside quotes.
std::string_view StripComment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

json Scalar(std::string_view t) {
  t = Trim(t);
  if (t.empty()) Fail(ErrorCode::kConfigError, "empty value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') Fail(ErrorCode::kConfigError, "unterminated string");
    return std::string(t.substr(1, t.size() - 2));
  }
  if (t == "true") return true;
  if (t == "false") return false;
  const bool numeric = std::isdigit(static_cast<unsigned char>(t.front())) || t.front() == '-' ||
                       t.front() == '+' || t.front() == '.';
  if (numeric) {
    const std::string s(t);
    const bool integral = s.find_first_of(".eE") == std::string::npos;
    if (integral) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used == s.size()) return v;
      } catch (const std::exception&) {
      }
    }
    try {
      return ParseDouble(s);
    } catch (const Error&) {
      Fail(ErrorCode::kConfigError, "malformed number '" + s + "'");
    }
  }
  return std::string(t);
}

}  // namespace

const std::vector<ConfigKey>& ConfigSchema() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "master seed"},
      {"out", "\"runs/default\"", "output root; each command writes <out>/<command>"},
      {"workers", "0", "worker threads; 0 means ISOPROBE_WORKERS or 1"},
      {"synth.datasets", "[]", "dataset names; empty means all ten"},
      {"synth.length", "1024", "points per series"},
      {"synth.max_kernels", "1", "J, the maximum number of composed kernels"},
      {"synth.standardize", "true", "zero mean, unit variance output"},
      {"tokenizer.vocab_size", "512", "N"},
      {"tokenizer.lo", "-15", "lower edge of the scaled value range"},
      {"tokenizer.hi", "15", "upper edge of the scaled value range"},
      {"model.embed_dim", "64", "D"},
      {"model.attn_dim", "16", "m"},
      {"model.layers", "2", "attention layers"},
      {"train.datasets", "[]", "training datasets; empty means every synthesized one"},
      {"train.learning_rate", "0.05", "SGD step size"},
      {"train.steps", "5000", "SGD steps"},
      {"train.batch_size", "16", "windows per step"},
      {"train.context_length", "16", "T"},
      {"train.horizon", "4", "L"},
      {"train.log_every", "50", "loss curve resolution"},
      {"train.embed_init_scale", "0.1", "embedding init standard deviation"},
      {"train.train_fraction", "0.75", "leading fraction of each series used for training"},
      {"train.stride", "1", "window stride"},
      {"embed.datasets", "[]", "datasets to embed; empty means the training datasets"},
      {"embed.windows", "64", "evenly spaced context windows per dataset"},
      {"embed.layers", "[]", "1-based layers to dump; empty means all"},
      {"analyze.pair_budget", "10000", "token pairs before switching to sampling"},
      {"analyze.k_min", "2", "smallest cluster count"},
      {"analyze.k_max", "10", "largest cluster count"},
      {"analyze.silhouette_sample", "2000", "rows used for silhouettes; 0 means all"},
      {"verify.heads", "50", "sampled downstream heads"},
      {"verify.windows", "16", "held-out windows per dataset for the shift check"},
      {"verify.bound_instances", "200", "random Jacobian bound instances"},
      {"verify.bound_max_n", "8", "largest sequence length"},
      {"verify.bound_max_dim", "6", "largest embedding dimension"},
      {"verify.bound_max_norm", "2", "largest spectral norm of the attention matrix"},
      {"verify.lambda_instances", "100", "random optimal-attention instances"},
      {"verify.lambda_max_n", "12", "largest sequence length"},
      {"verify.lambda_max_dim", "6", "largest embedding dimension"},
      {"verify.descent_starts", "20", "descent restarts searching for a better rank-m matrix"},
      {"verify.approx_instances", "50", "random small-attention instances"},
      {"eval.datasets", "[]", "evaluation datasets; empty means the training datasets"},
      {"eval.context_lengths", "[16, 8]", "context-length sweep values"},
      {"eval.noise_levels", "[0, 0.05]", "noise sweep values"},
      {"eval.repetitions", "20", "seeds per sweep point"},
      {"eval.windows", "32", "forecast origins per row"},
      {"eval.samples", "20", "sampled trajectories per forecast"},
      {"eval.silhouette_sample", "500", "rows used for silhouettes; 0 means all"},
      {"report.runs", "[]", "run output roots to merge; empty means this run"},
  };
  return keys;
}

json ParseConfigValue(std::string_view text) {
  text = Trim(text);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') Fail(ErrorCode::kConfigError, "unterminated list");
    json list = json::array();
    std::string_view body = Trim(text.substr(1, text.size() - 2));
    while (!body.empty()) {
      std::size_t end = 0;
      bool quoted = false;
      while (end < body.size() && (quoted || body[end] != ',')) {
        if (body[end] == '"') quoted = !quoted;
        ++end;
      }
      list.push_back(Scalar(body.substr(0, end)));
      body = end < body.size() ? Trim(body.substr(end + 1)) : std::string_view();
    }
    return list;
  }
  return Scalar(text);
}

Config::Config() {
  for (const auto& k : ConfigSchema()) values_[k.key] = ParseConfigValue(k.default_value);
}

Config Config::Parse(std::string_view text, const std::string& origin) {
  Config cfg;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    line = Trim(StripComment(line));
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string_view::npos) {
      if (line.back() != ']') Fail(ErrorCode::kConfigError, where + ": malformed section header");
      const std::string_view name = Trim(line.substr(1, line.size() - 2));
      if (!ValidKey(name)) Fail(ErrorCode::kConfigError, where + ": malformed section header");
      section = std::string(name) + ".";
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) Fail(ErrorCode::kConfigError, where + ": expected key = value");
    const std::string_view key = Trim(line.substr(0, eq));
    if (!ValidKey(key)) Fail(ErrorCode::kConfigError, where + ": malformed key");
    const std::string full = section + std::string(key);
    if (cfg.explicit_.count(full) != 0)
      Fail(ErrorCode::kConfigError, where + ": " + full + ": duplicate key");
    try {
      cfg.Set(full, ParseConfigValue(line.substr(eq + 1)));
    } catch (const Error& e) {
      Fail(ErrorCode::kConfigError, where + ": " + e.what());
    }
  }
  return cfg;
}

Config Config::FromJson(const json& flat) {
  if (!flat.is_object()) Fail(ErrorCode::kConfigError, "config snapshot must be an object");
  Config cfg;
  for (const auto& [key, value] : flat.items()) cfg.Set(key, value);
  return cfg;
}

Config Config::Load(const std::string& path) {
  const std::string text = io::ReadFile(path);
  const std::string_view head = Trim(text);
  if (!head.empty() && head.front() == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      Fail(ErrorCode::kConfigError, path + ": " + e.what());
    }
    if (!doc.contains("config")) Fail(ErrorCode::kConfigError, path + ": manifest has no config");
    return FromJson(doc.at("config"));
  }
  return Parse(text, path);
}

void Config::Override(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos)
    Fail(ErrorCode::kConfigError, "override '" + std::string(assignment) + "': expected key=value");
  const std::string key(Trim(assignment.substr(0, eq)));
  try {
    Set(key, ParseConfigValue(assignment.substr(eq + 1)));
  } catch (const Error& e) {
    Fail(ErrorCode::kConfigError, "override " + key + ": " + e.what());
  }
}

void Config::Set(const std::string& key, const json& value) {
  auto it = values_.find(key);
  if (it == values_.end()) Fail(ErrorCode::kConfigError, key + ": unknown key");
  const json& def = it->second;
  const bool list_expected = def.is_array();
  if (list_expected != value.is_array())
    Bad(key, list_expected ? "expected a list" : "expected a single value");
  it->second = value;
  explicit_[key] = true;
}

const json& Config::At(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) Fail(ErrorCode::kInternal, "undeclared config key " + key);
  return it->second;
}

void Config::Bad(const std::string& key, const std::string& what) {
  Fail(ErrorCode::kConfigError, key + ": " + what);
}

std::int64_t Config::Int(const std::string& key) const {
  const json& v = At(key);
  if (!v.is_number_integer()) Bad(key, "expected an integer");
  return v.get<std::int64_t>();
}

std::size_t Config::Count(const std::string& key) const {
  const std::int64_t v = Int(key);
  if (v < 0) Bad(key, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::Seed(const std::string& key) const {
  const json& v = At(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  return static_cast<std::uint64_t>(Count(key));
}

double Config::Real(const std::string& key) const {
  const json& v = At(key);
  if (!v.is_number()) Bad(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) Bad(key, "expected a finite number");
  return d;
}

bool Config::Bool(const std::string& key) const {
  const json& v = At(key);
  if (!v.is_boolean()) Bad(key, "expected true or false");
  return v.get<bool>();
}

std::string Config::Str(const std::string& key) const {
  const json& v = At(key);
  if (!v.is_string()) Bad(key, "expected a string");
  return v.get<std::string>();
}

std::vector<std::string> Config::StrList(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& v : At(key)) {
    if (!v.is_string()) Bad(key, "expected a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<double> Config::RealList(const std::string& key) const {
  std::vector<double> out;
  for (const auto& v : At(key)) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) Bad(key, "expected a list of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::size_t> Config::CountList(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& v : At(key)) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
      Bad(key, "expected a list of non-negative integers");
    out.push_back(static_cast<std::size_t>(v.get<std::int64_t>()));
  }
  return out;
}

json Config::Section(const std::string& prefix) const {
  json out = json::object();
  out["seed"] = At("seed");
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0) out[k] = v;
  return out;
}

json Config::Snapshot() const {
  json out = json::object();
  for (const auto& [k, v] : values_) out[k] = v;
  return out;
}

}  // namespace isoprobe
