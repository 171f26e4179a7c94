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

#include "kernelsynth.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "error.hpp"

namespace isoprobe::kernelsynth {

KernelSpec KernelSpec::DotProduct(double c) {
  KernelSpec k;
  k.kind = KernelKind::kDotProduct;
  k.c = c;
  return k;
}

KernelSpec KernelSpec::Rbf(double length_scale) {
  KernelSpec k;
  k.kind = KernelKind::kRbf;
  k.length_scale = length_scale;
  return k;
}

KernelSpec KernelSpec::Periodic(double period, double length_scale) {
  KernelSpec k;
  k.kind = KernelKind::kPeriodic;
  k.period = period;
  k.length_scale = length_scale;
  return k;
}

KernelSpec KernelSpec::RationalQuadratic(double alpha, double length_scale) {
  KernelSpec k;
  k.kind = KernelKind::kRationalQuadratic;
  k.alpha = alpha;
  k.length_scale = length_scale;
  return k;
}

KernelSpec KernelSpec::White(double noise_level) {
  KernelSpec k;
  k.kind = KernelKind::kWhite;
  k.noise_level = noise_level;
  return k;
}

void KernelSpec::Validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  switch (kind) {
    case KernelKind::kDotProduct:
      Require(std::isfinite(c) && c >= 0.0, "DotProduct: c must be finite and >= 0");
      break;
    case KernelKind::kRbf:
      Require(positive(length_scale), "RBF: length_scale must be > 0");
      break;
    case KernelKind::kPeriodic:
      Require(positive(period), "Periodic: period must be > 0");
      Require(positive(length_scale), "Periodic: length_scale must be > 0");
      break;
    case KernelKind::kRationalQuadratic:
      Require(positive(alpha), "RationalQuadratic: alpha must be > 0");
      Require(positive(length_scale), "RationalQuadratic: length_scale must be > 0");
      break;
    case KernelKind::kWhite:
      Require(std::isfinite(noise_level) && noise_level >= 0.0,
              "White: noise_level must be finite and >= 0");
      break;
  }
}

std::string KernelSpec::Describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case KernelKind::kDotProduct: os << "DotProduct(c=" << c << ")"; break;
    case KernelKind::kRbf: os << "RBF(length_scale=" << length_scale << ")"; break;
    case KernelKind::kPeriodic:
      os << "Periodic(period=" << period << ", length_scale=" << length_scale << ")";
      break;
    case KernelKind::kRationalQuadratic:
      os << "RationalQuadratic(alpha=" << alpha << ", length_scale=" << length_scale
         << ")";
      break;
    case KernelKind::kWhite: os << "White(noise_level=" << noise_level << ")"; break;
  }
  return os.str();
}

double KernelEval(const KernelSpec& spec, double s, double t) {
  const double d = s - t;
  switch (spec.kind) {
    case KernelKind::kDotProduct:
      return spec.c + s * t;
    case KernelKind::kRbf:
      return std::exp(-d * d / (2.0 * spec.length_scale * spec.length_scale));
    case KernelKind::kPeriodic: {
      const double sn = std::sin(std::numbers::pi * std::abs(d) / spec.period);
      return std::exp(-2.0 * sn * sn / (spec.length_scale * spec.length_scale));
    }
    case KernelKind::kRationalQuadratic:
      return std::pow(
          1.0 + d * d / (2.0 * spec.alpha * spec.length_scale * spec.length_scale),
          -spec.alpha);
    case KernelKind::kWhite:
      return s == t ? spec.noise_level : 0.0;
  }
  return 0.0;
}

double CompositeKernel::Eval(double s, double t) const {
  double acc = KernelEval(leaves.front(), s, t);
  for (std::size_t i = 1; i < leaves.size(); ++i) {
    const double v = KernelEval(leaves[i], s, t);
    acc = ops[i - 1] == ComposeOp::kAdd ? acc + v : acc * v;
  }
  return acc;
}

bool CompositeKernel::IsDiagonal() const {
  bool diag = leaves.front().kind == KernelKind::kWhite;
  for (std::size_t i = 1; i < leaves.size(); ++i) {
    const bool leaf = leaves[i].kind == KernelKind::kWhite;
    diag = ops[i - 1] == ComposeOp::kAdd ? (diag && leaf) : (diag || leaf);
  }
  return diag;
}

std::string CompositeKernel::Describe() const {
  std::string out = leaves.front().Describe();
  for (std::size_t i = 1; i < leaves.size(); ++i) {
    out = "(" + out + (ops[i - 1] == ComposeOp::kAdd ? " + " : " * ") +
          leaves[i].Describe() + ")";
  }
  return out;
}

CompositeKernel Single(const KernelSpec& spec) { return CompositeKernel{{spec}, {}}; }

numerics::Matrix GramMatrix(const CompositeKernel& kernel, std::span<const double> grid) {
  Require(!kernel.leaves.empty(), "gram_matrix: empty kernel");
  Require(kernel.ops.size() + 1 == kernel.leaves.size(), "gram_matrix: malformed kernel tree");
  for (std::size_t i = 1; i < grid.size(); ++i)
    Require(grid[i] > grid[i - 1], "gram_matrix: grid must be strictly increasing");
  const std::size_t n = grid.size();
  numerics::Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel.Eval(grid[i], grid[j]);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

std::vector<double> UnitGrid(std::size_t length) {
  std::vector<double> grid(length);
  if (length == 1) return {0.0};
  for (std::size_t i = 0; i < length; ++i)
    grid[i] = static_cast<double>(i) / static_cast<double>(length - 1);
  return grid;
}

CompositeKernel SampleKernelTree(std::span<const KernelSpec> bank,
                                 std::size_t max_kernels, RngStream& stream) {
  Require(!bank.empty(), "kernelsynth: kernel bank is empty");
  Require(max_kernels >= 1, "kernelsynth: J must be >= 1");
  const std::size_t j = 1 + stream.UniformIndex(max_kernels);
  CompositeKernel tree;
  tree.leaves.reserve(j);
  for (std::size_t i = 0; i < j; ++i) tree.leaves.push_back(bank[stream.UniformIndex(bank.size())]);
  for (std::size_t i = 1; i < j; ++i)
    tree.ops.push_back(stream.UniformIndex(2) == 0 ? ComposeOp::kAdd : ComposeOp::kMultiply);
  return tree;
}

GpSampler::GpSampler(CompositeKernel kernel, std::span<const double> grid)
    : kernel_(std::move(kernel)), length_(grid.size()) {
  for (const auto& leaf : kernel_.leaves) leaf.Validate();
  if (kernel_.IsDiagonal()) {
    diag_sqrt_.resize(length_);
    for (std::size_t i = 0; i < length_; ++i) {
      const double v = kernel_.Eval(grid[i], grid[i]);
      if (!(v >= 0.0) || !std::isfinite(v))
        Fail(ErrorCode::kGenerationFailure,
             "kernelsynth: negative variance for kernel " + kernel_.Describe());
      diag_sqrt_[i] = std::sqrt(v);
    }
    return;
  }
  numerics::Matrix gram = GramMatrix(kernel_, grid);
  try {
    numerics::CholeskyResult chol = numerics::CholeskyPsd(gram);
    jitter_ = chol.jitter;
    lower_ = std::move(chol.lower);
  } catch (const Error& e) {
    Fail(ErrorCode::kGenerationFailure,
         "kernelsynth: GP covariance not sampleable for kernel " + kernel_.Describe() +
             ": " + e.what());
  }
}

std::vector<double> GpSampler::Draw(RngStream& stream) const {
  std::vector<double> z(length_);
  for (double& v : z) v = stream.Gaussian();
  if (!lower_) {
    for (std::size_t i = 0; i < length_; ++i) z[i] *= diag_sqrt_[i];
    return z;
  }
  std::vector<double> x(length_, 0.0);
  const numerics::Matrix& l = *lower_;
  for (std::size_t i = 0; i < length_; ++i) {
    auto row = l.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += row[k] * z[k];
    x[i] = s;
  }
  return x;
}

std::vector<double> Standardize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= static_cast<double>(out.size());
  const double sd = std::sqrt(var);
  for (double& v : out) v = sd > 0.0 ? (v - mean) / sd : v - mean;
  return out;
}

TimeSeries KernelSynthSample(std::span<const KernelSpec> bank,
                             const SynthOptions& options, RngStream& stream) {
  Require(options.length >= 2, "kernelsynth: length must be >= 2");
  for (const auto& k : bank) k.Validate();
  CompositeKernel tree = SampleKernelTree(bank, options.max_kernels, stream);
  const std::vector<double> grid = UnitGrid(options.length);
  GpSampler sampler(tree, grid);

  TimeSeries series;
  series.raw_values = sampler.Draw(stream);
  for (double v : series.raw_values)
    if (!std::isfinite(v))
      Fail(ErrorCode::kGenerationFailure,
           "kernelsynth: non-finite sample for kernel " + tree.Describe());
  series.values = options.standardize ? Standardize(series.raw_values) : series.raw_values;
  series.origin.kernel = std::move(tree);
  series.origin.seed = stream.seed();
  series.origin.stream_id = stream.stream_id();
  series.origin.max_kernels = options.max_kernels;
  series.origin.jitter = sampler.jitter();
  series.origin.standardized = options.standardize;
  return series;
}

std::vector<double> AddNoise(std::span<const double> values, double sigma,
                             RngStream& stream) {
  Require(std::isfinite(sigma) && sigma >= 0.0, "noise sigma must be finite and >= 0");
  std::vector<double> out(values.begin(), values.end());
  if (sigma == 0.0) return out;
  for (double& v : out) v += sigma * stream.Gaussian();
  return out;
}

// Seasonality periods are fractions of the unit grid: 0.1 gives ten cycles
// per series, 0.025 gives forty.
std::vector<DatasetSpec> DefaultDatasets() {
  return {
      {"linear1", "linear", KernelSpec::DotProduct(0.0)},
      {"linear2", "linear", KernelSpec::DotProduct(1.0)},
      {"seasonality1", "seasonality", KernelSpec::Periodic(0.1, 1.0)},
      {"seasonality2", "seasonality", KernelSpec::Periodic(0.025, 1.0)},
      {"trend1", "trend", KernelSpec::RationalQuadratic(1.0, 1.0)},
      {"trend2", "trend", KernelSpec::RationalQuadratic(10.0, 1.0)},
      {"nonlinear1", "nonlinear", KernelSpec::Rbf(0.1)},
      {"nonlinear2", "nonlinear", KernelSpec::Rbf(1.0)},
      {"stochastic1", "stochastic", KernelSpec::White(0.1)},
      {"stochastic2", "stochastic", KernelSpec::White(1.0)},
  };
}

std::optional<DatasetSpec> FindDataset(const std::string& name) {
  for (auto& d : DefaultDatasets())
    if (d.name == name) return d;
  return std::nullopt;
}

}  // namespace isoprobe::kernelsynth
