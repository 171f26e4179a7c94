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

#ifndef ISOPROBE_CORE_KERNELSYNTH_HPP_
#define ISOPROBE_CORE_KERNELSYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numerics.hpp"
#include "rng.hpp"

namespace isoprobe::kernelsynth {

enum class KernelKind { kDotProduct, kRbf, kPeriodic, kRationalQuadratic, kWhite };

// Covariance kernel on normalized positions s, t ∈ [0, 1].
struct KernelSpec {
  KernelKind kind = KernelKind::kRbf;
  double c = 0.0;             // DotProduct offset
  double length_scale = 1.0;  // RBF, Periodic, RationalQuadratic
  double period = 1.0;        // Periodic
  double alpha = 1.0;         // RationalQuadratic
  double noise_level = 0.0;   // White

  static KernelSpec DotProduct(double c);
  static KernelSpec Rbf(double length_scale);
  static KernelSpec Periodic(double period, double length_scale);
  static KernelSpec RationalQuadratic(double alpha, double length_scale);
  static KernelSpec White(double noise_level);

  // Throws invalid-argument when a parameter is out of range.
  void Validate() const;
  std::string Describe() const;
};

double KernelEval(const KernelSpec& spec, double s, double t);

enum class ComposeOp { kAdd, kMultiply };

// Left-deep expression tree: ((k0 op0 k1) op1 k2) ... folded left to right.
struct CompositeKernel {
  std::vector<KernelSpec> leaves;
  std::vector<ComposeOp> ops;  // ops.size() == leaves.size() - 1

  std::size_t leaf_count() const { return leaves.size(); }
  double Eval(double s, double t) const;
  // True when k(s, t) = 0 for every s != t, e.g. any product with White.
  bool IsDiagonal() const;
  std::string Describe() const;
};

CompositeKernel Single(const KernelSpec& spec);

numerics::Matrix GramMatrix(const CompositeKernel& kernel, std::span<const double> grid);

// Uniform grid of `length` points spanning [0, 1].
std::vector<double> UnitGrid(std::size_t length);

// j ~ U{1..max_kernels}; j kernels drawn with replacement from `bank`;
// j-1 operators drawn uniformly from {add, multiply}.
CompositeKernel SampleKernelTree(std::span<const KernelSpec> bank,
                                 std::size_t max_kernels, RngStream& stream);

struct SeriesOrigin {
  CompositeKernel kernel;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::size_t max_kernels = 0;
  double jitter = 0.0;
  bool standardized = false;
};

struct TimeSeries {
  std::vector<double> values;      // standardized unless disabled
  std::vector<double> raw_values;  // the GP draw itself
  SeriesOrigin origin;

  std::size_t length() const { return values.size(); }
};

// Zero-mean GP prior over a fixed grid, factorized once and sampled many times.
class GpSampler {
 public:
  GpSampler(CompositeKernel kernel, std::span<const double> grid);

  std::vector<double> Draw(RngStream& stream) const;
  double jitter() const noexcept { return jitter_; }
  const CompositeKernel& kernel() const noexcept { return kernel_; }

 private:
  CompositeKernel kernel_;
  std::size_t length_;
  std::optional<numerics::Matrix> lower_;  // empty on the diagonal fast path
  std::vector<double> diag_sqrt_;
  double jitter_ = 0.0;
};

inline constexpr std::size_t kDefaultMaxKernels = 5;
inline constexpr std::size_t kDefaultLength = 1024;
inline constexpr double kDefaultNoiseSigma = 0.05;

struct SynthOptions {
  std::size_t max_kernels = kDefaultMaxKernels;
  std::size_t length = kDefaultLength;
  bool standardize = true;
};

TimeSeries KernelSynthSample(std::span<const KernelSpec> bank,
                             const SynthOptions& options, RngStream& stream);

// Zero mean, unit variance (population). Constant series are only centered.
std::vector<double> Standardize(std::span<const double> values);

// values + N(0, sigma²) i.i.d.
std::vector<double> AddNoise(std::span<const double> values, double sigma,
                             RngStream& stream);

// The ten synthetic datasets: two per pattern family.
struct DatasetSpec {
  std::string name;
  std::string family;
  KernelSpec kernel;
};

std::vector<DatasetSpec> DefaultDatasets();
std::optional<DatasetSpec> FindDataset(const std::string& name);

}  // namespace isoprobe::kernelsynth

#endif  // ISOPROBE_CORE_KERNELSYNTH_HPP_
