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

#ifndef ISOPROBE_CORE_ISOTROPY_METRICS_HPP_
#define ISOPROBE_CORE_ISOTROPY_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "embedding_dump.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace isoprobe::isotropy {

using numerics::Matrix;

struct EffectiveDimension {
  std::size_t value = 1;
  bool degenerate = false;
};

// Smallest m with r_m = Σ_{i<m} σ_i / Σ σ_i >= ε over the covariance spectrum.
EffectiveDimension EffectiveDim(const Matrix& a, double epsilon);
std::size_t EffectiveDimFromRatios(std::span<const double> explained_ratio, double epsilon);

inline constexpr std::size_t kDefaultPairBudget = 10000;

struct CosineStat {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t pairs = 0;
  std::size_t tokens = 0;
  std::size_t zero_vectors_excluded = 0;
  bool exhaustive = false;
};

// One entry per token: that token's contextual instances.
using TokenGroups = std::vector<std::vector<std::span<const double>>>;

// Mean cosine over pairs of distinct tokens, one fresh instance per token per
// pair. Every unordered pair once when there are at most `pair_budget` of
// them, otherwise `pair_budget` uniformly drawn pairs.
CosineStat TokenPairCosine(const TokenGroups& groups, std::size_t pair_budget,
                           RngStream& stream);

// ζ_cos over the records of one layer; zero vectors are excluded.
CosineStat InterTokenCos(const EmbeddingDump& dump, std::uint32_t layer,
                         std::size_t pair_budget, RngStream& stream);

struct Clustering {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // per row of the clustered matrix
  Matrix centroids;
  double wcss = 0.0;
  std::vector<double> wcss_history;  // after each Lloyd update, best restart
  std::size_t iterations = 0;
};

struct KMeansOptions {
  int restarts = 5;
  int max_iterations = 300;
  double tolerance = 1e-8;
};

// k-means++ seeding, Lloyd iterations, empty clusters reseeded at the point
// farthest from its centroid; best of `restarts` by WCSS.
Clustering KMeans(const Matrix& x, std::size_t k, RngStream& stream,
                  const KMeansOptions& options = {});

struct SilhouetteResult {
  std::vector<double> scores;
  double mean = 0.0;
};

// Mean intra-cluster distance a(p) (0 and s(p)=0 for singletons), smallest
// mean distance to another cluster b(p), s(p) = (b - a) / max(a, b).
SilhouetteResult Silhouette(const Matrix& x, std::span<const std::size_t> assignment,
                            std::size_t k);

inline constexpr double kLowSilhouette = 0.3;

struct ClusterSelection {
  std::size_t best_k = 0;
  Clustering clustering;
  double mean_silhouette = 0.0;
  std::vector<std::pair<std::size_t, double>> scores;  // (k, mean silhouette)
  bool low_silhouette = false;
};

// Argmax of mean silhouette over k in [k_min, k_max]; ties go to the
// smallest k. When silhouette_sample > 0 and smaller than the row count,
// silhouettes are computed on a seeded subsample of that many rows.
ClusterSelection SelectClusterCount(const Matrix& x, std::size_t k_min, std::size_t k_max,
                                    RngStream& stream, std::size_t silhouette_sample = 0);

struct AdjustedCosine {
  double value = 0.0;
  std::vector<double> per_cluster;  // NaN for skipped clusters
  std::size_t clusters_used = 0;
  std::size_t clusters_skipped = 0;
  std::size_t zero_vectors_excluded = 0;
};

// ζ′_cos: per cluster, members are shifted by the cluster mean and the
// token-pair cosine is taken within the cluster; clusters with fewer than two
// tokens are skipped. `clustering.assignment` indexes LayerRecords(layer).
AdjustedCosine AdjustedInterTokenCos(const EmbeddingDump& dump, std::uint32_t layer,
                                     const Clustering& clustering, std::size_t pair_budget,
                                     RngStream& stream);

struct LayerIsotropy {
  std::uint32_t layer = 0;
  std::size_t records = 0;
  std::size_t tokens = 0;
  std::size_t d08 = 0;
  std::size_t d09 = 0;
  bool pca_degenerate = false;
  CosineStat zeta_cos;
  std::size_t cluster_count = 0;
  double mean_silhouette = 0.0;
  bool low_silhouette = false;
  std::vector<std::pair<std::size_t, double>> silhouette_by_k;
  AdjustedCosine zeta_prime;
  double isotropy_partition = 1.0;
  bool partition_degenerate = false;
  std::vector<double> explained_ratio;
  Matrix pca3;                          // records × 3
  std::vector<std::size_t> assignment;  // per record
  std::vector<std::uint32_t> token_ids;
};

struct AnalyzeOptions {
  std::size_t pair_budget = kDefaultPairBudget;
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t silhouette_sample = 2000;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Full per-layer diagnostics. Layer l uses RngStream(seed, l).
std::vector<LayerIsotropy> Analyze(const EmbeddingDump& dump, const AnalyzeOptions& options);

}  // namespace isoprobe::isotropy

#endif  // ISOPROBE_CORE_ISOTROPY_METRICS_HPP_
