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

#include "isotropy_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "error.hpp"
#include "parallel.hpp"
#include "theory_checks.hpp"

namespace isoprobe::isotropy {
namespace {

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  const double c = numerics::Dot(a, b) / (numerics::Norm(a) * numerics::Norm(b));
  return std::clamp(c, -1.0, 1.0);
}

bool IsZero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

Matrix PlusPlusSeeds(const Matrix& x, std::size_t k, RngStream& stream) {
  const std::size_t n = x.rows();
  Matrix c(k, x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = stream.UniformIndex(n);
  for (std::size_t j = 0;; ++j) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(j).begin());
    if (j + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], SquaredDistance(x.row(i), c.row(j)));
      total += d2[i];
    }
    if (total <= 0.0) {
      pick = stream.UniformIndex(n);
      continue;
    }
    const double target = stream.Uniform() * total;
    double acc = 0.0;
    pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
  }
  return c;
}

std::size_t Nearest(std::span<const double> p, const Matrix& c, double* best_d2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.rows(); ++j) {
    const double d = SquaredDistance(p, c.row(j));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (best_d2 != nullptr) *best_d2 = best_d;
  return best;
}

Clustering Lloyd(const Matrix& x, Matrix centroids, const KMeansOptions& options) {
  const std::size_t n = x.rows();
  const std::size_t k = centroids.rows();
  const std::size_t dim = x.cols();
  Clustering out;
  out.k = k;
  out.assignment.assign(n, 0);
  std::vector<double> dist(n);
  for (int it = 0; it < options.max_iterations; ++it) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      out.assignment[i] = Nearest(x.row(i), centroids, &dist[i]);
      ++counts[out.assignment[i]];
    }
    // Empty clusters take the point farthest from its centroid among clusters
    // that can spare one.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[out.assignment[i]] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) Fail(ErrorCode::kNumericFailure, "kmeans: cannot repair empty cluster");
      --counts[out.assignment[far]];
      out.assignment[far] = c;
      counts[c] = 1;
      dist[far] = 0.0;
    }
    Matrix next(k, dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(out.assignment[i]);
      const auto src = x.row(i);
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto row = next.row(c);
      for (double& v : row) v /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(SquaredDistance(row, centroids.row(c))));
    }
    centroids = std::move(next);
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      wcss += SquaredDistance(x.row(i), centroids.row(out.assignment[i]));
    out.wcss_history.push_back(wcss);
    out.wcss = wcss;
    out.iterations = static_cast<std::size_t>(it) + 1;
    if (shift < options.tolerance) break;
  }
  out.centroids = std::move(centroids);
  return out;
}

}  // namespace

std::size_t EffectiveDimFromRatios(std::span<const double> explained_ratio, double epsilon) {
  Require(epsilon > 0.0 && epsilon <= 1.0, "effective dimension: epsilon must be in (0, 1]");
  double r = 0.0;
  for (std::size_t m = 0; m < explained_ratio.size(); ++m) {
    r += explained_ratio[m];
    if (r >= epsilon - 1e-12) return m + 1;
  }
  return std::max<std::size_t>(explained_ratio.size(), 1);
}

EffectiveDimension EffectiveDim(const Matrix& a, double epsilon) {
  Require(epsilon > 0.0 && epsilon <= 1.0, "effective dimension: epsilon must be in (0, 1]");
  Require(a.rows() >= 2, "effective dimension: need at least two rows");
  const numerics::PcaResult pca = numerics::Pca(a);
  if (pca.degenerate) return {1, true};
  return {EffectiveDimFromRatios(pca.explained_ratio, epsilon), false};
}

CosineStat TokenPairCosine(const TokenGroups& groups, std::size_t pair_budget,
                           RngStream& stream) {
  Require(pair_budget > 0, "pair budget must be positive");
  const std::size_t t = groups.size();
  Require(t >= 2, "inter-token cosine needs at least two distinct tokens");
  for (const auto& g : groups) Require(!g.empty(), "token group without instances");
  CosineStat stat;
  stat.tokens = t;
  const std::size_t all_pairs = t * (t - 1) / 2;
  auto draw = [&](std::size_t i, std::size_t j) {
    const auto& gi = groups[i];
    const auto& gj = groups[j];
    const auto a = gi[gi.size() == 1 ? 0 : stream.UniformIndex(gi.size())];
    const auto b = gj[gj.size() == 1 ? 0 : stream.UniformIndex(gj.size())];
    return Cosine(a, b);
  };
  double sum = 0.0;
  double sum_sq = 0.0;
  if (all_pairs <= pair_budget) {
    stat.exhaustive = true;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = i + 1; j < t; ++j) {
        const double c = draw(i, j);
        sum += c;
        sum_sq += c * c;
      }
    stat.pairs = all_pairs;
  } else {
    for (std::size_t p = 0; p < pair_budget; ++p) {
      const std::size_t i = stream.UniformIndex(t);
      std::size_t j = stream.UniformIndex(t - 1);
      if (j >= i) ++j;
      const double c = draw(i, j);
      sum += c;
      sum_sq += c * c;
    }
    stat.pairs = pair_budget;
  }
  const double n = static_cast<double>(stat.pairs);
  stat.value = sum / n;
  if (stat.pairs > 1) {
    const double var = std::max(0.0, (sum_sq - n * stat.value * stat.value) / (n - 1.0));
    stat.std_error = std::sqrt(var / n);
  }
  return stat;
}

CosineStat InterTokenCos(const EmbeddingDump& dump, std::uint32_t layer,
                         std::size_t pair_budget, RngStream& stream) {
  TokenGroups groups;
  std::size_t zeros = 0;
  for (const auto& [token, indices] : dump.TokenIndex(layer)) {
    std::vector<std::span<const double>> members;
    for (std::size_t idx : indices) {
      const std::span<const double> v = dump.records()[idx].vector;
      if (IsZero(v)) {
        ++zeros;
        continue;
      }
      members.push_back(v);
    }
    if (!members.empty()) groups.push_back(std::move(members));
  }
  CosineStat stat = TokenPairCosine(groups, pair_budget, stream);
  stat.zero_vectors_excluded = zeros;
  return stat;
}

Clustering KMeans(const Matrix& x, std::size_t k, RngStream& stream,
                  const KMeansOptions& options) {
  Require(k >= 1, "kmeans: k must be positive");
  Require(k <= x.rows(), "kmeans: k exceeds the number of points");
  Require(options.restarts >= 1 && options.max_iterations >= 1, "kmeans: bad options");
  Require(x.AllFinite(), "kmeans: non-finite input");
  Clustering best;
  for (int r = 0; r < options.restarts; ++r) {
    RngStream seeds = stream.Derive(static_cast<std::uint64_t>(r));
    Clustering c = Lloyd(x, PlusPlusSeeds(x, k, seeds), options);
    if (r == 0 || c.wcss < best.wcss) best = std::move(c);
  }
  // Advance the caller's stream so consecutive calls differ.
  stream.NextU64();
  return best;
}

SilhouetteResult Silhouette(const Matrix& x, std::span<const std::size_t> assignment,
                            std::size_t k) {
  const std::size_t n = x.rows();
  Require(assignment.size() == n, "silhouette: assignment size mismatch");
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignment) {
    Require(a < k, "silhouette: cluster id out of range");
    ++sizes[a];
  }
  const auto populated = std::count_if(sizes.begin(), sizes.end(), [](auto s) { return s > 0; });
  Require(populated >= 2, "silhouette: needs at least two non-empty clusters");
  SilhouetteResult out;
  out.scores.assign(n, 0.0);
  std::vector<double> sums(k);
  for (std::size_t p = 0; p < n; ++p) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      sums[assignment[q]] += std::sqrt(SquaredDistance(x.row(p), x.row(q)));
    }
    const std::size_t own = assignment[p];
    if (sizes[own] == 1) continue;
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own || sizes[c] == 0) continue;
      b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    out.scores[p] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  out.mean = std::accumulate(out.scores.begin(), out.scores.end(), 0.0) / static_cast<double>(n);
  return out;
}

ClusterSelection SelectClusterCount(const Matrix& x, std::size_t k_min, std::size_t k_max,
                                    RngStream& stream, std::size_t silhouette_sample) {
  Require(k_min >= 2 && k_min <= k_max, "cluster selection: bad k range");
  Require(x.rows() >= k_max, "cluster selection: fewer points than k_max");
  // Fixed subsample shared by every k so scores are comparable.
  std::vector<std::size_t> subset(x.rows());
  std::iota(subset.begin(), subset.end(), 0);
  const bool sampled = silhouette_sample > 0 && silhouette_sample < x.rows();
  if (sampled) {
    RngStream pick = stream.Derive(0x5117);
    for (std::size_t i = 0; i < silhouette_sample; ++i)
      std::swap(subset[i], subset[i + pick.UniformIndex(subset.size() - i)]);
    subset.resize(silhouette_sample);
    std::sort(subset.begin(), subset.end());
  }
  Matrix xs = sampled ? Matrix(subset.size(), x.cols()) : Matrix();
  if (sampled)
    for (std::size_t i = 0; i < subset.size(); ++i)
      std::copy(x.row(subset[i]).begin(), x.row(subset[i]).end(), xs.row(i).begin());

  ClusterSelection out;
  bool first = true;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    RngStream ks = stream.Derive(k);
    Clustering c = KMeans(x, k, ks);
    double mean = 0.0;
    if (sampled) {
      std::vector<std::size_t> sub_assign(subset.size());
      for (std::size_t i = 0; i < subset.size(); ++i) sub_assign[i] = c.assignment[subset[i]];
      const auto distinct = std::set<std::size_t>(sub_assign.begin(), sub_assign.end()).size();
      mean = distinct >= 2 ? Silhouette(xs, sub_assign, k).mean : 0.0;
    } else {
      mean = Silhouette(x, c.assignment, k).mean;
    }
    out.scores.emplace_back(k, mean);
    if (first || mean > out.mean_silhouette) {
      out.best_k = k;
      out.mean_silhouette = mean;
      out.clustering = std::move(c);
      first = false;
    }
  }
  out.low_silhouette = out.mean_silhouette < kLowSilhouette;
  return out;
}

AdjustedCosine AdjustedInterTokenCos(const EmbeddingDump& dump, std::uint32_t layer,
                                     const Clustering& clustering, std::size_t pair_budget,
                                     RngStream& stream) {
  const std::vector<std::size_t> rows = dump.LayerRecords(layer);
  Require(clustering.assignment.size() == rows.size(),
          "adjusted cosine: clustering does not cover the layer's records");
  const std::size_t k = clustering.k;
  const std::size_t dim = dump.dim();
  AdjustedCosine out;
  out.per_cluster.assign(k, std::numeric_limits<double>::quiet_NaN());

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Require(clustering.assignment[i] < k, "adjusted cosine: cluster id out of range");
    members[clustering.assignment[i]].push_back(i);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& idx = members[c];
    if (idx.empty()) {
      ++out.clusters_skipped;
      continue;
    }
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i : idx) {
      const auto& v = dump.records()[rows[i]].vector;
      for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
    }
    for (double& m : mean) m /= static_cast<double>(idx.size());
    Matrix shifted(idx.size(), dim);
    std::map<std::uint32_t, std::vector<std::span<const double>>> by_token;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& rec = dump.records()[rows[idx[r]]];
      auto dst = shifted.row(r);
      for (std::size_t d = 0; d < dim; ++d) dst[d] = rec.vector[d] - mean[d];
      if (IsZero(dst)) {
        ++out.zero_vectors_excluded;
        continue;
      }
      by_token[rec.token_id].push_back(shifted.row(r));
    }
    if (by_token.size() < 2) {
      ++out.clusters_skipped;
      continue;
    }
    TokenGroups groups;
    for (auto& [token, vs] : by_token) groups.push_back(std::move(vs));
    RngStream cs = stream.Derive(c);
    const double value = TokenPairCosine(groups, pair_budget, cs).value;
    out.per_cluster[c] = value;
    total += value;
    ++out.clusters_used;
  }
  if (out.clusters_used == 0)
    Fail(ErrorCode::kUndefinedMetric, "adjusted cosine: every cluster has fewer than two tokens");
  out.value = total / static_cast<double>(out.clusters_used);
  return out;
}

std::vector<LayerIsotropy> Analyze(const EmbeddingDump& dump, const AnalyzeOptions& options) {
  const std::vector<std::uint32_t> layers = dump.Layers();
  Require(!layers.empty(), "analyze: embedding dump is empty");
  std::vector<LayerIsotropy> out(layers.size());
  ParallelFor(layers.size(), options.workers, [&](std::size_t li) {
    const std::uint32_t layer = layers[li];
    RngStream base(options.seed, layer);
    LayerIsotropy& r = out[li];
    r.layer = layer;
    const Matrix x = dump.LayerMatrix(layer);
    r.records = x.rows();
    Require(x.rows() >= 2, "analyze: layer needs at least two records");

    const numerics::PcaResult pca = numerics::Pca(x);
    r.pca_degenerate = pca.degenerate;
    r.explained_ratio = pca.explained_ratio;
    r.d08 = pca.degenerate ? 1 : EffectiveDimFromRatios(pca.explained_ratio, 0.8);
    r.d09 = pca.degenerate ? 1 : EffectiveDimFromRatios(pca.explained_ratio, 0.9);
    r.pca3 = numerics::Project(x, pca, std::min<std::size_t>(3, x.cols()));

    RngStream cos_stream = base.Derive(1);
    r.zeta_cos = InterTokenCos(dump, layer, options.pair_budget, cos_stream);
    r.tokens = r.zeta_cos.tokens;

    const std::size_t k_max = std::min(options.k_max, x.rows());
    RngStream cluster_stream = base.Derive(2);
    ClusterSelection sel =
        SelectClusterCount(x, options.k_min, k_max, cluster_stream, options.silhouette_sample);
    r.cluster_count = sel.best_k;
    r.mean_silhouette = sel.mean_silhouette;
    r.low_silhouette = sel.low_silhouette;
    r.silhouette_by_k = sel.scores;
    r.assignment = sel.clustering.assignment;

    RngStream adj_stream = base.Derive(3);
    r.zeta_prime =
        AdjustedInterTokenCos(dump, layer, sel.clustering, options.pair_budget, adj_stream);

    const theory::IsotropyPartition iso = theory::IsotropyFromPartition(x);
    r.isotropy_partition = iso.value;
    r.partition_degenerate = iso.degenerate;

    r.token_ids.reserve(x.rows());
    for (std::size_t idx : dump.LayerRecords(layer))
      r.token_ids.push_back(dump.records()[idx].token_id);
  });
  return out;
}

}  // namespace isoprobe::isotropy
