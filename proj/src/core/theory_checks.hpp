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

#ifndef ISOPROBE_CORE_THEORY_CHECKS_HPP_
#define ISOPROBE_CORE_THEORY_CHECKS_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "numerics.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"

namespace isoprobe::theory {

using numerics::Matrix;

struct PartitionValue {
  double log_z = 0.0;
  double z = 0.0;
};

// Z = Σ_i exp(⟨encoding, embed_i⟩), accumulated after max subtraction.
PartitionValue PartitionFunction(std::span<const double> encoding, const Matrix& embed);

struct IsotropyPartition {
  double value = 1.0;  // I = min Z / max Z over the probe set
  bool degenerate = false;
  std::vector<double> log_z;  // per probe: +γ_1, -γ_1, +γ_2, ...
};

// Probes are ±γ_i for the unit eigenvectors γ_i of ΨᵀΨ, so the result does
// not depend on eigenvector sign conventions.
IsotropyPartition IsotropyFromPartition(const Matrix& psi);

// f = Σ_i a_i ReLU(z_i - b_i).
struct DownstreamHead {
  std::vector<double> a;
  std::vector<double> b;

  static DownstreamHead Sample(std::size_t vocab_size, RngStream& stream);
};

struct DownstreamValue {
  double value = 0.0;
  std::vector<std::size_t> active;  // {i : z_i > b_i}
};

DownstreamValue Downstream(std::span<const double> logits, const DownstreamHead& head);

// One predicted position: its logits and, when known, the observed token.
struct LogitPosition {
  std::vector<double> logits;
  std::optional<tokenizer::TokenId> target;
};

struct ShiftVerification {
  double tau = 0.0;
  std::vector<std::vector<double>> shifted;
  double max_total_variation = 0.0;  // between softmax(z) and softmax(z + τ)
  double max_loss_difference = 0.0;  // per-position |NLL(ẑ) - NLL(z)|
  double max_relu_argument = 0.0;    // max_{pos, j} (ẑ_j - b_j), must be <= -1
  double max_abs_shifted_downstream = 0.0;
  bool downstream_exactly_zero = false;
  bool passed = false;
};

inline constexpr double kShiftTolerance = 1e-12;

// τ = (min_j b_j - max over positions and j of z_j) - 1; ẑ = z + τ.
ShiftVerification ShiftAttack(std::span<const LogitPosition> positions,
                              const DownstreamHead& head);

// Vectorized central-difference Jacobian of a map R^{n×D} → R^{n×D}; entry
// ((i,a),(j,b)) is ∂out_i[a]/∂in_j[b] (row-major flattening).
using MatrixMap = std::function<Matrix(const Matrix&)>;
Matrix JacobianFd(const MatrixMap& map, const Matrix& at, double step);

// Unmasked attention map with step 1e-6·(1 + max|Ψ|).
double DefaultFdStep(const Matrix& psi);
Matrix AttentionJacobianFd(const Matrix& psi, const Matrix& lambda);
Matrix AttentionJacobianFd(const Matrix& psi, const Matrix& lambda, double step);

struct BoundReport {
  double lambda_norm = 0.0;  // ‖Λ‖₂
  double main_term = 0.0;    // ‖Λ‖₂ Σ_i (p_ii + ½)|ψ_i - Σ_j p_ij ψ_j|²
  double residual = 0.0;     // Δ
  double additive_n = 0.0;   // n
  double bound = 0.0;        // main + Δ + n
  double main_text_bound = 0.0;  // main + Δ
  double measured = 0.0;     // ‖J‖₂ of the finite-difference Jacobian
  double margin = 0.0;       // bound - measured
  bool main_text_holds = false;
  Matrix weights;            // p
};

inline constexpr double kBoundMarginTolerance = 1e-6;

BoundReport JacobianBound(const Matrix& psi, const Matrix& lambda);

struct LambdaSolution {
  Matrix lambda;                     // Σ_{i<m} γ_i γ_iᵀ / λ_i
  double objective = 0.0;            // Σ_i |ψ_i - ΨᵀΨΛψ_i|² on centered Ψ
  double trailing_sum = 0.0;         // Σ_{q>m} λ_q
  double relative_error = 0.0;
  std::vector<double> eigenvalues;   // of ΨᵀΨ
  Matrix eigenvectors;
  std::size_t rank = 0;
  bool matches = false;
};

inline constexpr double kLambdaRelativeTolerance = 1e-8;

Matrix CenterRows(const Matrix& psi);

// Σ_i |ψ_i - ΨᵀΨΛψ_i|² evaluated directly on the given rows.
double ReconstructionObjective(const Matrix& psi, const Matrix& lambda);

// Rows are centered first. Throws rank-deficiency when λ_m <= 1e-12·λ_1.
LambdaSolution OptimalLambda(const Matrix& psi, std::size_t rank);

struct ApproxRow {
  double rho = 0.0;  // ‖Λ‖_F
  double max_weight_error = 0.0;    // max |p_ij - (1 + ψ_iᵀΛψ_j)/n|
  double substitution_error = 0.0;  // |Σ|ψ_i - Ψᵀp_i|² - Σ|ψ_i - ΨᵀΨΛψ_i|²|
};

inline const std::vector<double> kDefaultRhoSweep = {1.0, 1e-1, 1e-2, 1e-3};

// Λ is rescaled to each ‖Λ‖_F = ρ; rows of Ψ are used as given.
std::vector<ApproxRow> SmallLambdaApprox(const Matrix& psi, const Matrix& lambda_direction,
                                         std::span<const double> rhos);

}  // namespace isoprobe::theory

#endif  // ISOPROBE_CORE_THEORY_CHECKS_HPP_
