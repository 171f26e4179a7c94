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

#ifndef ISOPROBE_CORE_VERIFICATION_HPP_
#define ISOPROBE_CORE_VERIFICATION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "attention_model.hpp"
#include "numerics.hpp"
#include "rng.hpp"
#include "theory_checks.hpp"

namespace isoprobe::theory {

struct ShiftSuite {
  std::size_t heads = 0;
  std::size_t positions = 0;
  std::size_t heads_passed = 0;
  double max_total_variation = 0.0;
  double max_loss_difference = 0.0;
  double max_relu_argument = 0.0;
  double max_abs_shifted_downstream = 0.0;
  bool passed = false;
};

// Logits at every predicted position of every window, with the observed
// next token as target.
std::vector<LogitPosition> CollectPositions(const model::ModelParams& params,
                                            std::span<const model::Window> windows,
                                            std::size_t context_length);

// Samples `heads` downstream heads and runs the shift attack for each.
ShiftSuite RunShiftSuite(std::span<const LogitPosition> positions, std::size_t heads,
                         RngStream& stream);

struct RandomInstance {
  Matrix psi;
  Matrix lambda;
};

// Ψ ~ N(0, 1) entries with n in [2, max_n], D in [2, max_dim]; Λ a Gaussian
// matrix rescaled to ‖Λ‖₂ = u·max_norm with u ~ U(0, 1].
RandomInstance RandomBoundInstance(RngStream& stream, std::size_t max_n, std::size_t max_dim,
                                   double max_norm);

struct BoundCase {
  std::size_t n = 0;
  std::size_t dim = 0;
  double lambda_norm = 0.0;
  double bound = 0.0;
  double main_text_bound = 0.0;
  double measured = 0.0;
  double margin = 0.0;
};

struct BoundSuite {
  std::vector<BoundCase> cases;
  std::size_t holds = 0;
  std::size_t main_text_holds = 0;
  double min_margin = 0.0;
  bool passed = false;
};

// Instance i uses stream.Derive(i).
BoundSuite RunBoundSuite(std::size_t count, std::size_t max_n, std::size_t max_dim,
                         double max_norm, const RngStream& stream, int workers);

struct DescentResult {
  double best_objective = 0.0;
  Matrix best_lambda;
};

// Gradient descent over rank-m factorizations Λ = A·Bᵀ with backtracking,
// from `starts` random initializations. The result is an upper bound on the
// rank-m optimum found independently of the closed form.
DescentResult RankConstrainedDescent(const Matrix& psi, std::size_t rank, std::size_t starts,
                                     RngStream& stream, std::size_t iterations = 3000);

struct LambdaCase {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t rank = 0;
  double objective = 0.0;
  double trailing_sum = 0.0;
  double relative_error = 0.0;
  double descent_objective = 0.0;
  double descent_improvement = 0.0;  // objective - descent objective, relative
};

inline constexpr double kDescentTolerance = 1e-6;

struct LambdaSuite {
  std::vector<LambdaCase> cases;
  double max_relative_error = 0.0;
  double max_descent_improvement = 0.0;
  bool passed = false;
};

// Centered Ψ with n in [D+1, max(max_n, D+1)], D in [2, max_dim], m in [1, D-1].
LambdaSuite RunLambdaSuite(std::size_t count, std::size_t max_n, std::size_t max_dim,
                           std::size_t descent_starts, const RngStream& stream, int workers);

struct ApproxCase {
  std::vector<ApproxRow> centered;
  std::vector<ApproxRow> uncentered;
  bool monotone = false;       // every error shrinks at least 2x per step
  bool centering_helps = false;  // at the smallest ρ
};

struct ApproxSuite {
  std::vector<ApproxCase> cases;
  std::size_t monotone = 0;
  std::size_t centering_helps = 0;
};

ApproxSuite RunApproxSuite(std::size_t count, std::span<const double> rhos,
                           const RngStream& stream);

}  // namespace isoprobe::theory

#endif  // ISOPROBE_CORE_VERIFICATION_HPP_
