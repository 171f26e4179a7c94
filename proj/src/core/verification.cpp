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

#include "verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "parallel.hpp"

namespace isoprobe::theory {
namespace {

Matrix GaussianMatrix(std::size_t rows, std::size_t cols, double scale, RngStream& stream) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * stream.Gaussian();
  return m;
}

// f(N) = ‖Ψ - Ψ·N·G‖², N = Λᵀ, G = ΨᵀΨ.
double FactorObjective(const Matrix& psi, const Matrix& g, const Matrix& p, const Matrix& q,
                       Matrix* residual) {
  const Matrix n = numerics::MultiplyTransposed(p, q);
  Matrix r = psi - psi * n * g;
  const double f = numerics::SquaredNorm(r.data());
  if (residual != nullptr) *residual = std::move(r);
  return f;
}

}  // namespace

std::vector<LogitPosition> CollectPositions(const model::ModelParams& params,
                                            std::span<const model::Window> windows,
                                            std::size_t context_length) {
  std::vector<LogitPosition> out;
  for (const auto& w : windows) {
    std::vector<std::vector<double>> logits = model::PredictionLogits(params, w, context_length);
    for (std::size_t l = 0; l < logits.size(); ++l)
      out.push_back({std::move(logits[l]), w.tokens[context_length + l]});
  }
  return out;
}

ShiftSuite RunShiftSuite(std::span<const LogitPosition> positions, std::size_t heads,
                         RngStream& stream) {
  Require(heads >= 1, "shift suite: need at least one head");
  Require(!positions.empty(), "shift suite: no positions");
  ShiftSuite s;
  s.heads = heads;
  s.positions = positions.size();
  s.max_relu_argument = -std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < heads; ++h) {
    const DownstreamHead head = DownstreamHead::Sample(positions.front().logits.size(), stream);
    const ShiftVerification v = ShiftAttack(positions, head);
    if (v.passed) ++s.heads_passed;
    s.max_total_variation = std::max(s.max_total_variation, v.max_total_variation);
    s.max_loss_difference = std::max(s.max_loss_difference, v.max_loss_difference);
    s.max_relu_argument = std::max(s.max_relu_argument, v.max_relu_argument);
    s.max_abs_shifted_downstream =
        std::max(s.max_abs_shifted_downstream, v.max_abs_shifted_downstream);
  }
  s.passed = s.heads_passed == heads;
  return s;
}

RandomInstance RandomBoundInstance(RngStream& stream, std::size_t max_n, std::size_t max_dim,
                                   double max_norm) {
  Require(max_n >= 2 && max_dim >= 2 && max_norm > 0.0, "bound instance: bad limits");
  const std::size_t n = 2 + stream.UniformIndex(max_n - 1);
  const std::size_t d = 2 + stream.UniformIndex(max_dim - 1);
  RandomInstance inst;
  inst.psi = GaussianMatrix(n, d, 1.0, stream);
  inst.lambda = GaussianMatrix(d, d, 1.0, stream);
  const double target = (1.0 - stream.Uniform()) * max_norm;  // (0, max_norm]
  inst.lambda *= target / numerics::SpectralNorm(inst.lambda);
  return inst;
}

BoundSuite RunBoundSuite(std::size_t count, std::size_t max_n, std::size_t max_dim,
                         double max_norm, const RngStream& stream, int workers) {
  BoundSuite s;
  s.cases.resize(count);
  ParallelFor(count, workers, [&](std::size_t i) {
    RngStream is = stream.Derive(i);
    const RandomInstance inst = RandomBoundInstance(is, max_n, max_dim, max_norm);
    const BoundReport r = JacobianBound(inst.psi, inst.lambda);
    s.cases[i] = {inst.psi.rows(), inst.psi.cols(), r.lambda_norm, r.bound,
                  r.main_text_bound, r.measured, r.margin};
  });
  s.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& c : s.cases) {
    if (c.margin >= -kBoundMarginTolerance) ++s.holds;
    if (c.measured <= c.main_text_bound + kBoundMarginTolerance) ++s.main_text_holds;
    s.min_margin = std::min(s.min_margin, c.margin);
  }
  s.passed = count > 0 && s.holds == count;
  return s;
}

DescentResult RankConstrainedDescent(const Matrix& psi, std::size_t rank, std::size_t starts,
                                     RngStream& stream, std::size_t iterations) {
  const std::size_t d = psi.cols();
  Require(rank >= 1 && rank <= d && starts >= 1, "descent: bad rank or start count");
  const Matrix g = numerics::Gram(psi);
  const double scale = 1.0 / std::max(numerics::SpectralNorm(g), 1e-300);
  DescentResult best;
  best.best_objective = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < starts; ++s) {
    Matrix p = GaussianMatrix(d, rank, std::sqrt(scale), stream);
    Matrix q = GaussianMatrix(d, rank, std::sqrt(scale), stream);
    Matrix r;
    double f = FactorObjective(psi, g, p, q, &r);
    double step = scale * scale;
    for (std::size_t it = 0; it < iterations; ++it) {
      // ∂f/∂N = -2 Ψᵀ R G.
      const Matrix dn = (psi.Transposed() * r * g) * -2.0;
      const Matrix dp = dn * q;
      const Matrix dq = dn.Transposed() * p;
      const double gsq = numerics::SquaredNorm(dp.data()) + numerics::SquaredNorm(dq.data());
      if (gsq == 0.0) break;
      step *= 2.0;
      bool moved = false;
      for (int tries = 0; tries < 60; ++tries) {
        Matrix np = p - dp * step;
        Matrix nq = q - dq * step;
        Matrix nr;
        const double nf = FactorObjective(psi, g, np, nq, &nr);
        if (nf <= f - 1e-4 * step * gsq) {
          const double previous = f;
          p = std::move(np);
          q = std::move(nq);
          r = std::move(nr);
          f = nf;
          moved = previous - f > 1e-15 * std::max(previous, 1e-300);
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    if (f < best.best_objective) {
      best.best_objective = f;
      best.best_lambda = numerics::MultiplyTransposed(q, p);
    }
  }
  return best;
}

LambdaSuite RunLambdaSuite(std::size_t count, std::size_t max_n, std::size_t max_dim,
                           std::size_t descent_starts, const RngStream& stream, int workers) {
  Require(max_dim >= 2, "lambda suite: max_dim must be >= 2");
  LambdaSuite s;
  s.cases.resize(count);
  ParallelFor(count, workers, [&](std::size_t i) {
    RngStream is = stream.Derive(i);
    const std::size_t d = 2 + is.UniformIndex(max_dim - 1);
    const std::size_t n_hi = std::max(max_n, d + 1);
    const std::size_t n = d + 1 + is.UniformIndex(n_hi - d);
    const std::size_t m = 1 + is.UniformIndex(d - 1);
    const Matrix psi = CenterRows(GaussianMatrix(n, d, 1.0, is));
    const LambdaSolution sol = OptimalLambda(psi, m);
    RngStream ds = is.Derive(1);
    const DescentResult desc = RankConstrainedDescent(psi, m, descent_starts, ds);
    LambdaCase& c = s.cases[i];
    c.n = n;
    c.dim = d;
    c.rank = m;
    c.objective = sol.objective;
    c.trailing_sum = sol.trailing_sum;
    c.relative_error = sol.relative_error;
    c.descent_objective = desc.best_objective;
    c.descent_improvement =
        (sol.objective - desc.best_objective) / std::max(1.0, std::abs(sol.objective));
  });
  for (const auto& c : s.cases) {
    s.max_relative_error = std::max(s.max_relative_error, c.relative_error);
    s.max_descent_improvement = std::max(s.max_descent_improvement, c.descent_improvement);
  }
  s.passed = count > 0 && s.max_relative_error <= kLambdaRelativeTolerance &&
             s.max_descent_improvement <= kDescentTolerance;
  return s;
}

ApproxSuite RunApproxSuite(std::size_t count, std::span<const double> rhos,
                           const RngStream& stream) {
  Require(!rhos.empty(), "approx suite: empty sweep");
  ApproxSuite s;
  for (std::size_t i = 0; i < count; ++i) {
    RngStream is = stream.Derive(i);
    const std::size_t n = 3 + is.UniformIndex(6);
    const std::size_t d = 2 + is.UniformIndex(5);
    const Matrix psi = GaussianMatrix(n, d, 1.0, is);
    const Matrix dir = GaussianMatrix(d, d, 1.0, is);
    ApproxCase c;
    c.centered = SmallLambdaApprox(CenterRows(psi), dir, rhos);
    c.uncentered = SmallLambdaApprox(psi, dir, rhos);
    c.monotone = true;
    for (std::size_t k = 1; k < c.centered.size(); ++k) {
      const auto& a = c.centered[k - 1];
      const auto& b = c.centered[k];
      if (b.max_weight_error > 0.5 * a.max_weight_error ||
          b.substitution_error > 0.5 * a.substitution_error)
        c.monotone = false;
    }
    c.centering_helps =
        c.centered.back().substitution_error < c.uncentered.back().substitution_error;
    if (c.monotone) ++s.monotone;
    if (c.centering_helps) ++s.centering_helps;
    s.cases.push_back(std::move(c));
  }
  return s;
}

}  // namespace isoprobe::theory
