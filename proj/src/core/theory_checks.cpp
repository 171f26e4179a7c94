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

#include "theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "attention_model.hpp"
#include "error.hpp"

namespace isoprobe::theory {

PartitionValue PartitionFunction(std::span<const double> encoding, const Matrix& embed) {
  Require(encoding.size() == embed.cols(), "partition_function: dimension mismatch");
  Require(embed.rows() >= 1, "partition_function: empty vocabulary");
  for (double v : encoding)
    Require(std::isfinite(v), "partition_function: non-finite encoding");
  Require(embed.AllFinite(), "partition_function: non-finite embedding table");
  const std::vector<double> logits = numerics::MatVec(embed, encoding);
  PartitionValue out;
  out.log_z = model::LogSumExp(logits);
  out.z = std::exp(out.log_z);
  if (!std::isfinite(out.z) || !std::isfinite(out.log_z))
    Fail(ErrorCode::kNumericFailure,
         "partition_function: Z overflows (log Z = " + std::to_string(out.log_z) + ")");
  return out;
}

IsotropyPartition IsotropyFromPartition(const Matrix& psi) {
  Require(psi.rows() >= 2, "isotropy_partition: need at least 2 rows");
  Require(psi.AllFinite(), "isotropy_partition: non-finite input");
  IsotropyPartition out;
  if (psi.MaxAbs() == 0.0) {
    out.degenerate = true;
    out.value = 1.0;
    return out;
  }
  const numerics::EigenDecomposition eig = numerics::SymEigendecompose(numerics::Gram(psi));
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<double> logits(psi.rows());
  for (std::size_t k = 0; k < eig.eigenvalues.size(); ++k) {
    const std::vector<double> probe = eig.eigenvectors.column(k);
    for (double sign : {1.0, -1.0}) {
      for (std::size_t i = 0; i < psi.rows(); ++i)
        logits[i] = sign * numerics::Dot(psi.row(i), probe);
      const double log_z = model::LogSumExp(logits);
      out.log_z.push_back(log_z);
      lo = std::min(lo, log_z);
      hi = std::max(hi, log_z);
    }
  }
  out.value = std::exp(lo - hi);
  return out;
}

DownstreamHead DownstreamHead::Sample(std::size_t vocab_size, RngStream& stream) {
  DownstreamHead h;
  h.a.resize(vocab_size);
  h.b.resize(vocab_size);
  for (double& v : h.a) v = stream.Gaussian();
  for (double& v : h.b) v = stream.Gaussian();
  return h;
}

DownstreamValue Downstream(std::span<const double> logits, const DownstreamHead& head) {
  Require(logits.size() == head.a.size() && logits.size() == head.b.size(),
          "downstream_value: head size does not match logits");
  DownstreamValue out;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double arg = logits[i] - head.b[i];
    if (arg > 0.0) {
      out.value += head.a[i] * arg;
      out.active.push_back(i);
    }
  }
  return out;
}

ShiftVerification ShiftAttack(std::span<const LogitPosition> positions,
                              const DownstreamHead& head) {
  Require(!positions.empty(), "theorem1_shift: no logit positions");
  Require(!head.b.empty(), "theorem1_shift: empty head");
  double max_z = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < positions.size(); ++p) {
    const auto& z = positions[p].logits;
    Require(z.size() == head.b.size(), "theorem1_shift: head size does not match logits");
    for (double v : z)
      Require(std::isfinite(v),
              "theorem1_shift: non-finite logit at position " + std::to_string(p));
    max_z = std::max(max_z, *std::max_element(z.begin(), z.end()));
  }
  const double min_b = *std::min_element(head.b.begin(), head.b.end());

  ShiftVerification out;
  out.tau = (min_b - max_z) - 1.0;
  out.downstream_exactly_zero = true;
  out.max_relu_argument = -std::numeric_limits<double>::infinity();
  for (const auto& pos : positions) {
    std::vector<double> shifted(pos.logits.size());
    for (std::size_t j = 0; j < shifted.size(); ++j) {
      shifted[j] = pos.logits[j] + out.tau;
      out.max_relu_argument = std::max(out.max_relu_argument, shifted[j] - head.b[j]);
    }
    const std::vector<double> p = model::Softmax(pos.logits);
    const std::vector<double> q = model::Softmax(shifted);
    double tv = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) tv += std::abs(p[j] - q[j]);
    out.max_total_variation = std::max(out.max_total_variation, 0.5 * tv);
    if (pos.target) {
      const auto t = *pos.target;
      Require(t < pos.logits.size(), "theorem1_shift: target out of range");
      const double before = model::LogSumExp(pos.logits) - pos.logits[t];
      const double after = model::LogSumExp(shifted) - shifted[t];
      out.max_loss_difference = std::max(out.max_loss_difference, std::abs(after - before));
    }
    const DownstreamValue f = Downstream(shifted, head);
    out.max_abs_shifted_downstream = std::max(out.max_abs_shifted_downstream, std::abs(f.value));
    if (f.value != 0.0 || !f.active.empty()) out.downstream_exactly_zero = false;
    out.shifted.push_back(std::move(shifted));
  }
  out.passed = out.max_total_variation <= kShiftTolerance &&
               out.max_loss_difference <= kShiftTolerance && out.downstream_exactly_zero &&
               out.max_relu_argument < 0.0;
  return out;
}

Matrix JacobianFd(const MatrixMap& map, const Matrix& at, double step) {
  Require(at.AllFinite(), "jacobian_fd: non-finite input");
  Require(std::isfinite(step) && step > 0.0, "jacobian_fd: step must be positive");
  const Matrix base = map(at);
  const std::size_t out_size = base.size(), in_size = at.size();
  Matrix jac(out_size, in_size);
  Matrix probe = at;
  for (std::size_t c = 0; c < in_size; ++c) {
    const double orig = probe.data()[c];
    probe.data()[c] = orig + step;
    const Matrix plus = map(probe);
    probe.data()[c] = orig - step;
    const Matrix minus = map(probe);
    probe.data()[c] = orig;
    for (std::size_t r = 0; r < out_size; ++r)
      jac(r, c) = (plus.data()[r] - minus.data()[r]) / (2.0 * step);
  }
  if (!jac.AllFinite())
    Fail(ErrorCode::kNumericFailure, "jacobian_fd: non-finite difference quotient");
  return jac;
}

double DefaultFdStep(const Matrix& psi) { return 1e-6 * (1.0 + psi.MaxAbs()); }

Matrix AttentionJacobianFd(const Matrix& psi, const Matrix& lambda, double step) {
  return JacobianFd(
      [&lambda](const Matrix& x) { return model::SelfAttention(x, lambda, /*causal=*/false); },
      psi, step);
}

Matrix AttentionJacobianFd(const Matrix& psi, const Matrix& lambda) {
  return AttentionJacobianFd(psi, lambda, DefaultFdStep(psi));
}

BoundReport JacobianBound(const Matrix& psi, const Matrix& lambda) {
  Require(psi.rows() >= 1, "lemma1_bound: empty Ψ");
  Require(psi.AllFinite() && lambda.AllFinite(), "lemma1_bound: non-finite input");
  BoundReport r;
  const Matrix g = model::SelfAttention(psi, lambda, /*causal=*/false, &r.weights);
  const std::size_t n = psi.rows(), d = psi.cols();
  r.lambda_norm = numerics::SpectralNorm(lambda);

  double main = 0.0, cross = 0.0, norms = 0.0;
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) diff[k] = psi(j, k) - g(i, k);
      const double sq = numerics::SquaredNorm(diff);
      if (i == j)
        main += (r.weights(i, i) + 0.5) * sq;
      else
        cross += r.weights(i, j) * sq;
    }
    norms += numerics::SquaredNorm(psi.row(i));
  }
  r.main_term = r.lambda_norm * main;
  r.residual = r.lambda_norm * cross + 0.5 * r.lambda_norm * norms;
  r.additive_n = static_cast<double>(n);
  r.bound = r.main_term + r.residual + r.additive_n;
  r.main_text_bound = r.main_term + r.residual;

  r.measured = numerics::SpectralNorm(AttentionJacobianFd(psi, lambda));
  r.margin = r.bound - r.measured;
  r.main_text_holds = r.measured <= r.main_text_bound + kBoundMarginTolerance;
  return r;
}

Matrix CenterRows(const Matrix& psi) {
  Matrix out = psi;
  if (psi.rows() == 0) return out;
  for (std::size_t c = 0; c < psi.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < psi.rows(); ++r) mean += psi(r, c);
    mean /= static_cast<double>(psi.rows());
    for (std::size_t r = 0; r < psi.rows(); ++r) out(r, c) -= mean;
  }
  return out;
}

double ReconstructionObjective(const Matrix& psi, const Matrix& lambda) {
  Require(lambda.rows() == psi.cols() && lambda.cols() == psi.cols(),
          "objective: Λ must be D×D");
  const Matrix m = numerics::Gram(psi) * lambda;
  double total = 0.0;
  std::vector<double> diff(psi.cols());
  for (std::size_t i = 0; i < psi.rows(); ++i) {
    const std::vector<double> v = numerics::MatVec(m, psi.row(i));
    for (std::size_t k = 0; k < psi.cols(); ++k) diff[k] = psi(i, k) - v[k];
    total += numerics::SquaredNorm(diff);
  }
  return total;
}

LambdaSolution OptimalLambda(const Matrix& psi, std::size_t rank) {
  const std::size_t d = psi.cols();
  Require(rank >= 1 && rank <= d, "theorem2_optimal_lambda: need 1 <= m <= D");
  Require(psi.AllFinite(), "theorem2_optimal_lambda: non-finite input");
  const Matrix centered = CenterRows(psi);
  numerics::EigenDecomposition eig = numerics::SymEigendecompose(numerics::Gram(centered));

  LambdaSolution out;
  out.rank = rank;
  const double top = eig.eigenvalues.front();
  if (!(top > 0.0) || eig.eigenvalues[rank - 1] <= 1e-12 * top)
    Fail(ErrorCode::kRankDeficient,
         "theorem2_optimal_lambda: ΨᵀΨ has fewer than " + std::to_string(rank) +
             " eigenvalues above 1e-12·λ_1");

  out.lambda = Matrix(d, d);
  for (std::size_t k = 0; k < rank; ++k) {
    const double inv = 1.0 / eig.eigenvalues[k];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out.lambda(i, j) += inv * eig.eigenvectors(i, k) * eig.eigenvectors(j, k);
  }
  out.objective = ReconstructionObjective(centered, out.lambda);
  double total = 0.0;
  for (std::size_t q = 0; q < d; ++q) {
    total += eig.eigenvalues[q];
    if (q >= rank) out.trailing_sum += eig.eigenvalues[q];
  }
  const double denom = out.trailing_sum >= 1e-12 * total ? out.trailing_sum : total;
  out.relative_error = std::abs(out.objective - out.trailing_sum) / denom;
  out.matches = out.relative_error <= kLambdaRelativeTolerance;
  out.eigenvalues = std::move(eig.eigenvalues);
  out.eigenvectors = std::move(eig.eigenvectors);
  return out;
}

std::vector<ApproxRow> SmallLambdaApprox(const Matrix& psi, const Matrix& lambda_direction,
                                         std::span<const double> rhos) {
  Require(psi.rows() >= 1, "small_lambda_approx: empty Ψ");
  const std::size_t n = psi.rows();
  const double dir_norm = lambda_direction.FrobeniusNorm();
  std::vector<ApproxRow> rows;
  for (double rho : rhos) {
    const Matrix lambda =
        dir_norm > 0.0 ? lambda_direction * (rho / dir_norm) : lambda_direction;
    Matrix p;
    const Matrix g = model::SelfAttention(psi, lambda, /*causal=*/false, &p);
    const Matrix bilinear = numerics::MultiplyTransposed(psi * lambda, psi);
    ApproxRow row;
    row.rho = rho;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double approx = (1.0 + bilinear(i, j)) / static_cast<double>(n);
        row.max_weight_error = std::max(row.max_weight_error, std::abs(p(i, j) - approx));
      }
    double lhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < psi.cols(); ++k) {
        const double dlt = psi(i, k) - g(i, k);
        s += dlt * dlt;
      }
      lhs += s;
    }
    row.substitution_error = std::abs(lhs - ReconstructionObjective(psi, lambda));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace isoprobe::theory
