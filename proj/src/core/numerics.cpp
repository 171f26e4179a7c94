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

#include "numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace isoprobe::numerics {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  Require(data_.size() == rows_ * cols_,
          "matrix data length " + std::to_string(data_.size()) + " != " +
              std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::Diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::Transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Matrix::FrobeniusNorm() const { return Norm(data_); }

double Matrix::MaxAbs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  Require(rows_ == other.rows_ && cols_ == other.cols_, "shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  Require(rows_ == other.rows_ && cols_ == other.cols_, "shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  Require(a.cols() == b.rows(), "shape mismatch in matrix product");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix Gram(const Matrix& a) {
  const std::size_t d = a.cols();
  Matrix g(d, d);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double ai = row[i];
      if (ai == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) g(i, j) += ai * row[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

Matrix MultiplyTransposed(const Matrix& a, const Matrix& b) {
  Require(a.cols() == b.cols(), "shape mismatch in A·Bᵀ");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = Dot(a.row(i), b.row(j));
  return out;
}

std::vector<double> MatVec(const Matrix& a, std::span<const double> x) {
  Require(a.cols() == x.size(), "shape mismatch in matrix-vector product");
  std::vector<double> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = Dot(a.row(i), x);
  return out;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double SquaredNorm(std::span<const double> a) { return Dot(a, a); }

double Norm(std::span<const double> a) { return std::sqrt(SquaredNorm(a)); }

namespace {

void RequireSymmetric(const Matrix& m, const char* what) {
  Require(m.square(), std::string(what) + ": matrix is not square (" +
                          std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ")");
  Require(m.AllFinite(), std::string(what) + ": matrix has non-finite entries");
  const double tol = 1e-10 * m.MaxAbs();
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      Require(std::abs(m(i, j) - m(j, i)) <= tol,
              std::string(what) + ": matrix is not symmetric at (" +
                  std::to_string(i) + "," + std::to_string(j) + ")");
}

constexpr int kMaxJacobiSweeps = 60;

}  // namespace

EigenDecomposition SymEigendecompose(const Matrix& m) {
  RequireSymmetric(m, "sym_eigendecompose");
  const std::size_t n = m.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::Identity(n);

  const double norm = a.FrobeniusNorm();
  int sweep = 0;
  for (;; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= 1e-14 * norm || off == 0.0) break;
    if (sweep >= kMaxJacobiSweeps)
      Fail(ErrorCode::kNumericFailure,
           "sym_eigendecompose: Jacobi did not converge after " +
               std::to_string(sweep) + " sweeps");

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a(x, x) > a(y, y);
  });

  EigenDecomposition out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    out.eigenvalues[i] = a(src, src);
    std::size_t pivot = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (std::abs(v(k, src)) > std::abs(v(pivot, src))) pivot = k;
    const double sign = v(pivot, src) < 0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, i) = sign * v(k, src);
  }
  return out;
}

Matrix Reconstruct(const EigenDecomposition& e) {
  const std::size_t n = e.eigenvalues.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = e.eigenvalues[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = lambda * e.eigenvectors(i, k);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += gi * e.eigenvectors(j, k);
    }
  }
  return out;
}

namespace {

bool TryCholesky(const Matrix& m, double jitter, Matrix& lower) {
  const std::size_t n = m.rows();
  lower = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

CholeskyResult CholeskyPsd(const Matrix& m) {
  RequireSymmetric(m, "cholesky_psd");
  CholeskyResult result;
  result.attempts = 1;
  if (TryCholesky(m, 0.0, result.lower)) return result;

  const std::size_t n = m.rows();
  double mean_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_diag += m(i, i);
  mean_diag = n ? mean_diag / static_cast<double>(n) : 0.0;
  double jitter = 1e-9 * (mean_diag > 0.0 ? mean_diag : 1.0);
  for (int attempt = 0; attempt < kCholeskyMaxJitterAttempts; ++attempt) {
    ++result.attempts;
    if (TryCholesky(m, jitter, result.lower)) {
      result.jitter = jitter;
      return result;
    }
    jitter *= 10.0;
  }
  Fail(ErrorCode::kNotPositiveSemidefinite,
       "cholesky_psd: factorization failed after " +
           std::to_string(kCholeskyMaxJitterAttempts) +
           " jitter attempts (last jitter " + std::to_string(jitter / 10.0) + ")");
}

PcaResult Pca(const Matrix& a) {
  Require(a.rows() >= 2, "pca: need at least 2 rows, got " + std::to_string(a.rows()));
  Require(a.AllFinite(), "pca: input has non-finite entries");
  const std::size_t n = a.rows(), d = a.cols();
  PcaResult out;
  out.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out.mean[c] += a(r, c);
  for (double& m : out.mean) m /= static_cast<double>(n);

  Matrix centered = a;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) -= out.mean[c];
  Matrix cov = Gram(centered);
  cov *= 1.0 / static_cast<double>(n - 1);

  EigenDecomposition eig = SymEigendecompose(cov);
  out.components = std::move(eig.eigenvectors);
  out.eigenvalues = std::move(eig.eigenvalues);
  double total = 0.0;
  for (double l : out.eigenvalues) total += std::max(l, 0.0);
  out.explained_ratio.assign(d, 0.0);
  if (total <= 0.0) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < d; ++i)
    out.explained_ratio[i] = std::max(out.eigenvalues[i], 0.0) / total;
  return out;
}

Matrix Project(const Matrix& a, const PcaResult& pca, std::size_t m) {
  const std::size_t d = a.cols();
  Require(pca.mean.size() == d, "project: dimension mismatch");
  m = std::min(m, d);
  Matrix out(a.rows(), m);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c)
        s += (a(r, c) - pca.mean[c]) * pca.components(c, j);
      out(r, j) = s;
    }
  return out;
}

double SpectralNorm(const Matrix& m) {
  Require(m.AllFinite(), "spectral_norm: input has non-finite entries");
  const std::size_t n = m.cols();
  if (m.empty() || m.MaxAbs() == 0.0) return 0.0;

  RngStream stream(0x5eedULL, 0);
  std::vector<double> v(n);
  for (double& x : v) x = stream.Gaussian();

  constexpr int kMinIterations = 200;
  constexpr int kMaxIterations = 20000;
  double sigma_sq = 0.0;
  for (int it = 0; it < kMaxIterations; ++it) {
    const double nv = Norm(v);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    std::vector<double> mv = MatVec(m, v);
    const double next = SquaredNorm(mv);
    std::vector<double> w(n, 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double coeff = mv[r];
      auto row = m.row(r);
      for (std::size_t c = 0; c < n; ++c) w[c] += coeff * row[c];
    }
    const double delta = std::abs(next - sigma_sq);
    sigma_sq = next;
    v = std::move(w);
    if (it + 1 >= kMinIterations && delta <= 1e-12 * next) break;
  }
  return std::sqrt(sigma_sq);
}

}  // namespace isoprobe::numerics
