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

#ifndef ISOPROBE_CORE_NUMERICS_HPP_
#define ISOPROBE_CORE_NUMERICS_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace isoprobe::numerics {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix Identity(std::size_t n);
  static Matrix Diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> column(std::size_t c) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  Matrix Transposed() const;
  bool AllFinite() const;
  double FrobeniusNorm() const;
  double MaxAbs() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(const Matrix& a, const Matrix& b);

// AᵀA without forming the transpose.
Matrix Gram(const Matrix& a);
// A·Bᵀ.
Matrix MultiplyTransposed(const Matrix& a, const Matrix& b);
std::vector<double> MatVec(const Matrix& a, std::span<const double> x);

double Dot(std::span<const double> a, std::span<const double> b);
double SquaredNorm(std::span<const double> a);
double Norm(std::span<const double> a);

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column i pairs with eigenvalues[i]
  int sweeps = 0;
};

// Cyclic Jacobi. Ties in eigenvalue keep the original diagonal order; each
// eigenvector is signed so its largest-magnitude entry is positive.
EigenDecomposition SymEigendecompose(const Matrix& m);

// Rebuilds Γ·diag(λ)·Γᵀ.
Matrix Reconstruct(const EigenDecomposition& e);

struct CholeskyResult {
  Matrix lower;
  double jitter = 0.0;
  int attempts = 0;
};

inline constexpr int kCholeskyMaxJitterAttempts = 6;

// Tries a plain factorization first. On failure adds jitter·I starting at
// 1e-9·mean(diag), growing tenfold, for at most six jittered attempts.
CholeskyResult CholeskyPsd(const Matrix& m);

struct PcaResult {
  std::vector<double> mean;
  Matrix components;                   // D×D, column i is the i-th axis
  std::vector<double> eigenvalues;     // covariance spectrum, descending
  std::vector<double> explained_ratio; // per component, sums to 1
  bool degenerate = false;             // zero total variance
};

PcaResult Pca(const Matrix& a);

// Rows of `a` centered by `pca.mean` and projected on the first `m` axes.
Matrix Project(const Matrix& a, const PcaResult& pca, std::size_t m);

// Largest singular value by power iteration on MᵀM.
double SpectralNorm(const Matrix& m);

}  // namespace isoprobe::numerics

#endif  // ISOPROBE_CORE_NUMERICS_HPP_
