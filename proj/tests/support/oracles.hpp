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

// Independent reference implementations used only by tests.

#ifndef ISOPROBE_TESTS_ORACLES_HPP_
#define ISOPROBE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "numerics.hpp"
#include "rng.hpp"

namespace oracle {

using isoprobe::numerics::Matrix;

inline Matrix RandomMatrix(std::size_t r, std::size_t c, isoprobe::RngStream& s, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * s.Gaussian();
  return m;
}

inline Matrix RandomSymmetric(std::size_t n, isoprobe::RngStream& s) {
  Matrix a = RandomMatrix(n, n, s);
  return (a + a.Transposed()) * 0.5;
}

inline Matrix NaiveMultiply(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += (long double)a(i, k) * b(k, j);
      c(i, j) = static_cast<double>(acc);
    }
  return c;
}

inline Matrix NaiveTranspose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double MaxAbsDiff(const Matrix& a, const Matrix& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Householder QR of a square matrix: returns (Q, R).
inline std::pair<Matrix, Matrix> HouseholderQr(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix r = a;
  Matrix q = Matrix::Identity(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double norm = 0;
    for (std::size_t i = k; i < n; ++i) norm += r(i, k) * r(i, k);
    norm = std::sqrt(norm);
    if (norm == 0) continue;
    std::vector<double> v(n, 0.0);
    const double alpha = r(k, k) > 0 ? -norm : norm;
    v[k] = r(k, k) - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = r(i, k);
    double vv = 0;
    for (std::size_t i = k; i < n; ++i) vv += v[i] * v[i];
    if (vv == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0;
      for (std::size_t i = k; i < n; ++i) d += v[i] * r(i, j);
      for (std::size_t i = k; i < n; ++i) r(i, j) -= 2 * v[i] * d / vv;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0;
      for (std::size_t j = k; j < n; ++j) d += q(i, j) * v[j];
      for (std::size_t j = k; j < n; ++j) q(i, j) -= 2 * d * v[j] / vv;
    }
  }
  return {q, r};
}

// Eigenvalues of a symmetric matrix by shifted QR iteration with deflation,
// sorted descending.
inline std::vector<double> QrEigenvalues(Matrix a) {
  std::vector<double> out;
  std::size_t n = a.rows();
  while (n > 0) {
    if (n == 1) {
      out.push_back(a(0, 0));
      break;
    }
    int guard = 0;
    while (std::abs(a(n - 1, n - 2)) > 1e-15 * (std::abs(a(n - 1, n - 1)) + std::abs(a(n - 2, n - 2)) + 1e-300) &&
           guard++ < 10000) {
      // Wilkinson shift from the trailing 2x2 block.
      const double x = a(n - 2, n - 2), y = a(n - 1, n - 1), z = a(n - 1, n - 2);
      const double d = (x - y) / 2;
      const double mu = y - z * z / (d + (d >= 0 ? 1 : -1) * std::sqrt(d * d + z * z));
      Matrix b(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b(i, j) = a(i, j) - (i == j ? mu : 0.0);
      auto [q, r] = HouseholderQr(b);
      Matrix next = NaiveMultiply(r, q);
      for (std::size_t i = 0; i < n; ++i) next(i, i) += mu;
      a = next;
    }
    out.push_back(a(n - 1, n - 1));
    Matrix smaller(n - 1, n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = 0; j + 1 < n; ++j) smaller(i, j) = a(i, j);
    a = smaller;
    --n;
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

// Singular values by one-sided Jacobi rotations, descending.
inline std::vector<double> JacobiSingularValues(Matrix u) {
  const std::size_t m = u.rows(), n = u.cols();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0, beta = 0, gamma = 0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          gamma += u(i, p) * u(i, q);
        }
        if (std::abs(gamma) <= 1e-300) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2 * gamma);
        const double t = (zeta >= 0 ? 1 : -1) / (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
        const double c = 1 / std::sqrt(1 + t * t), s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
      }
    if (off < 1e-15) break;
  }
  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < m; ++i) s += u(i, j) * u(i, j);
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

inline double Distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Direct O(n^2) silhouette; singletons score 0.
inline std::vector<double> SilhouetteDirect(const Matrix& x, std::span<const std::size_t> label,
                                            std::size_t k) {
  const std::size_t n = x.rows();
  std::vector<std::size_t> size(k, 0);
  for (auto l : label) ++size[l];
  std::vector<double> s(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    if (size[label[p]] <= 1) continue;
    std::vector<double> sum(k, 0.0);
    for (std::size_t q = 0; q < n; ++q)
      if (q != p) sum[label[q]] += Distance(x.row(p), x.row(q));
    const double a = sum[label[p]] / static_cast<double>(size[label[p]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != label[p] && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
    const double m = std::max(a, b);
    s[p] = m > 0 ? (b - a) / m : 0.0;
  }
  return s;
}

inline std::vector<double> SoftmaxRow(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  long double tot = 0;
  for (std::size_t i = 0; i < z.size(); ++i) tot += (p[i] = std::exp(z[i] - mx));
  for (double& v : p) v = static_cast<double>(v / tot);
  return p;
}

// Closed-form Jacobian of unmasked g(Ψ) = softmax(ΨΛΨᵀ)Ψ, entry
// ((i,a),(k,b)) = ∂g_i[a]/∂ψ_k[b].
inline Matrix AttentionJacobianAnalytic(const Matrix& psi, const Matrix& lambda) {
  const std::size_t n = psi.rows(), d = psi.cols();
  Matrix lpsi(n, d), ltpsi(n, d);  // rows Λψ_l and Λᵀψ_l
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        lpsi(l, a) += lambda(a, b) * psi(l, b);
        ltpsi(l, a) += lambda(b, a) * psi(l, b);
      }
  Matrix p(n, n), out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0;
      for (std::size_t a = 0; a < d; ++a) v += psi(i, a) * lpsi(j, a);
      s[j] = v;
    }
    const auto row = SoftmaxRow(s);
    for (std::size_t j = 0; j < n; ++j) {
      p(i, j) = row[j];
      for (std::size_t a = 0; a < d; ++a) out(i, a) += row[j] * psi(j, a);
    }
  }
  Matrix jac(n * d, n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t b = 0; b < d; ++b) {
          double v = a == b ? p(i, k) : 0.0;
          if (i == k)
            for (std::size_t l = 0; l < n; ++l) v += p(i, l) * (psi(l, a) - out(i, a)) * lpsi(l, b);
          v += p(i, k) * (psi(k, a) - out(i, a)) * ltpsi(i, b);
          jac(i * d + a, k * d + b) = v;
        }
  return jac;
}

}  // namespace oracle

#endif  // ISOPROBE_TESTS_ORACLES_HPP_
