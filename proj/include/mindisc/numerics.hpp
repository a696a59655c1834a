#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "mindisc/error.hpp"
#include "mindisc/matrix.hpp"

namespace mindisc {

/// Sample covariance with the (n-1) denominator:
///   C = (XᵀX - (1/n)(1ᵀX)ᵀ(1ᵀX)) / (n-1).
/// Evaluated on the mean-centered matrix, which is algebraically identical
/// and does not lose precision to cancellation when the data sit far from
/// the origin.
inline Matrix covariance(const Matrix& x) {
  if (x.rows() < 2) {
    throw Error(ErrorKind::DegenerateBatch,
                "covariance needs at least 2 rows, got " + std::to_string(x.rows()));
  }
  const Matrix centered = center_columns(x);
  Matrix cov = matmul_tn(centered, centered);
  cov *= 1.0 / static_cast<double>(x.rows() - 1);
  // Symmetrize exactly; the two triangles are accumulated in the same order
  // already, this just pins the invariant.
  for (std::size_t i = 0; i < cov.rows(); ++i) {
    for (std::size_t j = i + 1; j < cov.cols(); ++j) cov(j, i) = cov(i, j);
  }
  return cov;
}

inline double frobenius_sq(const Matrix& m) noexcept {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return acc;
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

/// log(softmax(logits)) computed as (z - max) - log(sum exp(z - max)).
inline std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - peak);
  const double log_total = std::log(total);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - peak) - log_total;
  return out;
}

/// Eigen-decomposition of a symmetric matrix.
struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
};

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
inline SymmetricEigen jacobi_eigen(const Matrix& symmetric, int max_sweeps = 100) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "jacobi_eigen needs a square matrix, got " +
                                              shape_string(symmetric));
  }
  Matrix a = symmetric;
  Matrix v = Matrix::identity(n);

  auto off_diagonal = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * a(i, j);
    }
    return acc;
  };
  const double scale = std::max(frobenius_sq(a), std::numeric_limits<double>::min());

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diagonal() <= 1e-30 * scale) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return a(l, l) > a(r, r); });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// Projects mean-centered rows onto the two leading principal axes.
/// Each axis is oriented so that its largest-magnitude entry is positive.
inline Matrix pca2d(const Matrix& x) {
  if (x.rows() < 3 || x.cols() < 2) {
    throw Error(ErrorKind::DegenerateBatch,
                "pca2d needs at least 3 rows and 2 columns, got " + shape_string(x));
  }
  const Matrix centered = center_columns(x);
  const SymmetricEigen eig = jacobi_eigen(covariance(x));

  Matrix axes(x.cols(), 2);
  for (std::size_t k = 0; k < 2; ++k) {
    std::size_t biggest = 0;
    for (std::size_t i = 1; i < x.cols(); ++i) {
      if (std::abs(eig.vectors(i, k)) > std::abs(eig.vectors(biggest, k))) biggest = i;
    }
    const double sign = eig.vectors(biggest, k) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < x.cols(); ++i) axes(i, k) = sign * eig.vectors(i, k);
  }
  return matmul(centered, axes);
}

}  // namespace mindisc
