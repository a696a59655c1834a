#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mindisc/error.hpp"
#include "mindisc/matrix.hpp"
#include "mindisc/numerics.hpp"

namespace mindisc {

/// Convex combination of Gaussian RBF kernels:
///   k(a, b) = sum_l weights[l] * exp(-|a - b|^2 / (2 bandwidths[l]^2)).
class KernelBank {
 public:
  KernelBank(std::vector<double> bandwidths, std::vector<double> weights, bool degenerate = false)
      : bandwidths_(std::move(bandwidths)), weights_(std::move(weights)), degenerate_(degenerate) {
    if (bandwidths_.empty() || bandwidths_.size() != weights_.size()) {
      throw Error(ErrorKind::InvalidParam, "kernel bank needs matching, non-empty bandwidth and "
                                           "weight lists");
    }
    double total = 0.0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (!(bandwidths_[l] > 0.0) || !std::isfinite(bandwidths_[l])) {
        throw Error(ErrorKind::InvalidParam, "kernel bandwidths must be positive and finite");
      }
      if (!(weights_[l] >= 0.0)) {
        throw Error(ErrorKind::InvalidParam, "kernel weights must be nonnegative");
      }
      total += weights_[l];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorKind::InvalidParam, "kernel weights must sum to 1");
    }
  }

  static KernelBank single(double bandwidth) { return KernelBank({bandwidth}, {1.0}); }

  std::size_t size() const noexcept { return bandwidths_.size(); }
  const std::vector<double>& bandwidths() const noexcept { return bandwidths_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Set when the median heuristic saw a zero median distance and fell back
  /// to a unit bandwidth.
  bool degenerate() const noexcept { return degenerate_; }

  double operator()(std::span<const double> a, std::span<const double> b) const {
    return evaluate(squared_distance(a, b));
  }

  double evaluate(double squared_dist) const {
    double k = 0.0;
    for (std::size_t l = 0; l < size(); ++l) {
      k += weights_[l] * std::exp(-squared_dist / (2.0 * bandwidths_[l] * bandwidths_[l]));
    }
    return k;
  }

  /// Derivative of the kernel with respect to the squared distance.
  double derivative(double squared_dist) const {
    double d = 0.0;
    for (std::size_t l = 0; l < size(); ++l) {
      const double two_var = 2.0 * bandwidths_[l] * bandwidths_[l];
      d -= weights_[l] * std::exp(-squared_dist / two_var) / two_var;
    }
    return d;
  }

  /// Kernel value and its derivative with respect to the squared distance.
  std::pair<double, double> evaluate_with_derivative(double squared_dist) const {
    double k = 0.0;
    double d = 0.0;
    for (std::size_t l = 0; l < size(); ++l) {
      const double two_var = 2.0 * bandwidths_[l] * bandwidths_[l];
      const double term = weights_[l] * std::exp(-squared_dist / two_var);
      k += term;
      d -= term / two_var;
    }
    return {k, d};
  }

  static double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = a[i] - b[i];
      acc += diff * diff;
    }
    return acc;
  }

 private:
  std::vector<double> bandwidths_;
  std::vector<double> weights_;
  bool degenerate_ = false;
};

/// A scalar loss and its gradients with respect to each activation input.
/// Single-input losses leave `grad_target` empty.
struct LossValueGrad {
  double value = 0.0;
  Matrix grad_source;
  Matrix grad_target;
};

namespace detail {

inline void require_same_cols(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": source " + shape_string(a) +
                                              " vs target " + shape_string(b));
  }
}

// Floor applied to probabilities before taking logs.
inline constexpr double kMinProbability = 1e-12;

inline double clamped_log_prob(double log_p) {
  static const double floor = std::log(kMinProbability);
  return std::max(log_p, floor);
}

}  // namespace detail

/// CORAL distance (1 / 4d^2) * |C_s - C_t|_F^2 between the sample
/// covariances of two activation batches.
///
/// With G = C_s - C_t and centered batches S, T the gradients are
///   dL/dDs =  S G / (d^2 (n_s - 1)),   dL/dDt = -T G / (d^2 (n_t - 1)).
inline LossValueGrad coral_loss(const Matrix& source, const Matrix& target) {
  detail::require_same_cols(source, target, "coral_loss");
  if (source.rows() < 2 || target.rows() < 2) {
    throw Error(ErrorKind::DegenerateBatch, "coral_loss needs at least 2 rows per batch");
  }
  const double d = static_cast<double>(source.cols());
  const Matrix diff = covariance(source) - covariance(target);

  LossValueGrad out;
  out.value = frobenius_sq(diff) / (4.0 * d * d);
  out.grad_source = matmul(center_columns(source), diff);
  out.grad_source *= 1.0 / (d * d * static_cast<double>(source.rows() - 1));
  out.grad_target = matmul(center_columns(target), diff);
  out.grad_target *= -1.0 / (d * d * static_cast<double>(target.rows() - 1));
  return out;
}

/// Biased (V-statistic) squared MMD under a kernel bank:
///   mean k(s, s') + mean k(t, t') - 2 mean k(s, t).
inline LossValueGrad mmd2_loss(const Matrix& source, const Matrix& target,
                               const KernelBank& bank) {
  detail::require_same_cols(source, target, "mmd2_loss");
  if (source.rows() == 0 || target.rows() == 0) {
    throw Error(ErrorKind::EmptyBatch, "mmd2_loss needs non-empty batches");
  }
  const std::size_t ns = source.rows();
  const std::size_t nt = target.rows();
  const std::size_t dim = source.cols();
  const Matrix pooled = vstack(source, target);
  const std::size_t n = ns + nt;

  // Signed mean-embedding weights: +1/ns on source rows, -1/nt on target rows.
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = i < ns ? 1.0 / static_cast<double>(ns) : -1.0 / static_cast<double>(nt);
  }

  double value = 0.0;
  Matrix grad(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = pooled.row(i);
    // Diagonal term: k(z, z) = 1 with zero gradient.
    value += w[i] * w[i] * bank.evaluate(0.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto zj = pooled.row(j);
      const double sq = KernelBank::squared_distance(zi, zj);
      const double wij = w[i] * w[j];
      const auto [k, dk] = bank.evaluate_with_derivative(sq);
      value += 2.0 * wij * k;
      // d/dz_i of 2 wij k(|zi - zj|^2) = 4 wij k'(sq) (zi - zj); opposite for z_j.
      const double coeff = 4.0 * wij * dk;
      auto gi = grad.row(i);
      auto gj = grad.row(j);
      for (std::size_t c = 0; c < dim; ++c) {
        const double g = coeff * (zi[c] - zj[c]);
        gi[c] += g;
        gj[c] -= g;
      }
    }
  }

  LossValueGrad out;
  out.value = value;
  out.grad_source = Matrix(ns, dim);
  out.grad_target = Matrix(nt, dim);
  std::copy(grad.data().begin(), grad.data().begin() + static_cast<std::ptrdiff_t>(ns * dim),
            out.grad_source.data().begin());
  std::copy(grad.data().begin() + static_cast<std::ptrdiff_t>(ns * dim), grad.data().end(),
            out.grad_target.data().begin());
  return out;
}

/// Kernel bank from the median heuristic over the pooled batch:
/// sigma_mid = sqrt(median pairwise squared distance / 2), then a factor-2
/// geometric ladder of `count` bandwidths centred on sigma_mid with uniform
/// weights. A zero median falls back to sigma_mid = 1 and marks the bank
/// degenerate.
inline KernelBank median_bandwidths(const Matrix& source, const Matrix& target,
                                    std::size_t count) {
  detail::require_same_cols(source, target, "median_bandwidths");
  if (count == 0) throw Error(ErrorKind::InvalidParam, "kernel count must be >= 1");
  const Matrix pooled = vstack(source, target);
  const std::size_t n = pooled.rows();
  if (n < 2) {
    throw Error(ErrorKind::DegenerateBatch, "median_bandwidths needs at least 2 pooled rows");
  }

  std::vector<double> distances;
  distances.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      distances.push_back(KernelBank::squared_distance(pooled.row(i), pooled.row(j)));
    }
  }
  const std::size_t mid = distances.size() / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid),
                   distances.end());
  double median = distances[mid];
  if (distances.size() % 2 == 0) {
    const double lower =
        *std::max_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }

  const bool degenerate = !(median > 0.0);
  const double sigma_mid = degenerate ? 1.0 : std::sqrt(median / 2.0);

  std::vector<double> bandwidths(count);
  const double centre = 0.5 * static_cast<double>(count - 1);
  for (std::size_t l = 0; l < count; ++l) {
    bandwidths[l] = sigma_mid * std::exp2(static_cast<double>(l) - centre);
  }
  std::vector<double> weights(count, 1.0 / static_cast<double>(count));
  return KernelBank(std::move(bandwidths), std::move(weights), degenerate);
}

/// Mean Shannon entropy (nats) of the row-wise softmax of target logits.
/// Per row, dH/dz_k = -p_k (log p_k + H).
inline LossValueGrad entropy_loss(const Matrix& logits) {
  if (logits.rows() == 0) throw Error(ErrorKind::EmptyBatch, "entropy_loss needs rows");
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  LossValueGrad out;
  out.grad_source = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto log_p = log_softmax(logits.row(i));
    double h = 0.0;
    for (double lp : log_p) h -= std::exp(lp) * detail::clamped_log_prob(lp);
    out.value += h * inv_n;
    auto g = out.grad_source.row(i);
    for (std::size_t c = 0; c < log_p.size(); ++c) {
      g[c] = -std::exp(log_p[c]) * (detail::clamped_log_prob(log_p[c]) + h) * inv_n;
    }
  }
  return out;
}

/// Mean negative log-likelihood of the labels under the row-wise softmax.
inline LossValueGrad cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() == 0) throw Error(ErrorKind::EmptyBatch, "cross_entropy_loss needs rows");
  if (labels.size() != logits.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "cross_entropy_loss: " + std::to_string(labels.size()) +
                                              " labels for " + std::to_string(logits.rows()) +
                                              " rows");
  }
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  LossValueGrad out;
  out.grad_source = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= logits.cols()) {
      throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(label) + " at row " +
                                                  std::to_string(i) + " outside [0, " +
                                                  std::to_string(logits.cols()) + ")");
    }
    const auto log_p = log_softmax(logits.row(i));
    out.value -= detail::clamped_log_prob(log_p[static_cast<std::size_t>(label)]) * inv_n;
    auto g = out.grad_source.row(i);
    for (std::size_t c = 0; c < log_p.size(); ++c) {
      const double onehot = c == static_cast<std::size_t>(label) ? 1.0 : 0.0;
      g[c] = (std::exp(log_p[c]) - onehot) * inv_n;
    }
  }
  return out;
}

}  // namespace mindisc
