#pragma once

// Test-only oracles. Nothing here calls into the gradient code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mindisc/matrix.hpp"
#include "mindisc/rng.hpp"

namespace mindisc::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = sd * rng.normal();
  return m;
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.index(classes));
  return y;
}

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;

/// |a - b| / max(|a|, |b|, 1e-8)
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Central difference (f(x + h) - f(x - h)) / 2h at every entry of `x`.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                               double h = kFdStep) {
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + h;
    const double up = f(probe);
    probe.data()[k] = orig - h;
    const double down = f(probe);
    probe.data()[k] = orig;
    grad.data()[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

struct GradCheck {
  double worst = 0.0;
  std::size_t worst_index = 0;
  bool ok(double tol = kFdRelTol) const { return worst <= tol; }
};

inline GradCheck compare_gradients(const Matrix& analytic, const Matrix& numeric) {
  GradCheck out;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double e = relative_error(analytic.data()[k], numeric.data()[k]);
    if (e > out.worst) {
      out.worst = e;
      out.worst_index = k;
    }
  }
  return out;
}

}  // namespace mindisc::testing
