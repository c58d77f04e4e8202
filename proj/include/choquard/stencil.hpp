#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>

namespace choquard {

// Finite-difference weights at x0 for derivatives 0..M on arbitrary nodes
// (Fornberg's recursion). Returns c(k, j): weight of node j for order k.
template <class Scalar, int M = 2>
Eigen::Matrix<Scalar, M + 1, Eigen::Dynamic> fornberg_weights(
    Scalar x0, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& xs) {
  const Eigen::Index n = xs.size();
  Eigen::Matrix<Scalar, M + 1, Eigen::Dynamic> c =
      Eigen::Matrix<Scalar, M + 1, Eigen::Dynamic>::Zero(M + 1, n);
  Scalar c1 = 1, c4 = xs(0) - x0;
  c(0, 0) = 1;
  for (Eigen::Index i = 1; i < n; ++i) {
    const Eigen::Index mn = std::min<Eigen::Index>(i, M);
    Scalar c2 = 1;
    const Scalar c5 = c4;
    c4 = xs(i) - x0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const Scalar c3 = xs(i) - xs(j);
      c2 *= c3;
      if (j == i - 1) {
        for (Eigen::Index k = mn; k >= 1; --k)
          c(k, i) = c1 * (k * c(k - 1, i - 1) - c5 * c(k, i - 1)) / c2;
        c(0, i) = -c1 * c5 * c(0, i - 1) / c2;
      }
      for (Eigen::Index k = mn; k >= 1; --k) c(k, j) = (c4 * c(k, j) - k * c(k - 1, j)) / c3;
      c(0, j) = c4 * c(0, j) / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace choquard
