#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace choquard {

// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
template <class Scalar>
struct GaussLegendre {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w;

  explicit GaussLegendre(int n) : x(n), w(n) {
    if (n < 1) throw std::invalid_argument("Gauss-Legendre rule needs n >= 1");
    const Scalar pi = std::numbers::pi_v<Scalar>;
    // Returns (P_n(z), P_n'(z)) by the three-term recurrence.
    auto legendre = [n](Scalar z) {
      Scalar p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        Scalar pk = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      return std::pair<Scalar, Scalar>(p1, n * (z * p1 - p0) / (z * z - 1));
    };
    if (n == 1) {
      x(0) = 0;
      w(0) = 2;
      return;
    }
    for (int i = 0; i < (n + 1) / 2; ++i) {
      Scalar z = std::cos(pi * (i + Scalar(0.75)) / (n + Scalar(0.5)));
      for (int it = 0; it < 100; ++it) {
        auto [pn, dpn] = legendre(z);
        Scalar dz = pn / dpn;
        z -= dz;
        if (std::abs(dz) <= 4 * std::numeric_limits<Scalar>::epsilon()) break;
      }
      Scalar dpn = legendre(z).second;
      x(i) = -z;
      x(n - 1 - i) = z;
      w(i) = w(n - 1 - i) = 2 / ((1 - z * z) * dpn * dpn);
    }
    if (n % 2 == 1) x(n / 2) = 0;
  }

  // ∫_a^b f by the mapped rule.
  template <class F>
  Scalar integrate(F&& f, Scalar a, Scalar b) const {
    const Scalar c = (a + b) / 2, h = (b - a) / 2;
    Scalar s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += w(i) * f(c + h * x(i));
    return s * h;
  }
};

// Adaptive bisection with an 8-point rule; accepts a panel when the two halves
// agree with the whole to |Δ| <= tol·|estimate| (or an absolute floor).
template <class Scalar, class F>
Scalar adaptive_gauss_legendre(F&& f, Scalar a, Scalar b, Scalar rel_tol = Scalar(1e-13),
                               Scalar abs_tol = Scalar(1e-300), int max_depth = 40) {
  static const GaussLegendre<Scalar> rule(8);
  struct Rec {
    const GaussLegendre<Scalar>& rule;
    F& f;
    Scalar rel_tol, abs_tol;
    Scalar run(Scalar lo, Scalar hi, Scalar whole, int depth) {
      Scalar mid = (lo + hi) / 2;
      Scalar left = rule.integrate(f, lo, mid);
      Scalar right = rule.integrate(f, mid, hi);
      Scalar both = left + right;
      if (depth <= 0 || std::abs(both - whole) <= std::max(rel_tol * std::abs(both), abs_tol))
        return both;
      return run(lo, mid, left, depth - 1) + run(mid, hi, right, depth - 1);
    }
  };
  Rec rec{rule, f, rel_tol, abs_tol};
  return rec.run(a, b, rule.integrate(f, a, b), max_depth);
}

}  // namespace choquard
