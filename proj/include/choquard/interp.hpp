#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <type_traits>

#include "choquard/field.hpp"

namespace choquard {

// Piecewise cubic Hermite interpolant on the field's nodes. Slopes start from
// the grid's 4th-order derivative and pass Hyman's filter, so monotone data
// stay monotone and nonnegative.
template <class Scalar>
class MonotoneCubic {
 public:
  explicit MonotoneCubic(const RadialField<Scalar>& u)
      : x_(u.grid().nodes()), y_(u.values()), d_(radial_derivative(u)) {
    const Eigen::Index n = x_.size();
    Vector<Scalar> s(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) s(i) = (y_(i + 1) - y_(i)) / (x_(i + 1) - x_(i));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar sl = i > 0 ? s(i - 1) : s(0);
      const Scalar sr = i + 1 < n ? s(i) : s(n - 2);
      if (i == 0) {
        if (d_(0) * sr < 0) d_(0) = 0;
        if (std::abs(d_(0)) > 3 * std::abs(sr)) d_(0) = 3 * sr;
        continue;
      }
      if (sl * sr <= 0) {
        d_(i) = 0;
        continue;
      }
      if (d_(i) * sl < 0) {
        d_(i) = 0;
        continue;
      }
      const Scalar cap = 3 * std::min(std::abs(sl), std::abs(sr));
      if (std::abs(d_(i)) > cap) d_(i) = std::copysign(cap, sl);
    }
  }

  Scalar x_max() const { return x_(x_.size() - 1); }

  // Valid for 0 <= r <= x_max().
  Scalar operator()(Scalar r) const {
    const Eigen::Index n = x_.size();
    if (r <= x_(0)) return y_(0);
    if (r >= x_(n - 1)) return y_(n - 1);
    const Scalar* it = std::upper_bound(x_.data(), x_.data() + n, r);
    const Eigen::Index k = (it - x_.data()) - 1;
    const Scalar h = x_(k + 1) - x_(k);
    const Scalar t = (r - x_(k)) / h;
    const Scalar t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_(k) + (t3 - 2 * t2 + t) * h * d_(k) +
           (-2 * t3 + 3 * t2) * y_(k + 1) + (t3 - t2) * h * d_(k + 1);
  }

 private:
  Vector<Scalar> x_, y_, d_;
};

template <class Scalar>
using Extrapolator = std::function<Scalar(Scalar)>;

// u sampled at the target grid's nodes. Radii beyond the source R_max use the
// extrapolator when given, otherwise 0; *outside counts those nodes.
template <class Scalar>
RadialField<Scalar> resample(const RadialField<Scalar>& u, const GridPtr<Scalar>& target,
                             const std::type_identity_t<Extrapolator<Scalar>>& tail = {}, int* outside = nullptr) {
  const MonotoneCubic<Scalar> f(u);
  Vector<Scalar> v(target->size());
  int count = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Scalar r = target->nodes()(i);
    if (r <= f.x_max()) {
      v(i) = f(r);
    } else {
      ++count;
      v(i) = tail ? tail(r) : Scalar(0);
    }
  }
  if (outside) *outside = count;
  if (u.nonnegative()) v = v.cwiseMax(Scalar(0));  // Hermite roundoff at the support edge
  return RadialField<Scalar>(target, std::move(v), u.nonnegative());
}

// u_t(x) = u(x/t) on the same grid. t = 1 returns the samples unchanged.
template <class Scalar>
RadialField<Scalar> dilate(const RadialField<Scalar>& u, Scalar t, const std::type_identity_t<Extrapolator<Scalar>>& tail = {},
                           int* outside = nullptr) {
  if (!(t > 0) || !std::isfinite(static_cast<double>(t)))
    throw std::invalid_argument("dilation factor must be positive");
  if (t == Scalar(1)) {
    if (outside) *outside = 0;
    return u;
  }
  const MonotoneCubic<Scalar> f(u);
  const auto& r = u.grid().nodes();
  Vector<Scalar> v(r.size());
  int count = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Scalar s = r(i) / t;
    if (s <= f.x_max()) {
      v(i) = f(s);
    } else {
      ++count;
      v(i) = tail ? tail(s) : Scalar(0);
    }
  }
  if (outside) *outside = count;
  if (u.nonnegative()) v = v.cwiseMax(Scalar(0));
  return u.with_values(std::move(v), u.nonnegative());
}

}  // namespace choquard
