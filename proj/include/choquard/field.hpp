#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "choquard/grid.hpp"
#include "choquard/params.hpp"

namespace choquard {

// Samples u(r_i) of a radial function on a shared immutable grid.
template <class Scalar>
class RadialField {
 public:
  using Vec = Vector<Scalar>;

  RadialField() = default;
  RadialField(GridPtr<Scalar> grid, Vec values, bool nonnegative = false)
      : grid_(std::move(grid)), values_(std::move(values)), nonnegative_(nonnegative) {
    if (!grid_) throw std::invalid_argument("field without grid");
    if (values_.size() != grid_->size()) throw std::invalid_argument("field length does not match grid");
    if (!values_.allFinite()) throw std::invalid_argument("field values must be finite");
    if (nonnegative_ && (values_.array() < 0).any())
      throw std::invalid_argument("field tagged nonnegative has negative samples");
  }

  static RadialField zeros(GridPtr<Scalar> grid) {
    const auto n = grid->size();
    return RadialField(std::move(grid), Vec::Zero(n), true);
  }

  template <class F>
  static RadialField from_function(GridPtr<Scalar> grid, F&& f) {
    Vec v(grid->size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f(grid->nodes()(i));
    return RadialField(std::move(grid), std::move(v));
  }

  const RadialGrid<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const Vec& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  Scalar operator[](Eigen::Index i) const { return values_(i); }
  bool nonnegative() const { return nonnegative_; }

  // Same grid, new samples.
  RadialField with_values(Vec v, bool nonnegative = false) const {
    return RadialField(grid_, std::move(v), nonnegative);
  }

 private:
  GridPtr<Scalar> grid_;
  Vec values_;
  bool nonnegative_ = false;
};

using Grid = RadialGrid<double>;
using Field = RadialField<double>;

template <class Scalar>
void require_same_grid(const RadialField<Scalar>& a, const RadialField<Scalar>& b) {
  if (a.grid_ptr() != b.grid_ptr() && !a.grid().same_nodes(b.grid()))
    throw std::invalid_argument("fields live on different grids");
}

// ∫_{R^N} u dx of the radial extension.
template <class Scalar>
Scalar integrate(const RadialField<Scalar>& u) {
  return u.grid().omega() * u.grid().weights().dot(u.values());
}

template <class Scalar>
Scalar lp_norm(const RadialField<Scalar>& u, Scalar s) {
  if (!(s >= 1)) throw std::invalid_argument("L^s norm needs s >= 1");
  const auto& g = u.grid();
  Scalar a = g.omega() * g.weights().dot(u.values().cwiseAbs().array().pow(s).matrix());
  return std::pow(a, 1 / s);
}

// ∫|u|^s dx without the root.
template <class Scalar>
Scalar lp_power(const RadialField<Scalar>& u, Scalar s) {
  const auto& g = u.grid();
  return g.omega() * g.weights().dot(u.values().cwiseAbs().array().pow(s).matrix());
}

template <class Scalar>
Vector<Scalar> radial_derivative(const RadialField<Scalar>& u) {
  return u.grid().gradient() * u.values();
}

template <class Scalar>
Vector<Scalar> radial_laplacian(const RadialField<Scalar>& u) {
  return u.grid().laplacian() * u.values();
}

// ‖∇u‖² = ω ∫ (u')² r^{N-1} dr.
template <class Scalar>
Scalar dirichlet_energy(const RadialField<Scalar>& u) {
  const Vector<Scalar> d = radial_derivative(u);
  return u.grid().omega() * u.grid().weights().dot(d.cwiseAbs2());
}

// M(u) = ‖∇u‖² + ‖u‖² + ‖u‖_q^q.
template <class Scalar>
Scalar m_quantity(const RadialField<Scalar>& u, const ProblemParams& params) {
  return dirichlet_energy(u) + lp_power(u, Scalar(2)) + lp_power(u, Scalar(params.q));
}

// Discrete rearrangement: samples sorted nonincreasing, positive part taken.
template <class Scalar>
RadialField<Scalar> rearrange(const RadialField<Scalar>& u) {
  Vector<Scalar> v = u.values().cwiseMax(Scalar(0));
  std::sort(v.data(), v.data() + v.size(), std::greater<Scalar>());
  return u.with_values(std::move(v), true);
}

template <class Scalar>
bool is_nonincreasing(const RadialField<Scalar>& u) {
  for (Eigen::Index i = 1; i < u.size(); ++i)
    if (u[i] > u[i - 1]) return false;
  return true;
}

}  // namespace choquard
