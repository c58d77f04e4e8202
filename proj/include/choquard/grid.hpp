#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "choquard/quadrature.hpp"
#include "choquard/stencil.hpp"

namespace choquard {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Stretch { uniform, geometric };

inline std::string to_string(Stretch s) { return s == Stretch::uniform ? "uniform" : "geometric"; }

struct GridSpec {
  int N = 3;
  double R_max = 40.0;
  int n = 1024;
  Stretch stretch = Stretch::uniform;
  double ratio = 1.0;  // h_{k+1}/h_k for geometric grids
};

// Surface area of the unit sphere in R^N.
template <class Scalar>
Scalar sphere_area(int N) {
  return 2 * std::pow(std::numbers::pi_v<Scalar>, Scalar(N) / 2) / std::tgamma(Scalar(N) / 2);
}

// Per-interval product-integration data. Interval k = [r_k, r_{k+1}] interpolates
// with the cubic through nodes start(k) .. start(k)+3.
template <class Scalar>
struct IntervalRules {
  Eigen::VectorXi start;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 4> volume;  // ∫ ℓ_j(s) s^{N-1} ds
  Eigen::Matrix<Scalar, Eigen::Dynamic, 4> linear;  // ∫ ℓ_j(s) s ds
};

template <class Scalar>
class RadialGrid {
 public:
  using Vec = Vector<Scalar>;
  using Sparse = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

  RadialGrid(int N, Vec nodes, GridSpec spec) : N_(N), nodes_(std::move(nodes)), spec_(spec) {
    const Eigen::Index n = nodes_.size();
    if (N_ < 1) throw std::invalid_argument("grid dimension must be positive");
    if (n < 16) throw std::invalid_argument("grid needs at least 16 nodes");
    if (nodes_(0) != Scalar(0)) throw std::invalid_argument("first grid node must be r = 0");
    for (Eigen::Index i = 1; i < n; ++i)
      if (!(nodes_(i) > nodes_(i - 1)) || !std::isfinite(static_cast<double>(nodes_(i))))
        throw std::invalid_argument("grid nodes must be finite and strictly increasing");
    spec_.N = N_;
    spec_.n = static_cast<int>(n);
    spec_.R_max = static_cast<double>(nodes_(n - 1));
    omega_ = sphere_area<Scalar>(N_);
    build_intervals();
    build_derivatives();
    hash_ = compute_hash();
  }

  int dim() const { return N_; }
  Eigen::Index size() const { return nodes_.size(); }
  const Vec& nodes() const { return nodes_; }
  Scalar r_max() const { return nodes_(nodes_.size() - 1); }
  const GridSpec& spec() const { return spec_; }
  // Σ_i weights_i f_i ≈ ∫_0^{R_max} f(r) r^{N-1} dr.
  const Vec& weights() const { return weights_; }
  Scalar omega() const { return omega_; }
  const IntervalRules<Scalar>& intervals() const { return intervals_; }
  // d/dr with u'(0) = 0; one-sided at R_max.
  const Sparse& gradient() const { return d1_; }
  // u'' + (N-1)u'/r, with Δu(0) = N u''(0).
  const Sparse& laplacian() const { return lap_; }
  std::uint64_t hash() const { return hash_; }

  bool same_nodes(const RadialGrid& other, Scalar rel = Scalar(1e-12)) const {
    if (other.size() != size() || other.dim() != dim()) return false;
    return ((nodes_ - other.nodes_).cwiseAbs().maxCoeff() <= rel * r_max());
  }

  // Grid with nodes multiplied by factor (exact scaling of every operator).
  std::shared_ptr<const RadialGrid> scaled(Scalar factor) const {
    if (!(factor > 0)) throw std::invalid_argument("grid scale factor must be positive");
    GridSpec s = spec_;
    s.R_max *= static_cast<double>(factor);
    return std::make_shared<const RadialGrid>(N_, Vec(nodes_ * factor), s);
  }

 private:
  void build_intervals() {
    const Eigen::Index n = size();
    const GaussLegendre<Scalar> gl(8);
    intervals_.start.resize(n - 1);
    intervals_.volume.resize(n - 1, 4);
    intervals_.linear.resize(n - 1, 4);
    weights_ = Vec::Zero(n);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      // Forward stencils on the first intervals keep the r^{N-1}-weighted node
      // weights nonnegative near the origin (checked for N <= 9).
      Eigen::Index s = std::min<Eigen::Index>(k <= 4 ? k : k - 1, n - 4);
      intervals_.start(k) = static_cast<int>(s);
      const Scalar a = nodes_(k), b = nodes_(k + 1);
      const Scalar c = (a + b) / 2, h = (b - a) / 2;
      for (int j = 0; j < 4; ++j) {
        Scalar vol = 0, lin = 0;
        for (Eigen::Index g = 0; g < gl.x.size(); ++g) {
          const Scalar r = c + h * gl.x(g);
          Scalar l = 1;
          for (int m = 0; m < 4; ++m)
            if (m != j) l *= (r - nodes_(s + m)) / (nodes_(s + j) - nodes_(s + m));
          vol += gl.w(g) * l * std::pow(r, Scalar(N_ - 1));
          lin += gl.w(g) * l * r;
        }
        intervals_.volume(k, j) = vol * h;
        intervals_.linear(k, j) = lin * h;
        weights_(s + j) += vol * h;
      }
    }
  }

  void build_derivatives() {
    const Eigen::Index n = size();
    std::vector<Eigen::Triplet<Scalar>> t1, t2;
    Vec xs(5);
    Eigen::Index idx[5];
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index lo = std::min<Eigen::Index>(i - 2, n - 5);
      for (int m = 0; m < 5; ++m) {
        Eigen::Index j = lo + m;
        // Even extension across r = 0.
        xs(m) = j < 0 ? -nodes_(-j) : nodes_(j);
        idx[m] = j < 0 ? -j : j;
      }
      auto c = fornberg_weights<Scalar, 2>(nodes_(i), xs);
      for (int m = 0; m < 5; ++m) {
        if (i == 0) {
          t2.emplace_back(i, idx[m], Scalar(N_) * c(2, m));
        } else {
          t1.emplace_back(i, idx[m], c(1, m));
          t2.emplace_back(i, idx[m], c(2, m) + Scalar(N_ - 1) / nodes_(i) * c(1, m));
        }
      }
    }
    d1_.resize(n, n);
    lap_.resize(n, n);
    d1_.setFromTriplets(t1.begin(), t1.end());
    lap_.setFromTriplets(t2.begin(), t2.end());
  }

  std::uint64_t compute_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
      const auto* b = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
      }
    };
    mix(&N_, sizeof(N_));
    for (Eigen::Index i = 0; i < size(); ++i) {
      double v = static_cast<double>(nodes_(i));
      mix(&v, sizeof(v));
    }
    return h;
  }

  int N_;
  Vec nodes_;
  GridSpec spec_;
  Scalar omega_{};
  Vec weights_;
  IntervalRules<Scalar> intervals_;
  Sparse d1_, lap_;
  std::uint64_t hash_ = 0;
};

template <class Scalar>
using GridPtr = std::shared_ptr<const RadialGrid<Scalar>>;

template <class Scalar = double>
GridPtr<Scalar> make_grid(const GridSpec& spec) {
  if (!std::isfinite(spec.R_max) || !(spec.R_max > 0))
    throw std::invalid_argument("R_max must be finite and positive");
  if (spec.n < 16) throw std::invalid_argument("grid needs n >= 16");
  const Eigen::Index n = spec.n;
  Vector<Scalar> r(n);
  const Scalar R = spec.R_max;
  if (spec.stretch == Stretch::uniform || spec.ratio == 1.0) {
    for (Eigen::Index i = 0; i < n; ++i) r(i) = R * Scalar(i) / Scalar(n - 1);
  } else {
    if (!(spec.ratio > 1.0) || !std::isfinite(spec.ratio))
      throw std::invalid_argument("geometric ratio must be finite and > 1");
    const Scalar rho = spec.ratio;
    const Scalar h0 = R * (rho - 1) / (std::pow(rho, Scalar(n - 1)) - 1);
    r(0) = 0;
    Scalar h = h0;
    for (Eigen::Index i = 1; i < n; ++i) {
      r(i) = r(i - 1) + h;
      h *= rho;
    }
    r(n - 1) = R;
  }
  return std::make_shared<const RadialGrid<Scalar>>(spec.N, std::move(r), spec);
}

// The uniform/geometric grid used by default for a given ε: R_max = 40 for ε >= 0.1,
// R_max ∝ ε^{-1/2} below.
inline GridSpec default_grid_spec(int N, double eps, int n = 2048) {
  GridSpec s;
  s.N = N;
  s.n = n;
  s.R_max = eps >= 0.1 || eps <= 0 ? 40.0 : 40.0 * std::sqrt(0.1 / eps);
  s.stretch = Stretch::uniform;
  return s;
}

}  // namespace choquard
