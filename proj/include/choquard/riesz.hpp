#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "choquard/field.hpp"

namespace choquard {

// A_α = Γ((N−α)/2) / (π^{N/2} 2^α Γ(α/2)).
double riesz_constant(int N, double alpha);

enum class RieszMode { exact_newton, kernel_matrix };

std::string to_string(RieszMode mode);

struct RieszOptions {
  std::size_t memory_cap_bytes = std::size_t(2) << 30;
  int jobs = 1;
  std::string cache_dir;  // empty: no kernel cache
};

// Angular average over S^{N-1} of |e − tω|^{-(N−α)}, t ∈ [0, 1].
class AngularKernel {
 public:
  AngularKernel(int N, double alpha);
  double operator()(double t) const;
  // Direct quadrature of the polar-angle integral (used to build the table).
  double quadrature(double t) const;

 private:
  double series(double x) const;
  // Same integral parametrized by δ = 1 − t, exact for δ below double spacing at 1.
  double quadrature_gap(double delta) const;

  int N_;
  double lambda_, a_, b_, c_;
  bool trivial_ = false;     // α = 2: Newton's theorem, g ≡ 1
  bool polynomial_ = false;  // b a nonpositive integer: terminating series
  double y0_ = 0, dy_ = 0;   // table in y = −log(1−t)
  std::vector<double> log_g_;
};

class RieszOperator {
 public:
  RieszOperator(GridPtr<double> grid, double alpha, RieszMode mode, const RieszOptions& options = {});

  const Grid& grid() const { return *grid_; }
  const GridPtr<double>& grid_ptr() const { return grid_; }
  double alpha() const { return alpha_; }
  int dim() const { return grid_->dim(); }
  RieszMode mode() const { return mode_; }
  double constant() const { return A_; }
  // Dense kernel, (I_α*f)(r_i) ≈ Σ_j K_ij f_j; null in exact-newton mode.
  const Eigen::MatrixXd* kernel() const { return kernel_.get(); }
  bool loaded_from_cache() const { return from_cache_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;

  // Cache file name for (N, α, grid hash) inside dir.
  static std::string cache_path(const std::string& dir, int N, double alpha, std::uint64_t grid_hash);
  void save_kernel(const std::string& path) const;

 private:
  void assemble_kernel(int jobs);
  bool try_load(const std::string& path);

  GridPtr<double> grid_;
  double alpha_;
  RieszMode mode_;
  double A_;
  std::shared_ptr<Eigen::MatrixXd> kernel_;
  bool from_cache_ = false;
};

RieszOperator build_operator(GridPtr<double> grid, double alpha, RieszMode mode,
                             const RieszOptions& options = {});

// exact-newton for α = 2, kernel-matrix otherwise.
RieszOperator build_default_operator(GridPtr<double> grid, double alpha, const RieszOptions& options = {});

Field apply(const RieszOperator& op, const Field& f);

// D_α(f) = ∫(I_α*f) f dx.
double dalpha(const RieszOperator& op, const Field& f);

// ∫(I_α*f) g dx.
double dalpha(const RieszOperator& op, const Field& f, const Field& g);

}  // namespace choquard
