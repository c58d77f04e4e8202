#include "choquard/riesz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "choquard/errors.hpp"
#include "choquard/quadrature.hpp"

namespace choquard {

double riesz_constant(int N, double alpha) {
  if (!(alpha > 0.0 && alpha < N)) throw std::invalid_argument("Riesz constant needs 0 < alpha < N");
  return std::tgamma((N - alpha) / 2.0) /
         (std::pow(std::numbers::pi, N / 2.0) * std::pow(2.0, alpha) * std::tgamma(alpha / 2.0));
}

std::string to_string(RieszMode mode) {
  return mode == RieszMode::exact_newton ? "exact-newton" : "kernel-matrix";
}

// ---------------------------------------------------------------------------
// Angular kernel g(t) = 2F1(λ/2, 1 − α/2; N/2; t²).

AngularKernel::AngularKernel(int N, double alpha) : N_(N), lambda_(N - alpha) {
  a_ = lambda_ / 2.0;
  b_ = 1.0 - alpha / 2.0;
  c_ = N / 2.0;
  if (std::abs(b_) < 1e-14) {
    trivial_ = true;
    return;
  }
  if (b_ < 0 && std::abs(b_ - std::round(b_)) < 1e-14) {
    polynomial_ = true;
    return;
  }
  y0_ = -std::log(1.0 - std::sqrt(0.5)) - 0.05;
  const double y1 = 40.0;
  dy_ = 0.01;
  const int m = static_cast<int>(std::ceil((y1 - y0_) / dy_)) + 1;
  log_g_.resize(m);
  for (int k = 0; k < m; ++k) {
    const double y = y0_ + k * dy_;
    log_g_[k] = std::log(quadrature_gap(std::exp(-y)));
  }
}

double AngularKernel::series(double x) const {
  double term = 1.0, sum = 1.0;
  for (int k = 0; k < 2000; ++k) {
    term *= (a_ + k) * (b_ + k) / ((c_ + k) * (k + 1.0)) * x;
    sum += term;
    if (term == 0.0 || std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

double AngularKernel::quadrature(double t) const {
  if (t <= 0.0) return 1.0;
  return quadrature_gap(1.0 - t);
}

double AngularKernel::quadrature_gap(double delta) const {
  if (!(delta > 0.0)) throw std::invalid_argument("angular kernel is singular at t = 1");
  const double t = 1.0 - delta;
  const double pi = std::numbers::pi;
  auto f = [&](double th) {
    const double s = std::sin(th / 2.0);
    const double d2 = delta * delta + 4.0 * t * s * s;
    return std::pow(d2, -lambda_ / 2.0) * std::pow(std::sin(th), N_ - 2);
  };
  double sum = 0.0, lo = 0.0;
  double hi = std::min(delta / 4.0, pi);
  if (hi <= 0.0) hi = 1e-300;
  while (lo < pi) {
    sum += adaptive_gauss_legendre<double>(f, lo, hi, 1e-13, 1e-300, 10);
    lo = hi;
    hi = std::min(2.0 * hi, pi);
  }
  return sum * sphere_area<double>(N_ - 1) / sphere_area<double>(N_);
}

double AngularKernel::operator()(double t) const {
  if (trivial_) return 1.0;
  const double x = t * t;
  if (polynomial_ || x <= 0.5) return series(x);
  double y = t >= 1.0 ? 1e300 : -std::log1p(-t);
  const int m = static_cast<int>(log_g_.size());
  double pos = (y - y0_) / dy_;
  if (pos > m - 1) pos = m - 1;
  int k = static_cast<int>(std::floor(pos));
  k = std::clamp(k - 1, 0, m - 4);
  const double u = pos - k;
  // 4-point Lagrange in the table index.
  const double l0 = -(u - 1) * (u - 2) * (u - 3) / 6.0;
  const double l1 = u * (u - 2) * (u - 3) / 2.0;
  const double l2 = -u * (u - 1) * (u - 3) / 2.0;
  const double l3 = u * (u - 1) * (u - 2) / 6.0;
  return std::exp(l0 * log_g_[k] + l1 * log_g_[k + 1] + l2 * log_g_[k + 2] + l3 * log_g_[k + 3]);
}

// ---------------------------------------------------------------------------

RieszOperator::RieszOperator(GridPtr<double> grid, double alpha, RieszMode mode,
                             const RieszOptions& options)
    : grid_(std::move(grid)), alpha_(alpha), mode_(mode) {
  if (!grid_) throw std::invalid_argument("Riesz operator without grid");
  A_ = riesz_constant(grid_->dim(), alpha_);
  if (mode_ == RieszMode::exact_newton) {
    if (alpha_ != 2.0) throw std::invalid_argument("exact-newton mode requires alpha = 2");
    return;
  }
  const double n = static_cast<double>(grid_->size());
  if (n * n * sizeof(double) > static_cast<double>(options.memory_cap_bytes)) {
    std::ostringstream msg;
    msg << "dense Riesz kernel needs " << n * n * 8.0 / (1 << 20) << " MiB, cap is "
        << options.memory_cap_bytes / (1 << 20) << " MiB";
    throw ResourceLimit(msg.str());
  }
  std::string path;
  if (!options.cache_dir.empty()) {
    path = cache_path(options.cache_dir, grid_->dim(), alpha_, grid_->hash());
    if (try_load(path)) return;
  }
  assemble_kernel(std::max(1, options.jobs));
  if (!path.empty()) save_kernel(path);
}

void RieszOperator::assemble_kernel(int jobs) {
  const Grid& g = *grid_;
  const Eigen::Index n = g.size();
  const int N = g.dim();
  const double lambda = N - alpha_;
  const auto& r = g.nodes();
  const auto& iv = g.intervals();
  const AngularKernel ang(N, alpha_);
  const double beta = std::max(2.0, 2.0 / alpha_);
  const GaussLegendre<double> gl8(8), gl16(16);

  // Row-independent data of the plain rules: points and w·s^{N-1}·ℓ_j(s).
  struct Rule {
    Eigen::MatrixXd s;                  // (n-1) x npts
    std::vector<Eigen::MatrixXd> base;  // per interval: npts x 4
  };
  auto lagrange = [&](Eigen::Index k, double s, double* out) {
    const Eigen::Index s0 = iv.start(k);
    for (int j = 0; j < 4; ++j) {
      double l = 1.0;
      for (int m = 0; m < 4; ++m)
        if (m != j) l *= (s - r(s0 + m)) / (r(s0 + j) - r(s0 + m));
      out[j] = l;
    }
  };
  auto make_rule = [&](const GaussLegendre<double>& gl) {
    Rule rule;
    const Eigen::Index m = gl.x.size();
    rule.s.resize(n - 1, m);
    rule.base.resize(n - 1);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      const double a = r(k), b = r(k + 1), c = (a + b) / 2, h = (b - a) / 2;
      rule.base[k].resize(m, 4);
      for (Eigen::Index q = 0; q < m; ++q) {
        const double s = c + h * gl.x(q);
        rule.s(k, q) = s;
        double l[4];
        lagrange(k, s, l);
        const double w = gl.w(q) * h * std::pow(s, N - 1);
        for (int j = 0; j < 4; ++j) rule.base[k](q, j) = w * l[j];
      }
    }
    return rule;
  };
  const Rule far = make_rule(gl8), near = make_rule(gl16);

  auto G = [&](double ri, double s) {
    const double M = std::max(ri, s), m = std::min(ri, s);
    return std::pow(M, -lambda) * ang(m / M);
  };

  kernel_ = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(n, n));
  Eigen::MatrixXd& K = *kernel_;
  const double scale = A_ * g.omega();

  auto do_rows = [&](Eigen::Index lo, Eigen::Index hi) {
    Eigen::VectorXd row(n);
    for (Eigen::Index i = lo; i < hi; ++i) {
      row.setZero();
      const double ri = r(i);
      for (Eigen::Index k = 0; k + 1 < n; ++k) {
        const Eigen::Index s0 = iv.start(k);
        if (k == i || k + 1 == i) {
          // Graded rule clustering at the endpoint that coincides with r_i.
          const double a = r(k), b = r(k + 1), d = b - a;
          const bool at_left = (k == i);
          for (Eigen::Index q = 0; q < gl16.x.size(); ++q) {
            const double u = 0.5 * (gl16.x(q) + 1.0);
            const double wu = 0.5 * gl16.w(q);
            const double off = d * std::pow(u, beta);
            const double s = at_left ? a + off : b - off;
            const double jac = d * beta * std::pow(u, beta - 1.0);
            if (s <= 0.0) continue;
            double l[4];
            lagrange(k, s, l);
            const double w = wu * jac * std::pow(s, N - 1) * G(ri, s);
            for (int j = 0; j < 4; ++j) row(s0 + j) += w * l[j];
          }
          continue;
        }
        const Rule& rule = (std::abs(static_cast<long>(k - i)) <= 3) ? near : far;
        const Eigen::Index m = rule.s.cols();
        double acc[4] = {0, 0, 0, 0};
        for (Eigen::Index q = 0; q < m; ++q) {
          const double gv = G(ri, rule.s(k, q));
          for (int j = 0; j < 4; ++j) acc[j] += gv * rule.base[k](q, j);
        }
        for (int j = 0; j < 4; ++j) row(s0 + j) += acc[j];
      }
      K.row(i) = scale * row.transpose();
    }
  };

  if (jobs <= 1) {
    do_rows(0, n);
  } else {
    std::vector<std::thread> pool;
    const Eigen::Index chunk = (n + jobs - 1) / jobs;
    for (int t = 0; t < jobs; ++t) {
      const Eigen::Index lo = t * chunk, hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(do_rows, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
}

std::string RieszOperator::cache_path(const std::string& dir, int N, double alpha, std::uint64_t grid_hash) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "riesz_N%d_a%a_%016llx.bin", N, alpha,
                static_cast<unsigned long long>(grid_hash));
  std::string d = dir;
  if (!d.empty() && d.back() != '/') d.push_back('/');
  return d + buf;
}

void RieszOperator::save_kernel(const std::string& path) const {
  if (!kernel_) throw std::logic_error("no kernel to save in exact-newton mode");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open kernel cache for writing: " + path);
  const std::int64_t n = grid_->size(), N = grid_->dim();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&alpha_), sizeof alpha_);
  out.write(reinterpret_cast<const char*>(&N), sizeof N);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *kernel_;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing kernel cache: " + path);
}

bool RieszOperator::try_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::int64_t n = 0, N = 0;
  double a = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&a), sizeof a);
  in.read(reinterpret_cast<char*>(&N), sizeof N);
  if (!in || n != grid_->size() || N != grid_->dim() || a != alpha_) return false;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!in) return false;
  kernel_ = std::make_shared<Eigen::MatrixXd>(rm);
  from_cache_ = true;
  return true;
}

Eigen::VectorXd RieszOperator::apply(const Eigen::VectorXd& f) const {
  const Eigen::Index n = grid_->size();
  if (f.size() != n) throw std::invalid_argument("density length does not match operator grid");
  if (kernel_) return (*kernel_) * f;
  // Two-sided Newton formula: φ(r) = [r^{2-N}∫_0^r f s^{N-1} + ∫_r^R f s] / (N-2).
  const int N = grid_->dim();
  const auto& iv = grid_->intervals();
  const auto& r = grid_->nodes();
  Eigen::VectorXd inner(n), outer(n);
  inner(0) = 0.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const Eigen::Index s0 = iv.start(k);
    inner(k + 1) = inner(k) + iv.volume.row(k).dot(f.segment<4>(s0));
  }
  outer(n - 1) = 0.0;
  for (Eigen::Index k = n - 2; k >= 0; --k) {
    const Eigen::Index s0 = iv.start(k);
    outer(k) = outer(k + 1) + iv.linear.row(k).dot(f.segment<4>(s0));
  }
  Eigen::VectorXd phi(n);
  phi(0) = outer(0) / (N - 2.0);
  for (Eigen::Index i = 1; i < n; ++i) phi(i) = (std::pow(r(i), 2.0 - N) * inner(i) + outer(i)) / (N - 2.0);
  return phi;
}

RieszOperator build_operator(GridPtr<double> grid, double alpha, RieszMode mode, const RieszOptions& options) {
  return RieszOperator(std::move(grid), alpha, mode, options);
}

RieszOperator build_default_operator(GridPtr<double> grid, double alpha, const RieszOptions& options) {
  return RieszOperator(std::move(grid), alpha, alpha == 2.0 ? RieszMode::exact_newton : RieszMode::kernel_matrix,
                       options);
}

namespace {
void check_grid(const RieszOperator& op, const Field& f) {
  if (f.grid_ptr() != op.grid_ptr() && !f.grid().same_nodes(op.grid()))
    throw std::invalid_argument("field grid does not match Riesz operator grid");
}
}  // namespace

Field apply(const RieszOperator& op, const Field& f) {
  check_grid(op, f);
  Eigen::VectorXd phi = op.apply(f.values());
  return Field(f.grid_ptr(), std::move(phi));
}

double dalpha(const RieszOperator& op, const Field& f) { return dalpha(op, f, f); }

double dalpha(const RieszOperator& op, const Field& f, const Field& g) {
  check_grid(op, f);
  check_grid(op, g);
  const Eigen::VectorXd phi = op.apply(f.values());
  return f.grid().omega() * f.grid().weights().dot(phi.cwiseProduct(g.values()));
}

}  // namespace choquard
