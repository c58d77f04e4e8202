#include "choquard/thomas_fermi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "choquard/errors.hpp"
#include "choquard/interp.hpp"

namespace choquard {

namespace {

constexpr double pi = std::numbers::pi;

double dens(const RieszOperator& op, const Field& rho) { return dalpha(op, rho); }

// ρ(x) ← ρ(D^{1/(N+α)} x), repeated until D = 1 to rel_tol.
Field renormalize(const Field& rho, const RieszOperator& op, double alpha, double rel_tol = 1e-12) {
  const int N = rho.grid().dim();
  Field cur = rho;
  double t = 1.0;
  for (int k = 0; k < 8; ++k) {
    const double D = dens(op, cur);
    if (!(D > 0)) throw std::runtime_error("Thomas-Fermi iterate lost its Riesz energy");
    if (std::abs(D - 1.0) <= rel_tol) break;
    t *= std::pow(D, -1.0 / (N + alpha));  // dilate(u, t) evaluates u(x/t)
    cur = dilate(rho, t);
  }
  return cur;
}

}  // namespace

double support_radius(const Field& rho) {
  const double r0 = rho[0];
  const auto& r = rho.grid().nodes();
  Eigen::Index last = 0;
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    if (rho[i] > 1e-10 * r0) last = i;
  return r(last);
}

TFProfile solve_tf(double m, const RieszOperator& op, const TFOptions& opts) {
  const int N = op.dim();
  const double alpha = op.alpha();
  if (!(m > 2.0 * N / (N + alpha)))
    throw UnsupportedParameters("Thomas-Fermi minimization needs m > 2N/(N+alpha)");
  if (!(opts.damping > 0 && opts.damping <= 1)) throw std::invalid_argument("damping must lie in (0, 1]");
  const auto& g = op.grid_ptr();
  const double R = g->r_max();
  if (R <= 1.0) throw std::invalid_argument("Thomas-Fermi grid must extend beyond the unit ball");

  Field rho = Field::from_function(g, [](double r) { return r <= 1.0 ? 1.0 : 0.0; });
  rho = rho.with_values(rho.values() / std::sqrt(dens(op, rho)), true);
  auto objective = [&](const Field& f) { return lp_power(f, m) + integrate(f); };
  double lambda = m * lp_power(rho, m) + integrate(rho);

  TFProfile out;
  out.m = m;
  out.N = N;
  out.alpha = alpha;
  for (int it = 1; it <= opts.max_iters; ++it) {
    const Eigen::VectorXd phi = op.apply(rho.values());
    Eigen::VectorXd next(rho.size());
    for (Eigen::Index i = 0; i < next.size(); ++i)
      next(i) = std::pow(std::max(lambda * phi(i) - 1.0, 0.0) / m, 1.0 / (m - 1.0));
    Field cand = rearrange(rho.with_values((1 - opts.damping) * rho.values() + opts.damping * next));
    if (!(cand.values().maxCoeff() > 0)) throw NonConvergence("Thomas-Fermi iterate vanished", {}, {});
    cand = renormalize(cand, op, alpha);
    const double diff = lp_norm(cand.with_values(cand.values() - rho.values()), 1.0) +
                        lp_norm(cand.with_values(cand.values() - rho.values()), std::max(m, 1.0));
    rho = cand;
    lambda = m * lp_power(rho, m) + integrate(rho);
    out.iterations = it;
    if (support_radius(rho) > 0.95 * R)
      throw DomainTruncation("Thomas-Fermi support reaches the grid boundary; enlarge R_max");
    if (diff < opts.tol) {
      out.rho = rho;
      out.s_tf = objective(rho);
      out.lambda = lambda;
      out.support_radius = support_radius(rho);
      if (el_residual(out, op) < std::max(opts.tol, 1e-6 * out.lambda) || diff < 1e-3 * opts.tol) return out;
    }
  }
  const std::vector<double> last(rho.values().data(), rho.values().data() + rho.size());
  throw NonConvergence("Thomas-Fermi fixed point did not settle within max_iters", last, {});
}

Field tf_groundstate(const TFProfile& profile, double q, const GridPtr<double>& target) {
  if (std::abs(q - 2.0 * profile.m) > 1e-12 * q) throw std::invalid_argument("tf_groundstate needs q = 2m");
  const int N = profile.N;
  const double a = profile.alpha, m = profile.m;
  const double k = std::pow(m, 2.0 / (a * (q - 2.0))) * std::pow(2.0 * N * profile.s_tf / (N + a), -1.0 / a);
  const double amp = std::pow(m, 1.0 / (q - 2.0));
  // v_0(r_i / k) = amp·√ρ(r_i): same samples on the grid scaled by 1/k.
  const auto scaled = profile.rho.grid().scaled(1.0 / k);
  Field v(scaled, amp * profile.rho.values().cwiseMax(0.0).cwiseSqrt(), true);
  if (!target) return v;
  return resample(v, target);
}

double virial_residual(const TFProfile& p) {
  const double lhs = p.m * lp_power(p.rho, p.m) + integrate(p.rho);
  return std::abs(lhs - p.s_tf * 2.0 * p.N / (p.N + p.alpha)) / p.s_tf;
}

double el_residual(const TFProfile& p, const RieszOperator& op) {
  const double lam = p.s_tf * 2.0 * p.N / (p.N + p.alpha);
  const Eigen::VectorXd phi = op.apply(p.rho.values());
  double worst = 0;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const double lhs = p.m * std::pow(std::max(p.rho[i], 0.0), p.m - 1.0);
    worst = std::max(worst, std::abs(lhs - std::max(lam * phi(i) - 1.0, 0.0)));
  }
  return worst;
}

double tf_equation_residual(const Field& v, double q, const RieszOperator& op, double r_max) {
  const Eigen::VectorXd phi = op.apply(v.values().cwiseAbs2());
  const auto& r = v.grid().nodes();
  double worst = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (r(i) >= r_max) break;
    const double x = v[i];
    worst = std::max(worst, std::abs(x - phi(i) * x + std::pow(std::abs(x), q - 2.0) * x));
  }
  return worst;
}

ExplicitGPP explicit_gpp(const GridPtr<double>& grid) {
  if (grid->dim() != 3) throw std::invalid_argument("explicit GPP profile lives in N = 3");
  if (grid->r_max() <= pi) throw std::invalid_argument("explicit GPP grid must cover [0, pi] with margin");
  ExplicitGPP e;
  e.k = std::pow(1.5 * pi * pi, 0.2);
  e.R_rho = pi / e.k;
  e.R_v = pi;
  e.s_tf = 5.0 / 3.0 * e.k * e.k;
  e.lambda = 2.0 * e.k * e.k;
  const double k = e.k;
  e.rho = Field(grid,
                Field::from_function(grid, [k](double r) {
                  if (r >= pi / k) return 0.0;
                  return r == 0.0 ? 0.5 : std::sin(k * r) / (2.0 * k * r);
                }).values().cwiseMax(0.0),
                true);
  e.v0 = Field(grid,
               Field::from_function(grid, [](double r) {
                 if (r >= pi) return 0.0;
                 return r == 0.0 ? 1.0 : std::sqrt(std::max(std::sin(r) / r, 0.0));
               }).values(),
               true);
  return e;
}

}  // namespace choquard
