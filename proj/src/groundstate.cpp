#include "choquard/groundstate.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "choquard/errors.hpp"
#include "choquard/interp.hpp"
#include "choquard/quadrature.hpp"

namespace choquard {

std::string to_string(SeedProfile s) {
  switch (s) {
    case SeedProfile::gaussian: return "gaussian";
    case SeedProfile::paper_profile: return "paper-profile";
    case SeedProfile::file: return "file";
  }
  return "gaussian";
}

SeedProfile parse_seed_profile(const std::string& s) {
  if (s == "gaussian") return SeedProfile::gaussian;
  if (s == "paper-profile") return SeedProfile::paper_profile;
  if (s == "file") return SeedProfile::file;
  throw std::invalid_argument("unknown seed profile '" + s + "'");
}

std::string to_string(TailRegime t) {
  switch (t) {
    case TailRegime::exponential: return "exponential";
    case TailRegime::implicit: return "implicit";
    case TailRegime::polynomial: return "polynomial";
  }
  return "exponential";
}

Residuals compute_residuals(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  const FunctionalParts f = functional_parts(u, params, op);
  const double M = m_quantity(f);
  Residuals r;
  r.pohozaev = M > 0 ? std::abs(pohozaev(f, params)) / M : 0.0;
  r.nehari = M > 0 ? std::abs(nehari(f, params)) / M : 0.0;
  r.strong = relative_strong_residual(u, params, op);
  return r;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

double signed_pow(double x, double e) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), e), x); }

struct Evaluation {
  Eigen::VectorXd F;    // strong residual, Dirichlet node zero
  Eigen::VectorXd phi;  // I_α*|u|^p
  double norm = 0;      // weighted L² of F
};

class Problem {
 public:
  Problem(const ProblemParams& params, const RieszOperator& op) : P_(params), op_(op), g_(op.grid()) {}

  Evaluation evaluate(const Eigen::VectorXd& u) const {
    Evaluation e;
    const Eigen::Index n = u.size();
    e.phi = op_.apply(u.cwiseAbs().array().pow(P_.p).matrix());
    const Eigen::VectorXd lap = g_.laplacian() * u;
    e.F.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      e.F(i) = -P_.kinetic_weight * lap(i) + P_.eps * u(i) - e.phi(i) * signed_pow(u(i), P_.p - 1) +
               P_.local_weight * signed_pow(u(i), P_.q - 1);
    e.F(n - 1) = robin() ? boundary_residual(u) : 0.0;
    e.norm = norm(e.F);
    return e;
  }

  // p < 2 tails are algebraic, u ~ r^{−β}; a Dirichlet node would meet the sublinear
  // term φu^{p−1} head on, so the last row imposes u' + βu/R = 0 instead.
  bool robin() const { return P_.p < 2.0 && P_.eps > 0; }
  double robin_beta() const { return (P_.N - P_.alpha) / (2.0 - P_.p); }
  double boundary_residual(const Eigen::VectorXd& u) const {
    const Eigen::Index n = u.size();
    return g_.gradient().row(n - 1).dot(u) + robin_beta() / g_.r_max() * u(n - 1);
  }
  void boundary_row(std::vector<Triplet>& t, Eigen::Index row, Eigen::Index stride) const {
    const Eigen::Index n = g_.size();
    if (!robin()) {
      t.emplace_back(row, stride * (n - 1), 1.0);
      return;
    }
    for (typename Grid::Sparse::InnerIterator it(g_.gradient(), n - 1); it; ++it)
      t.emplace_back(row, stride * it.col(), it.value());
    t.emplace_back(row, stride * (n - 1), robin_beta() / g_.r_max());
  }

  double norm(const Eigen::VectorXd& v) const { return std::sqrt(g_.omega() * g_.weights().dot(v.cwiseAbs2())); }

  // Solves J δ = −F at u.
  Eigen::VectorXd newton_direction(const Eigen::VectorXd& u, const Evaluation& e) const {
    const Eigen::Index n = u.size();
    Eigen::VectorXd diag(n), gv(n), sp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = std::abs(u(i));
      const double gp = a > 0 ? (P_.p - 1) * std::pow(a, P_.p - 2) : 0.0;
      const double hp = a > 0 ? (P_.q - 1) * std::pow(a, P_.q - 2) : 0.0;
      diag(i) = P_.eps + P_.local_weight * hp - e.phi(i) * gp;
      gv(i) = signed_pow(u(i), P_.p - 1);
      sp(i) = P_.p * signed_pow(u(i), P_.p - 1);
    }
    return op_.kernel() ? dense_direction(e, diag, gv, sp) : banded_direction(e, diag, gv, sp);
  }

  SpMat preconditioner(double shift) const {
    const Eigen::Index n = g_.size();
    std::vector<Triplet> t;
    const auto& L = g_.laplacian();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (typename Grid::Sparse::InnerIterator it(L, i); it; ++it)
        t.emplace_back(i, it.col(), -P_.kinetic_weight * it.value());
      t.emplace_back(i, i, shift);
    }
    t.emplace_back(n - 1, n - 1, 1.0);
    SpMat A(n, n);
    A.setFromTriplets(t.begin(), t.end());
    return A;
  }

 private:
  Eigen::VectorXd dense_direction(const Evaluation& e, const Eigen::VectorXd& diag, const Eigen::VectorXd& gv,
                                  const Eigen::VectorXd& sp) const {
    const Eigen::Index n = diag.size();
    const Eigen::MatrixXd& K = *op_.kernel();
    Eigen::MatrixXd J = -(gv.asDiagonal() * K * sp.asDiagonal());
    J += Eigen::MatrixXd(-P_.kinetic_weight * g_.laplacian());
    J.diagonal() += diag;
    J.row(n - 1).setZero();
    std::vector<Triplet> bt;
    boundary_row(bt, 0, 1);
    for (const auto& b : bt) J(n - 1, b.col()) += b.value();
    Eigen::VectorXd rhs = -e.F;
    return J.partialPivLu().solve(rhs);
  }

  // α = 2: the Newton potential's cumulative sums become extra unknowns, so the
  // Jacobian stays banded: c1 = inner sums, c2 = outer sums of the linearized density.
  Eigen::VectorXd banded_direction(const Evaluation& e, const Eigen::VectorXd& diag, const Eigen::VectorXd& gv,
                                   const Eigen::VectorXd& sp) const {
    const Eigen::Index n = diag.size();
    const int N = g_.dim();
    const auto& r = g_.nodes();
    const auto& iv = g_.intervals();
    const auto& L = g_.laplacian();
    auto D = [](Eigen::Index i) { return 3 * i; };
    auto C1 = [](Eigen::Index i) { return 3 * i + 1; };
    auto C2 = [](Eigen::Index i) { return 3 * i + 2; };
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n) * 24);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (typename Grid::Sparse::InnerIterator it(L, i); it; ++it)
        t.emplace_back(D(i), D(it.col()), -P_.kinetic_weight * it.value());
      t.emplace_back(D(i), D(i), diag(i));
      if (i > 0) t.emplace_back(D(i), C1(i), -gv(i) / (N - 2.0));
      t.emplace_back(D(i), C2(i), -gv(i) / (N - 2.0));
      rhs(D(i)) = -e.F(i);
    }
    boundary_row(t, D(n - 1), 3);
    rhs(D(n - 1)) = -e.F(n - 1);
    // Inner sums are carried as c1_i / r_i^{N−2}, which keeps the rows O(1) for large N.
    t.emplace_back(C1(0), C1(0), 1.0);
    for (Eigen::Index i = 1; i < n; ++i) {
      const Eigen::Index k = i - 1, s0 = iv.start(k);
      const double si = std::pow(r(i), N - 2.0);
      t.emplace_back(C1(i), C1(i), 1.0);
      if (i > 1) t.emplace_back(C1(i), C1(i - 1), -std::pow(r(i - 1), N - 2.0) / si);
      for (int j = 0; j < 4; ++j) t.emplace_back(C1(i), D(s0 + j), -iv.volume(k, j) * sp(s0 + j) / si);
    }
    t.emplace_back(C2(n - 1), C2(n - 1), 1.0);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const Eigen::Index s0 = iv.start(i);
      t.emplace_back(C2(i), C2(i), 1.0);
      t.emplace_back(C2(i), C2(i + 1), -1.0);
      for (int j = 0; j < 4; ++j) t.emplace_back(C2(i), D(s0 + j), -iv.linear(i, j) * sp(s0 + j));
    }
    SpMat A(3 * n, 3 * n);
    A.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("Newton Jacobian factorization failed");
    const Eigen::VectorXd x = lu.solve(rhs);
    Eigen::VectorXd delta(n);
    for (Eigen::Index i = 0; i < n; ++i) delta(i) = x(D(i));
    return delta;
  }

  const ProblemParams& P_;
  const RieszOperator& op_;
  const Grid& g_;
};

Field positive_part(const Field& u) { return u.with_values(u.values().cwiseMax(0.0), true); }

// Lowest ray maximum over Gaussian amplitudes; the dilation along each ray is free.
Field gaussian_seed(const ProblemParams& params, const RieszOperator& op, double width) {
  const auto& g = op.grid_ptr();
  const double R = g->r_max();
  std::optional<Field> best;
  double best_energy = std::numeric_limits<double>::infinity();
  for (int k = -12; k <= 12; ++k) {
    const double A = std::pow(10.0, 0.25 * k);
    Field u = Field::from_function(g, [&](double r) { return A * std::exp(-(r * r) / (width * width)); });
    u = positive_part(u);
    Projection proj;
    try {
      proj = pohozaev_project(u, params, op, 1e-10);
    } catch (const NoProjection&) {
      continue;
    }
    if (!(proj.t * width * 4.0 < 0.5 * R) || proj.t * width < 4.0 * g->nodes()(1)) continue;
    const double E = energy(functional_parts(proj.projected, params, op), params).total;
    if (E > 0 && E < best_energy) {
      best_energy = E;
      best = proj.projected;
    }
  }
  if (!best) throw NoProjection("no Gaussian seed projects onto the Pohozaev manifold inside the grid");
  return *best;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

GroundstateResult solve(const ProblemParams& params, const RieszOperator& op, const SolverOptions& opts) {
  require_solvable(params);
  if (!(params.kinetic_weight > 0)) throw std::invalid_argument("groundstate solver needs a positive kinetic weight");
  if (!(opts.tol > 0) || opts.max_iters < 1) throw std::invalid_argument("solver options need tol > 0 and max_iters >= 1");
  if (op.dim() != params.N || std::abs(op.alpha() - params.alpha) > 1e-14 * params.alpha)
    throw std::invalid_argument("Riesz operator does not match parameters");
  const auto& g = op.grid_ptr();
  const Problem prob(params, op);

  GroundstateResult res;
  res.params = params;
  std::vector<double> history;

  // Seed.
  Field u;
  if (opts.seed_profile == SeedProfile::gaussian) {
    const double width = std::sqrt(params.kinetic_weight / std::max(params.eps, opts.precond_shift));
    u = gaussian_seed(params, op, std::min(width, 0.1 * g->r_max()));
  } else {
    if (!opts.seed) throw std::invalid_argument("seed profile '" + to_string(opts.seed_profile) + "' needs a seed field");
    Field s = opts.seed->grid().same_nodes(*g) ? Field(g, opts.seed->values()) : resample(*opts.seed, g);
    s = rearrange(s);
    u = pohozaev_project(s, params, op, 1e-10).projected;
  }
  FunctionalParts parts = functional_parts(u, params, op);
  double E = energy(parts, params).total;
  Evaluation ev = prob.evaluate(u.values());
  double rel = relative_strong_residual(u, params, op);
  res.trace.push_back({0, "seed", E, rel, 0.0});
  history.push_back(rel);

  // Descent on the Pohožaev manifold with rearrangement.
  const SpMat Pc = prob.preconditioner(std::max(params.eps, opts.precond_shift));
  Eigen::SparseLU<SpMat> plu;
  plu.compute(Pc);
  if (plu.info() != Eigen::Success) throw std::runtime_error("preconditioner factorization failed");
  double tau = opts.step;
  int it = 0;
  const int descent_budget = opts.newton ? std::min(opts.max_descent_iters, opts.max_iters) : opts.max_iters;
  const double descent_target = opts.newton ? opts.newton_switch : opts.tol;
  while (it < descent_budget && rel > descent_target) {
    const Eigen::VectorXd z = plu.solve(ev.F);
    const double slope = g->omega() * g->weights().dot(ev.F.cwiseProduct(z));
    bool accepted = false;
    for (int ls = 0; ls < 30 && !accepted; ++ls, tau *= 0.5) {
      Field cand = rearrange(u.with_values(u.values() - tau * z));
      if (cand.values().maxCoeff() <= 0) continue;
      Projection proj;
      try {
        proj = pohozaev_project(cand, params, op, 1e-10);
      } catch (const NoProjection&) {
        continue;
      }
      const FunctionalParts pp = functional_parts(proj.projected, params, op);
      const double En = energy(pp, params).total;
      if (En <= E - 1e-4 * tau * slope) {
        if (En > E) res.energy_monotone = false;
        u = proj.projected;
        parts = pp;
        E = En;
        accepted = true;
      }
    }
    if (!accepted) break;
    tau = std::min(4.0 * tau, 1.0);
    ++it;
    ev = prob.evaluate(u.values());
    rel = relative_strong_residual(u, params, op);
    res.trace.push_back({it, "descent", E, rel, tau});
    history.push_back(rel);
  }

  // Newton polish on the strong form.
  Eigen::VectorXd v = u.values();
  if (opts.newton && params.p < 2.0 && params.eps > 0) {
    // Below the algebraic tail (φ/ε)^{1/(2−p)} the scalar tail equation has negative slope and
    // Newton heads for u < 0; start from the lifted tail instead.
    const double u0 = v.maxCoeff();
    Eigen::Index i = 0;
    while (i < v.size() && v(i) > 1e-2 * u0) ++i;
    for (; i + 1 < v.size(); ++i) v(i) = std::max(v(i), std::pow(ev.phi(i) / params.eps, 1.0 / (2.0 - params.p)));
    for (i = 1; i < v.size(); ++i) v(i) = std::min(v(i), v(i - 1));
    ev = prob.evaluate(v);
    rel = relative_strong_residual(Field(g, v), params, op);
  } else if (opts.newton && params.p == 2.0 && params.local_weight > 0 && params.q > 2.0) {
    // Where φ > ε the tail sits on the plateau u^{q−2} = (φ − ε)/w; below it the linear
    // term has the wrong sign and Newton stalls.
    const double u0 = v.maxCoeff();
    Eigen::Index i = 0;
    while (i < v.size() && v(i) > 1e-2 * u0) ++i;
    bool lifted = false;
    for (; i + 1 < v.size(); ++i) {
      const double gap = ev.phi(i) - params.eps;
      if (gap <= 0) break;
      const double plateau = std::pow(gap / params.local_weight, 1.0 / (params.q - 2.0));
      if (plateau > v(i)) {
        v(i) = plateau;
        lifted = true;
      }
    }
    if (lifted) {
      for (i = 1; i < v.size(); ++i) v(i) = std::min(v(i), v(i - 1));
      ev = prob.evaluate(v);
      rel = relative_strong_residual(Field(g, v), params, op);
    }
  }
  if (opts.newton) {
    // Sublinear p < 2 terms need strictly nonnegative iterates; otherwise roundoff-level
    // negatives near the Dirichlet node are harmless.
    const double floor = params.p < 2.0 ? 0.0 : -1e-10 * v.maxCoeff();
    int stall = 0;
    while (it < opts.max_iters && rel > 1e-2 * opts.tol) {
      const Eigen::VectorXd delta = prob.newton_direction(v, ev);
      double lam = 1.0;
      bool accepted = false;
      Evaluation en;
      Eigen::VectorXd vn;
      for (int ls = 0; ls < 40; ++ls, lam *= 0.5) {
        vn = v + lam * delta;
        if (!vn.allFinite() || vn.minCoeff() < floor) continue;
        en = prob.evaluate(vn);
        if (en.norm < (1 - 1e-4 * lam) * ev.norm) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const double shrink = en.norm / ev.norm;
      v = vn;
      ev = en;
      ++it;
      Field cur(g, v);
      rel = relative_strong_residual(cur, params, op);
      res.trace.push_back({it, "newton", energy(cur, params, op).total, rel, lam});
      history.push_back(rel);
      stall = shrink > 0.5 ? stall + 1 : 0;
      if (stall >= 3 && rel <= opts.tol) break;
    }
  }

  const double vmax = v.maxCoeff();
  if (!(vmax > 0)) throw NonConvergence("iterate collapsed to the trivial solution", to_std(v), history);
  if (v.minCoeff() < -1e-9 * vmax)
    throw NonConvergence("iterate lost positivity", to_std(v), history);
  Field out(g, v.cwiseMax(0.0), true);
  if (!is_nonincreasing(out)) out = rearrange(out);
  res.field = out;
  res.parts = functional_parts(out, params, op);
  res.energy = energy(res.parts, params);
  res.c_level = res.energy.total;
  res.residuals = compute_residuals(out, params, op);
  res.iterations = it;
  if (!(res.residuals.strong <= opts.tol)) {
    throw NonConvergence("relative strong residual " + std::to_string(res.residuals.strong) + " above tol after " +
                             std::to_string(it) + " iterations",
                         to_std(out.values()), history);
  }
  if (!(res.c_level > 0)) throw NonConvergence("level is not positive", to_std(out.values()), history);
  try {
    res.tail = fit_tail(out, params);
  } catch (const InsufficientTail&) {
  }
  return res;
}

GroundstateResult solve_choquard(ProblemParams params, const RieszOperator& op, const SolverOptions& opts) {
  params.local_weight = 0.0;
  params.kinetic_weight = 1.0;
  params.eps = 1.0;
  params.q_exact.reset();
  if (!choquard_admissible(params))
    throw UnsupportedParameters("Choquard equation has no finite energy solutions outside (N+alpha)/N < p < (N+alpha)/(N-2)");
  return solve(params, op, opts);
}

// ---------------------------------------------------------------------------

namespace {

struct LineFit {
  double slope = 0, intercept = 0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  LineFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

// First node where u drops below level·u(0).
double radius_below(const Field& u, double level) {
  const auto& r = u.grid().nodes();
  const double u0 = u.values().maxCoeff();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u[i] < level * u0) return r(i);
  return r(r.size() - 1);
}

}  // namespace

TailFit fit_tail(const Field& u, const ProblemParams& params, std::optional<double> lo_opt,
                 std::optional<double> hi_opt) {
  const Grid& g = u.grid();
  const auto& r = g.nodes();
  const int N = params.N;
  const double R = g.r_max();
  const double k = params.kinetic_weight > 0 ? params.kinetic_weight : 1.0;
  const double A = riesz_constant(N, params.alpha);
  const double layer = params.eps > 0 ? 10.0 * std::sqrt(k / params.eps) : 0.2 * R;
  TailFit fit;
  double lo, hi;
  if (params.p < 2.0) {
    fit.regime = TailRegime::polynomial;
    hi = hi_opt.value_or(std::min(R - layer, 0.8 * R));
    lo = lo_opt.value_or(hi / 10.0);
    if (!lo_opt && lo < radius_below(u, 1e-2))
      throw InsufficientTail("polynomial tail window does not reach a decade beyond the core");
  } else {
    fit.regime = params.p > 2.0 ? TailRegime::exponential : TailRegime::implicit;
    lo = lo_opt.value_or(radius_below(u, 1e-3));
    hi = hi_opt.value_or(std::min({R - layer, radius_below(u, 1e-11), 0.9 * R}));
  }
  fit.window_lo = lo;
  fit.window_hi = hi;
  std::vector<double> x, y, plateau;
  const double uN = params.p < 2.0 ? 0.0 : (N - 1) / 2.0;
  std::vector<double> rs;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (r(i) < lo || r(i) > hi || !(u[i] > 0)) continue;
    rs.push_back(r(i));
    y.push_back(std::log(u[i]) + uN * std::log(r(i)));
  }
  if (rs.size() < 8 || !(hi > lo)) throw InsufficientTail("tail window holds fewer than 8 positive samples");

  if (fit.regime == TailRegime::polynomial) {
    for (double s : rs) x.push_back(std::log(s));
    const LineFit lf = least_squares(x, y);
    fit.exponent = -lf.slope;
    fit.predicted_exponent = (N - params.alpha) / (2.0 - params.p);
    const double up = lp_power(u, params.p);
    fit.predicted_amplitude = std::pow(A * up / params.eps, 1.0 / (2.0 - params.p));
    for (std::size_t i = 0; i < rs.size(); ++i) plateau.push_back(std::exp(y[i]) * std::pow(rs[i], fit.predicted_exponent));
    std::sort(plateau.begin(), plateau.end());
    fit.amplitude = plateau[plateau.size() / 2];
  } else if (fit.regime == TailRegime::exponential) {
    x = rs;
    const LineFit lf = least_squares(x, y);
    fit.exponent = -lf.slope;
    fit.predicted_exponent = std::sqrt(params.eps / k);
    fit.amplitude = std::exp(lf.intercept);
  } else {
    // Φ(r) = ∫_{ν}^{r} √((ε − B s^{α−N})/k) ds with B = A‖u‖², ν the zero of the integrand.
    const double B = A * lp_power(u, 2.0);
    const double nu = std::pow(B / params.eps, 1.0 / (N - params.alpha));
    auto rate = [&](double s) { return std::sqrt(std::max(0.0, params.eps - B * std::pow(s, params.alpha - N)) / k); };
    double acc = 0, prev = nu;
    for (double s : rs) {
      const double from = std::max(prev, nu);
      if (s > from) acc += adaptive_gauss_legendre<double>(rate, from, s, 1e-12, 1e-300, 20);
      prev = std::max(prev, s);
      x.push_back(acc);
    }
    const LineFit lf = least_squares(x, y);
    fit.exponent = -lf.slope;
    fit.predicted_exponent = 1.0;
    fit.amplitude = std::exp(lf.intercept);
  }
  if (!std::isfinite(fit.exponent)) throw InsufficientTail("tail fit is not finite");
  return fit;
}

TailFit fit_tail(const GroundstateResult& result) { return fit_tail(result.field, result.params); }

}  // namespace choquard
