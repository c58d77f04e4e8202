#include "choquard/functionals.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>

#include "choquard/errors.hpp"
#include "choquard/interp.hpp"

namespace choquard {

void check_compatible(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  if (u.grid().dim() != params.N || op.dim() != params.N)
    throw std::invalid_argument("dimension mismatch between field, operator and parameters");
  if (std::abs(op.alpha() - params.alpha) > 1e-14 * std::max(1.0, params.alpha))
    throw std::invalid_argument("Riesz operator alpha differs from parameters");
  if (u.grid_ptr() != op.grid_ptr() && !u.grid().same_nodes(op.grid()))
    throw std::invalid_argument("field and Riesz operator live on different grids");
}

namespace {

Eigen::VectorXd abs_pow(const Eigen::VectorXd& v, double s) { return v.cwiseAbs().array().pow(s).matrix(); }

double weighted_norm(const Grid& g, const Eigen::VectorXd& v) {
  return std::sqrt(g.omega() * g.weights().dot(v.cwiseAbs2()));
}

}  // namespace

FunctionalParts functional_parts(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  check_compatible(u, params, op);
  FunctionalParts f;
  f.a = dirichlet_energy(u);
  f.b = lp_power(u, 2.0);
  f.c = lp_power(u, params.q);
  const Field up = u.with_values(abs_pow(u.values(), params.p), true);
  f.d = dalpha(op, up);
  return f;
}

EnergyBreakdown energy(const FunctionalParts& f, const ProblemParams& params) {
  EnergyBreakdown e;
  e.kinetic = 0.5 * params.kinetic_weight * f.a;
  e.mass = 0.5 * params.eps * f.b;
  e.nonlocal = f.d / (2.0 * params.p);
  e.local = params.local_weight * f.c / params.q;
  e.total = e.kinetic + e.mass - e.nonlocal + e.local;
  return e;
}

EnergyBreakdown energy(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  return energy(functional_parts(u, params, op), params);
}

double pohozaev(const FunctionalParts& f, const ProblemParams& params) {
  const int N = params.N;
  return (N - 2) / 2.0 * params.kinetic_weight * f.a + params.eps * N / 2.0 * f.b +
         N / params.q * params.local_weight * f.c - (N + params.alpha) / (2.0 * params.p) * f.d;
}

double pohozaev(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  return pohozaev(functional_parts(u, params, op), params);
}

double nehari(const FunctionalParts& f, const ProblemParams& params) {
  return params.kinetic_weight * f.a + params.eps * f.b + params.local_weight * f.c - f.d;
}

double nehari(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  return nehari(functional_parts(u, params, op), params);
}

double m_quantity(const FunctionalParts& f) { return f.a + f.b + f.c; }

double manifold_energy(const FunctionalParts& f, const ProblemParams& params) {
  return params.kinetic_weight * f.a / params.N + params.alpha / (2.0 * params.N * params.p) * f.d;
}

double ray_energy(const FunctionalParts& f, const ProblemParams& params, double t) {
  const int N = params.N;
  return 0.5 * params.kinetic_weight * f.a * std::pow(t, N - 2) +
         (0.5 * params.eps * f.b + params.local_weight * f.c / params.q) * std::pow(t, N) -
         f.d / (2.0 * params.p) * std::pow(t, N + params.alpha);
}

double ray_slope(const FunctionalParts& f, const ProblemParams& params, double t) {
  const int N = params.N;
  return (N - 2) / 2.0 * params.kinetic_weight * f.a * std::pow(t, N - 3) +
         N * (0.5 * params.eps * f.b + params.local_weight * f.c / params.q) * std::pow(t, N - 1) -
         (N + params.alpha) / (2.0 * params.p) * f.d * std::pow(t, N + params.alpha - 1);
}

double dilation_root(const FunctionalParts& f, const ProblemParams& params) {
  const int N = params.N;
  const double A = (N - 2) / 2.0 * params.kinetic_weight * f.a;
  const double B = N * (0.5 * params.eps * f.b + params.local_weight * f.c / params.q);
  const double C = (N + params.alpha) / (2.0 * params.p) * f.d;
  if (!(C > 0)) throw NoProjection("nonlocal term vanishes: the dilation ray misses the Pohozaev manifold");
  if (!(A > 0 || B > 0)) throw NoProjection("positive terms vanish: no interior maximum along the dilation ray");
  // h(t) = ray_slope / t^{N-3} = A + B t² − C t^{α+2}: positive near 0, one sign change.
  const double alpha = params.alpha;
  auto h = [&](double t) { return A + B * t * t - C * std::pow(t, alpha + 2); };
  auto dh = [&](double t) { return 2 * B * t - (alpha + 2) * C * std::pow(t, alpha + 1); };
  double lo = 1.0, hi = 1.0;
  if (h(1.0) > 0) {
    while (h(hi) > 0) {
      lo = hi;
      hi *= 2;
      if (hi > 1e300) throw NoProjection("dilation root not bracketed");
    }
  } else {
    while (h(lo) <= 0) {
      hi = lo;
      lo /= 2;
      if (lo < 1e-300) throw NoProjection("dilation root not bracketed");
    }
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double ht = h(t);
    if (ht > 0) lo = t; else hi = t;
    const double d = dh(t);
    double next = d != 0 ? t - ht / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 4 * std::numeric_limits<double>::epsilon() * t) return next;
    t = next;
  }
  return t;
}

Projection pohozaev_project(const Field& u, const ProblemParams& params, const RieszOperator& op,
                            double rel_tol, int max_rounds) {
  Projection out{1.0, u, 0.0};
  FunctionalParts f = functional_parts(u, params, op);
  double best = std::abs(pohozaev(f, params)) / m_quantity(f);
  out.relative_pohozaev = best;
  if (best <= rel_tol) return out;
  double t = 1.0;
  for (int round = 0; round < max_rounds; ++round) {
    t *= dilation_root(f, params);
    Field v = dilate(u, t);
    f = functional_parts(v, params, op);
    const double rel = std::abs(pohozaev(f, params)) / m_quantity(f);
    if (rel < best) {
      best = rel;
      out = Projection{t, std::move(v), rel};
    } else if (round > 2) {
      break;  // interpolation noise floor
    }
    if (rel <= rel_tol) break;
  }
  if (!(out.relative_pohozaev <= std::max(rel_tol, 1e-8)))
    throw NoProjection("dilation onto the Pohozaev manifold leaves the grid or stalls");
  return out;
}

Field strong_residual(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  check_compatible(u, params, op);
  const Eigen::VectorXd& v = u.values();
  const Eigen::VectorXd lap = radial_laplacian(u);
  const Eigen::VectorXd phi = op.apply(abs_pow(v, params.p));
  Eigen::VectorXd F(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    const double s = v(i) < 0 ? -1.0 : 1.0;
    const double nl = a > 0 ? s * std::pow(a, params.p - 1) * phi(i) : 0.0;
    const double loc = a > 0 ? s * std::pow(a, params.q - 1) : 0.0;
    F(i) = -params.kinetic_weight * lap(i) + params.eps * v(i) - nl + params.local_weight * loc;
  }
  F(F.size() - 1) = 0.0;
  return u.with_values(std::move(F));
}

double relative_strong_residual(const Field& u, const ProblemParams& params, const RieszOperator& op) {
  check_compatible(u, params, op);
  const Grid& g = u.grid();
  const Eigen::Index n = u.size();
  const Eigen::VectorXd& v = u.values();
  const Eigen::VectorXd phi = op.apply(abs_pow(v, params.p));
  Eigen::VectorXd lap = params.kinetic_weight * radial_laplacian(u);
  Eigen::VectorXd mass = params.eps * v;
  Eigen::VectorXd nl(n), loc(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(v(i));
    const double s = v(i) < 0 ? -1.0 : 1.0;
    nl(i) = a > 0 ? s * std::pow(a, params.p - 1) * phi(i) : 0.0;
    loc(i) = a > 0 ? params.local_weight * s * std::pow(a, params.q - 1) : 0.0;
  }
  for (Eigen::VectorXd* w : {&lap, &mass, &nl, &loc}) (*w)(n - 1) = 0.0;
  const Eigen::VectorXd F = -lap + mass - nl + loc;
  const double scale = weighted_norm(g, lap) + weighted_norm(g, mass) + weighted_norm(g, nl) + weighted_norm(g, loc);
  return scale > 0 ? weighted_norm(g, F) / scale : 0.0;
}

// ---------------------------------------------------------------------------
// Parameter-region tests. Exact rationals decide boundaries whenever every
// exponent involved was given exactly; otherwise a 1e-12 relative band counts
// as equality.

namespace {

struct Exponents {
  std::optional<Rational> alpha, p, q;
};

Exponents exact_exponents(const ProblemParams& params) {
  return {params.alpha_exact, params.p_exact, params.q_exact};
}

// Sign of x − y.
int compare_num(double x, double y) {
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(x), std::abs(y)));
  if (std::abs(x - y) <= tol) return 0;
  return x < y ? -1 : 1;
}

int compare_p_to(const ProblemParams& P, const Exponents& e, bool upper) {
  const Rational N(P.N);
  if (e.alpha && e.p) {
    const Rational bound = upper ? (N + *e.alpha) / (N - Rational(2)) : (N + *e.alpha) / N;
    return compare(*e.p, bound);
  }
  return compare_num(P.p, upper ? P.upper_choquard() : P.lower_choquard());
}

int compare_q_to_hls(const ProblemParams& P, const Exponents& e) {
  const Rational N(P.N);
  if (e.alpha && e.p && e.q) return compare(*e.q, Rational(2) * N * *e.p / (N + *e.alpha));
  return compare_num(P.q, P.hls_critical_q());
}

}  // namespace

std::optional<std::string> nonexistence_clause(const ProblemParams& params) {
  const Exponents e = exact_exponents(params);
  char buf[160];
  if (compare_p_to(params, e, false) <= 0) {
    std::snprintf(buf, sizeof buf, "p <= (N+alpha)/N (p = %.6g, (N+alpha)/N = %.6g)", params.p,
                  params.lower_choquard());
    return std::string(buf);
  }
  if (compare_p_to(params, e, true) >= 0 && compare_q_to_hls(params, e) <= 0) {
    std::snprintf(buf, sizeof buf,
                  "p >= (N+alpha)/(N-2) and q <= 2Np/(N+alpha) (p = %.6g, (N+alpha)/(N-2) = %.6g, q = %.6g, "
                  "2Np/(N+alpha) = %.6g)",
                  params.p, params.upper_choquard(), params.q, params.hls_critical_q());
    return std::string(buf);
  }
  return std::nullopt;
}

bool nonexistence_guard(const ProblemParams& params) { return nonexistence_clause(params).has_value(); }

bool p0_admissible(const ProblemParams& params) {
  const Exponents e = exact_exponents(params);
  const int lo = compare_p_to(params, e, false), hi = compare_p_to(params, e, true);
  const int qc = compare_q_to_hls(params, e);
  return (lo > 0 && hi < 0 && qc < 0) || (hi > 0 && qc > 0);
}

bool choquard_admissible(const ProblemParams& params) {
  const Exponents e = exact_exponents(params);
  return compare_p_to(params, e, false) > 0 && compare_p_to(params, e, true) < 0;
}

void require_solvable(const ProblemParams& params) {
  params.validate();
  if (!params.has_local_term()) {
    if (!choquard_admissible(params))
      throw UnsupportedParameters("Choquard equation needs (N+alpha)/N < p < (N+alpha)/(N-2)");
    if (!(params.eps > 0)) throw UnsupportedParameters("Choquard equation needs a positive mass coefficient");
    return;
  }
  if (params.eps == 0.0) {
    if (!p0_admissible(params))
      throw UnsupportedParameters("parameters outside the existence region of the eps = 0 equation");
    return;
  }
  if (const auto clause = nonexistence_clause(params))
    throw UnsupportedParameters("parameters lie in the nonexistence region: no nontrivial solution since " + *clause);
}

}  // namespace choquard
