#include "choquard/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "choquard/errors.hpp"
#include "choquard/functionals.hpp"
#include "choquard/interp.hpp"
#include "choquard/quadrature.hpp"
#include "choquard/thomas_fermi.hpp"

namespace choquard {

std::string to_string(Direction d) { return d == Direction::to_zero ? "to-zero" : "to-infinity"; }

Direction parse_direction(const std::string& s) {
  if (s == "to-zero" || s == "zero" || s == "0") return Direction::to_zero;
  if (s == "to-infinity" || s == "infinity" || s == "inf") return Direction::to_infinity;
  throw std::invalid_argument("unknown direction '" + s + "'");
}

std::string to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::formal_limit_p0: return "formal-limit-P0";
    case RegimeKind::choquard: return "choquard";
    case RegimeKind::thomas_fermi: return "thomas-fermi";
    case RegimeKind::critical_choquard: return "critical-choquard";
    case RegimeKind::self_similar: return "self-similar";
    case RegimeKind::critical_thomas_fermi: return "critical-thomas-fermi";
    case RegimeKind::nonexistence_boundary: return "nonexistence-boundary";
  }
  return "?";
}

std::string to_string(LimitKind k) {
  switch (k) {
    case LimitKind::p0: return "P0";
    case LimitKind::choquard: return "choquard";
    case LimitKind::tf: return "tf";
    case LimitKind::v_critical: return "V-critical";
    case LimitKind::vtilde_critical: return "Vtilde-critical";
    case LimitKind::gpp_explicit: return "gpp-explicit";
  }
  return "?";
}

LimitKind parse_limit_kind(const std::string& s) {
  for (LimitKind k : {LimitKind::p0, LimitKind::choquard, LimitKind::tf, LimitKind::v_critical,
                      LimitKind::vtilde_critical, LimitKind::gpp_explicit})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown limit profile '" + s + "'");
}

std::string to_string(Norm n) {
  switch (n) {
    case Norm::d1: return "D1";
    case Norm::l2: return "L2";
    case Norm::lq: return "Lq";
  }
  return "?";
}

Norm parse_norm(const std::string& s) {
  if (s == "D1" || s == "d1") return Norm::d1;
  if (s == "L2" || s == "l2") return Norm::l2;
  if (s == "Lq" || s == "lq") return Norm::lq;
  throw std::invalid_argument("unknown norm '" + s + "'");
}

// ---------------------------------------------------------------------------
// Classification

namespace {

// A real that remembers its exact value when every input had one.
struct Exact {
  double v;
  std::optional<Rational> r;
};

Exact lift(double v, const std::optional<Rational>& r) { return {v, r}; }
Exact lift(int n) { return {double(n), Rational(n)}; }

template <class Op, class ROp>
Exact combine(const Exact& a, const Exact& b, Op op, ROp rop) {
  Exact e{op(a.v, b.v), std::nullopt};
  if (a.r && b.r) e.r = rop(*a.r, *b.r);
  return e;
}

Exact operator+(const Exact& a, const Exact& b) {
  return combine(a, b, std::plus<>(), [](const Rational& x, const Rational& y) { return x + y; });
}
Exact operator-(const Exact& a, const Exact& b) {
  return combine(a, b, std::minus<>(), [](const Rational& x, const Rational& y) { return x - y; });
}
Exact operator*(const Exact& a, const Exact& b) {
  return combine(a, b, std::multiplies<>(), [](const Rational& x, const Rational& y) { return x * y; });
}
Exact operator/(const Exact& a, const Exact& b) {
  return combine(a, b, std::divides<>(), [](const Rational& x, const Rational& y) { return x / y; });
}

// Sign of a − b; values within 1e-12 relative count as equal unless both are exact.
int cmp(const Exact& a, const Exact& b) {
  if (a.r && b.r) return compare(*a.r, *b.r);
  const double tol = 1e-12 * std::max({1.0, std::abs(a.v), std::abs(b.v)});
  if (std::abs(a.v - b.v) <= tol) return 0;
  return a.v < b.v ? -1 : 1;
}

}  // namespace

RegimeLabel classify(const ProblemParams& params, Direction direction) {
  params.validate();
  const Exact N = lift(params.N), two = lift(2);
  const Exact a = lift(params.alpha, params.alpha_exact);
  const Exact p = lift(params.p, params.p_exact);
  const Exact q = lift(params.q, params.q_exact);
  const Exact lower = (N + a) / N, upper = (N + a) / (N - two);
  const Exact qc = two * N * p / (N + a);
  const Exact qss = two * (two * p + a) / (two + a);
  const Exact two_star = two * N / (N - two);

  RegimeLabel out{direction, RegimeKind::nonexistence_boundary};
  const int lo = cmp(p, lower), hi = cmp(p, upper), hc = cmp(q, qc);
  if (lo <= 0 || (hi >= 0 && hc <= 0)) return out;
  if (direction == Direction::to_infinity) {
    const int s = cmp(q, qss);
    out.kind = s < 0 ? RegimeKind::choquard : s == 0 ? RegimeKind::self_similar : RegimeKind::thomas_fermi;
    return out;
  }
  if (hi > 0) {
    out.kind = RegimeKind::formal_limit_p0;
  } else if (hi == 0) {
    out.kind = cmp(q, two_star) > 0 ? RegimeKind::critical_choquard : RegimeKind::nonexistence_boundary;
  } else if (hc < 0) {
    out.kind = RegimeKind::formal_limit_p0;
  } else if (hc == 0) {
    out.kind = RegimeKind::critical_thomas_fermi;
  } else {
    const int s = cmp(q, qss);
    out.kind = s < 0 ? RegimeKind::thomas_fermi : s == 0 ? RegimeKind::self_similar : RegimeKind::choquard;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rescalings

namespace {

void check_eps(double eps) {
  if (!(eps > 0) || !std::isfinite(eps)) throw std::invalid_argument("rescaling needs a finite eps > 0");
}

// Samples amp·u(r_i) placed at radii space·r_i.
Field scale_field(const Field& u, double amp, double space, const GridPtr<double>& target) {
  Field v(u.grid().scaled(space), amp * u.values(), u.nonnegative());
  return target ? resample(v, target) : v;
}

double first_amplitude_exponent(const ProblemParams& P) {
  if (!(P.p > 1)) throw std::invalid_argument("first rescaling needs p > 1");
  return (2.0 + P.alpha) / (4.0 * (P.p - 1.0));
}

double second_spatial_exponent(const ProblemParams& P) {
  if (P.q == 2.0) throw std::invalid_argument("second rescaling needs q != 2");
  return (2.0 * P.p - P.q) / (P.alpha * (P.q - 2.0));
}

}  // namespace

Field rescale_first(const Field& u, double eps, const ProblemParams& params, const GridPtr<double>& target) {
  check_eps(eps);
  return scale_field(u, std::pow(eps, -first_amplitude_exponent(params)), std::sqrt(eps), target);
}

Field unscale_first(const Field& v, double eps, const ProblemParams& params, const GridPtr<double>& target) {
  check_eps(eps);
  return scale_field(v, std::pow(eps, first_amplitude_exponent(params)), 1.0 / std::sqrt(eps), target);
}

ProblemParams first_rescaled_params(const ProblemParams& params, double eps) {
  check_eps(eps);
  ProblemParams r = params;
  const double a = first_amplitude_exponent(params);
  r.eps = 1.0;
  r.local_weight = params.local_weight * std::pow(eps, a * (params.q - 2.0) - 1.0);
  return r;
}

double first_energy_exponent(const ProblemParams& P) {
  return ((P.N + P.alpha) - P.p * (P.N - 2.0)) / (2.0 * (P.p - 1.0));
}

Field rescale_second(const Field& u, double eps, const ProblemParams& params, const GridPtr<double>& target) {
  check_eps(eps);
  const double s = second_spatial_exponent(params);
  return scale_field(u, std::pow(eps, -1.0 / (params.q - 2.0)), std::pow(eps, s), target);
}

Field unscale_second(const Field& v, double eps, const ProblemParams& params, const GridPtr<double>& target) {
  check_eps(eps);
  const double s = second_spatial_exponent(params);
  return scale_field(v, std::pow(eps, 1.0 / (params.q - 2.0)), std::pow(eps, -s), target);
}

ProblemParams second_rescaled_params(const ProblemParams& params, double eps) {
  check_eps(eps);
  ProblemParams r = params;
  r.eps = 1.0;
  r.kinetic_weight = params.kinetic_weight * std::pow(eps, 2.0 * second_spatial_exponent(params) - 1.0);
  return r;
}

double second_energy_exponent(const ProblemParams& P) {
  return 1.0 + 2.0 / (P.q - 2.0) - P.N * second_spatial_exponent(P);
}

// ---------------------------------------------------------------------------
// Limit profiles

namespace {

bool near(double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y)); }

Field power_field(const Field& u, double s) { return u.with_values(u.values().cwiseAbs().array().pow(s).matrix(), true); }

// Extremal (1+r²)^{−e}.
Field bubble(const GridPtr<double>& g, double e) {
  return Field(g, Field::from_function(g, [e](double r) { return std::pow(1.0 + r * r, -e); }).values(), true);
}

double sobolev_closed(int N) {
  return std::numbers::pi * N * (N - 2.0) * std::pow(std::tgamma(N / 2.0) / std::tgamma(double(N)), 2.0 / N);
}

double hls_closed(int N, double a) {
  return riesz_constant(N, a) * std::pow(std::numbers::pi, (N - a) / 2.0) * std::tgamma(a / 2.0) /
         std::tgamma((N + a) / 2.0) * std::pow(std::tgamma(N / 2.0) / std::tgamma(double(N)), -a / N);
}

// D_α(|w|^p) / ‖w‖_{2Np/(N+α)}^{2p}.
double hls_quotient(const Field& w, double p, const RieszOperator& op) {
  const int N = op.dim();
  const double s = 2.0 * N * p / (N + op.alpha());
  return dalpha(op, power_field(w, p)) / std::pow(lp_norm(w, s), 2.0 * p);
}

}  // namespace

LimitProfile limit_profile(LimitKind kind, const ProblemParams& params, const RieszOperator& op,
                           const SolverOptions& solver) {
  params.validate();
  if (op.dim() != params.N || !near(op.alpha(), params.alpha))
    throw std::invalid_argument("Riesz operator does not match parameters");
  const auto& g = op.grid_ptr();
  const int N = params.N;
  const double a = params.alpha;
  LimitProfile out;
  out.kind = kind;
  switch (kind) {
    case LimitKind::p0: {
      ProblemParams p0 = params;
      p0.eps = 0.0;
      const GroundstateResult r = solve(p0, op, solver);
      out.field = r.field;
      out.constants["c_level"] = r.c_level;
      break;
    }
    case LimitKind::choquard: {
      const GroundstateResult r = solve_choquard(params, op, solver);
      out.field = r.field;
      out.constants["c_level"] = r.c_level;
      break;
    }
    case LimitKind::tf: {
      if (!near(params.p, 2.0)) throw std::invalid_argument("Thomas-Fermi limit profile needs p = 2");
      const TFProfile tf = solve_tf(params.q / 2.0, op);
      out.field = tf_groundstate(tf, params.q, g);
      out.constants["s_tf"] = tf.s_tf;
      out.constants["lambda"] = tf.lambda;
      out.constants["R_rho"] = tf.support_radius;
      out.constants["R_v"] = support_radius(out.field);
      break;
    }
    case LimitKind::gpp_explicit: {
      if (N != 3 || !near(a, 2.0) || !near(params.p, 2.0) || !near(params.q, 4.0))
        throw std::invalid_argument("explicit GPP profile needs N = 3, alpha = 2, p = 2, q = 4");
      const ExplicitGPP e = explicit_gpp(g);
      out.field = e.v0;
      out.constants["s_tf"] = e.s_tf;
      out.constants["k"] = e.k;
      out.constants["R_rho"] = e.R_rho;
      out.constants["R_v"] = e.R_v;
      break;
    }
    case LimitKind::v_critical: {
      if (!near(params.p, params.upper_choquard()))
        throw std::invalid_argument("V-critical profile needs p = (N+alpha)/(N-2)");
      const double p = params.upper_choquard();
      const double s2 = params.sobolev_exponent();
      const Field U = Field(g, (std::pow(N * (N - 2.0), (N - 2.0) / 4.0) * bubble(g, (N - 2.0) / 2.0).values()), true);
      const double S = dirichlet_energy(U) / std::pow(lp_norm(U, s2), 2.0);
      const double C = hls_quotient(U, p, op);
      const double Sc = sobolev_closed(N), Cc = hls_closed(N, a);
      const double amp = std::pow(std::pow(Sc, a) * Cc * Cc, -(N - 2.0) / (4.0 * (a + 2.0)));
      out.field = U.with_values(amp * U.values(), true);
      out.constants["S_star"] = S;
      out.constants["S_star_closed"] = Sc;
      out.constants["C_alpha"] = C;
      out.constants["C_alpha_closed"] = Cc;
      out.constants["S_HL"] = dirichlet_energy(out.field) /
                              std::pow(dalpha(op, power_field(out.field, p)), (N - 2.0) / (N + a));
      // Closed-form constants on this side; the quadrature side is S_HL above.
      out.constants["S_HL_relation"] = Sc * std::pow(Cc, -(N - 2.0) / (N + a));
      out.constants["amplitude"] = amp;
      out.constants["match_scale"] = std::pow(Sc * std::pow(Cc, -(N - 2.0) / (N + a)), 1.0 / (a + 2.0));
      break;
    }
    case LimitKind::vtilde_critical: {
      if (!choquard_admissible(params) || !near(params.q, params.hls_critical_q()))
        throw std::invalid_argument("Vtilde-critical profile needs (N+alpha)/N < p < (N+alpha)/(N-2), q = 2Np/(N+alpha)");
      const double p = params.p;
      // I_α*(1+r²)^{−(N+α)/2} = κ(1+r²)^{−(N−α)/2}; the equation at r = 0 fixes σ^α = 1/κ.
      const double kappa = op.apply(bubble(g, (N + a) / 2.0).values())(0);
      const double sigma = std::pow(kappa, -1.0 / a);
      const Field Ut(g, bubble(g, (N + a) / (2.0 * p)).values() * std::pow(sigma, (N + a) / (2.0 * p)), true);
      const double C = hls_quotient(Ut, p, op);
      const double STF = lp_power(Ut, params.q) / std::pow(dalpha(op, power_field(Ut, p)), N / (N + a));
      const double mu = std::pow(STF, 1.0 / a);
      out.field = Field(g, Field::from_function(g, [&](double r) {
                             return std::pow(sigma / (1.0 + mu * mu * r * r), (N + a) / (2.0 * p));
                           }).values(), true);
      out.constants["sigma"] = sigma;
      out.constants["kappa"] = kappa;
      out.constants["C_alpha"] = C;
      out.constants["C_alpha_closed"] = hls_closed(N, a);
      out.constants["S_TF"] = STF;
      out.constants["S_TF_relation"] = std::pow(hls_closed(N, a), -double(N) / (N + a));
      out.constants["match_scale"] = mu;
      break;
    }
  }
  return out;
}

double critical_choquard_residual(const Field& v, const ProblemParams& params, const RieszOperator& op, double r_max) {
  const double p = params.p;
  const Eigen::VectorXd lap = radial_laplacian(v);
  const Eigen::VectorXd phi = op.apply(power_field(v, p).values());
  const auto& r = v.grid().nodes();
  double worst = 0, scale = 0;
  for (Eigen::Index i = 0; i + 1 < v.size() && r(i) <= r_max; ++i) {
    const double rhs = phi(i) * std::pow(std::abs(v[i]), p - 1.0);
    worst = std::max(worst, std::abs(-lap(i) - rhs));
    scale = std::max(scale, std::abs(lap(i)));
  }
  return scale > 0 ? worst / scale : worst;
}

double critical_tf_residual(const Field& v, const ProblemParams& params, const RieszOperator& op, double r_max) {
  const double p = params.p, q = params.q;
  const Eigen::VectorXd phi = op.apply(power_field(v, p).values());
  const auto& r = v.grid().nodes();
  double worst = 0, scale = 0;
  for (Eigen::Index i = 0; i < v.size() && r(i) <= r_max; ++i) {
    const double lhs = std::pow(std::abs(v[i]), q - 1.0);
    worst = std::max(worst, std::abs(lhs - phi(i) * std::pow(std::abs(v[i]), p - 1.0)));
    scale = std::max(scale, lhs);
  }
  return scale > 0 ? worst / scale : worst;
}

// ---------------------------------------------------------------------------
// λ extraction

namespace {

// Exact integral of the monotone cubic interpolant of f times r^{N−1} (8-point Gauss is
// exact for degree 3 + N − 1 <= 15).
class CumulativeMass {
 public:
  explicit CumulativeMass(const Field& f) : interp_(f), r_(f.grid().nodes()), N_(f.grid().dim()), c_(r_.size()) {
    c_(0) = 0;
    for (Eigen::Index k = 0; k + 1 < r_.size(); ++k) c_(k + 1) = c_(k) + piece(r_(k), r_(k + 1));
  }

  double total() const { return c_(c_.size() - 1); }
  double r_max() const { return r_(r_.size() - 1); }

  double operator()(double x) const {
    if (x <= 0) return 0;
    if (x >= r_max()) return total();
    const Eigen::Index k = std::upper_bound(r_.data(), r_.data() + r_.size(), x) - r_.data() - 1;
    return c_(k) + piece(r_(k), x);
  }

  // Smallest x with C(x) = target, for 0 < target < total.
  double invert(double target) const {
    const Eigen::Index k = std::lower_bound(c_.data(), c_.data() + c_.size(), target) - c_.data();
    double lo = r_(std::max<Eigen::Index>(k - 1, 0)), hi = r_(std::min<Eigen::Index>(k, r_.size() - 1));
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((*this)(mid) < target) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  double piece(double a, double b) const {
    static const GaussLegendre<double> gl(8);
    const int N = N_;
    return gl.integrate([&](double s) { return std::max(interp_(s), 0.0) * std::pow(s, N - 1); }, a, b);
  }

  MonotoneCubic<double> interp_;
  Eigen::VectorXd r_;
  int N_;
  Eigen::VectorXd c_;
};

double match_exponent(const ProblemParams& params, MatchMode mode) {
  return mode == MatchMode::critical_choquard ? params.sobolev_exponent() : params.q;
}

}  // namespace

double extract_lambda(const Field& u, const LimitProfile& reference, const ProblemParams& params, MatchMode mode) {
  const bool kind_ok = mode == MatchMode::critical_choquard ? reference.kind == LimitKind::v_critical
                                                            : reference.kind == LimitKind::vtilde_critical;
  if (!kind_ok) throw std::invalid_argument("reference profile does not match the critical mode");
  const double s = match_exponent(params, mode);
  const CumulativeMass ref(power_field(reference.field, s));
  const CumulativeMass cur(power_field(u, s));
  if (!(cur.total() > 0)) throw std::invalid_argument("extract_lambda needs a nonzero field");
  // Both fields are compared after the dilation x → μx that normalizes the limit problem,
  // so the matching radius of u itself is μλ.
  const auto it = reference.constants.find("match_scale");
  const double mu = it == reference.constants.end() ? 1.0 : it->second;
  if (ref.r_max() <= mu) throw std::invalid_argument("reference grid must extend beyond the matching ball");
  const double fraction = ref(mu) / ref.total();
  if (!(fraction < 1.0)) throw NoSolution("target ball mass exceeds the total mass of the normalized field");
  return cur.invert(fraction * cur.total()) / mu;
}

// ---------------------------------------------------------------------------
// Sweeps

double distance(const Field& a, const Field& b, Norm norm, double q) {
  if (a.grid().dim() != b.grid().dim()) throw std::invalid_argument("distance between fields of different dimension");
  const Field ar = a.grid().same_nodes(b.grid()) ? Field(b.grid_ptr(), a.values()) : resample(a, b.grid_ptr());
  const Field d = b.with_values(ar.values() - b.values());
  switch (norm) {
    case Norm::d1: return std::sqrt(dirichlet_energy(d));
    case Norm::l2: return lp_norm(d, 2.0);
    case Norm::lq: return lp_norm(d, q);
  }
  return 0;
}

namespace {

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

GridPtr<double> geometric_grid(int N, double R, int n, double ratio) {
  GridSpec s;
  s.N = N;
  s.R_max = R;
  s.n = n;
  s.stretch = Stretch::geometric;
  s.ratio = ratio;
  return make_grid<double>(s);
}

struct Prediction {
  std::optional<double> exponent;
  std::optional<std::pair<double, double>> band;
  bool log_abscissa = false;  // regress against log(ε ln(1/ε))
};

Prediction predict(const ProblemParams& P, RegimeKind kind) {
  Prediction out;
  const int N = P.N;
  const double q = P.q, p = P.p, a = P.alpha;
  if (kind == RegimeKind::critical_choquard) {
    if (N == 3) out.exponent = -1.0 / (q - 4.0);
    else if (N == 4) { out.exponent = -1.0 / (q - 2.0); out.log_abscissa = true; }
    else out.exponent = -2.0 / ((q - 2.0) * (N - 2.0));
  } else if (kind == RegimeKind::critical_thomas_fermi) {
    const double edge = 2.0 * (3.0 + a) / 3.0;
    if (N >= 4 || p < edge - 1e-12 * edge) {
      out.exponent = -0.5;
    } else if (std::abs(p - edge) <= 1e-12 * edge) {
      out.exponent = -0.5;  // up to logarithmic factors on either side
    } else {
      const double lo = (p - (3.0 + a)) / p;
      const double hi = (3.0 + a) * (3.0 + a - 2.0 * p) / (p * (3.0 * p - (3.0 + a)));
      out.band = std::make_pair(std::min(lo, hi), std::max(lo, hi));
    }
  }
  return out;
}

struct PointResult {
  bool ok = false;
  std::string failure;
  double level = 0, mass = 0, lambda = 0;
  std::map<Norm, double> errors;
  Field field;  // as solved
};

}  // namespace

SweepReport sweep(const ProblemParams& params, Direction direction, const std::vector<double>& eps_schedule,
                  const std::vector<Norm>& norms, const SweepOptions& opts) {
  params.validate();
  if (eps_schedule.size() < 4) throw std::invalid_argument("sweep needs at least 4 eps values");
  for (double e : eps_schedule)
    if (!(e > 0) || !std::isfinite(e)) throw std::invalid_argument("sweep eps values must be finite and positive");
  const bool down = eps_schedule[1] < eps_schedule[0];
  for (std::size_t i = 1; i < eps_schedule.size(); ++i)
    if ((eps_schedule[i] < eps_schedule[i - 1]) != down || eps_schedule[i] == eps_schedule[i - 1])
      throw std::invalid_argument("sweep eps schedule must be strictly monotone");
  if (norms.empty()) throw std::invalid_argument("sweep needs at least one norm");

  SweepReport rep;
  rep.params = params;
  rep.direction = direction;
  rep.regime = classify(params, direction);
  rep.norms = norms;
  const RegimeKind kind = rep.regime.kind;
  if (kind == RegimeKind::nonexistence_boundary)
    throw UnsupportedParameters("parameters lie in the nonexistence region: nothing to sweep since " +
                                nonexistence_clause(params).value_or("the regime boundary is crossed"));
  const bool critical = kind == RegimeKind::critical_choquard || kind == RegimeKind::critical_thomas_fermi;
  if (kind == RegimeKind::thomas_fermi && direction == Direction::to_zero &&
      !(params.N <= 5 && params.q > 4.0 * params.N / (params.N + 2.0) && params.q < 3.0))
    rep.warnings.push_back("Thomas-Fermi convergence as eps -> 0 is only established for N <= 5 and 4N/(N+2) < q < 3");
  if (critical)
    for (double e : eps_schedule)
      if (e < opts.eps_floor) throw std::invalid_argument("eps below the configured floor of the critical sweep");
  const int N = params.N;
  const double q = params.q;
  const RieszOptions ro;

  // Limit profile and the map from u_ε to the compared field.
  LimitProfile limit;
  if (kind == RegimeKind::thomas_fermi) {
    if (!near(params.p, 2.0)) throw UnsupportedParameters("Thomas-Fermi sweeps are implemented for p = 2 only");
    if (std::find(norms.begin(), norms.end(), Norm::d1) != norms.end())
      throw std::invalid_argument("the Thomas-Fermi limit is not in D1; use L2 or Lq");
    GridSpec s;
    s.N = N;
    s.R_max = 8.0;
    s.n = 1024;
    const RieszOperator op = build_default_operator(make_grid<double>(s), params.alpha, ro);
    const TFProfile tf = solve_tf(q / 2.0, op);
    limit.kind = LimitKind::tf;
    limit.field = tf_groundstate(tf, q);
    limit.constants["s_tf"] = tf.s_tf;
  } else if (kind == RegimeKind::critical_choquard || kind == RegimeKind::critical_thomas_fermi) {
    const RieszOperator op = build_default_operator(geometric_grid(N, 2000.0, 2048, 1.004), params.alpha, ro);
    limit = limit_profile(kind == RegimeKind::critical_choquard ? LimitKind::v_critical : LimitKind::vtilde_critical,
                          params, op);
  } else {
    SolverOptions so = opts.solver;
    so.seed_profile = SeedProfile::gaussian;
    so.seed.reset();
    if (kind == RegimeKind::formal_limit_p0) {
      const RieszOperator op = build_default_operator(geometric_grid(N, 400.0, opts.grid_n, 1.003), params.alpha, ro);
      limit = limit_profile(LimitKind::p0, params, op, so);
    } else if (kind == RegimeKind::choquard) {
      const RieszOperator op = build_default_operator(make_grid<double>(default_grid_spec(N, 1.0, opts.grid_n)),
                                                      params.alpha, ro);
      limit = limit_profile(LimitKind::choquard, params, op, so);
    } else {  // self-similar: compare with u_1
      ProblemParams p1 = params;
      p1.eps = 1.0;
      const RieszOperator op = build_default_operator(make_grid<double>(default_grid_spec(N, 1.0, opts.grid_n)),
                                                      params.alpha, ro);
      limit.kind = LimitKind::choquard;
      limit.field = solve(p1, op, so).field;
    }
  }
  const Prediction pred = predict(params, kind);
  rep.predicted_exponent = pred.exponent;
  rep.predicted_band = pred.band;
  if (pred.log_abscissa) rep.fit_abscissa = "log(eps ln(1/eps))";

  auto grid_for = [&](double eps) -> GridPtr<double> {
    if (kind == RegimeKind::critical_choquard || kind == RegimeKind::critical_thomas_fermi)
      return geometric_grid(N, opts.critical_radius / std::sqrt(eps), opts.critical_grid_n, opts.critical_ratio);
    if (kind == RegimeKind::formal_limit_p0)
      return geometric_grid(N, std::max(400.0, 30.0 / std::sqrt(eps)), opts.grid_n, 1.003);
    return make_grid<double>(default_grid_spec(N, eps, opts.grid_n));
  };
  // γ in the implicit rescaling v̄ = λ^γ u(λx).
  const double gamma = kind == RegimeKind::critical_choquard ? (N - 2.0) / 2.0 : (N + params.alpha) / (2.0 * params.p);
  const MatchMode mode = kind == RegimeKind::critical_choquard ? MatchMode::critical_choquard : MatchMode::critical_tf;
  // Critical regimes compare L^s-normalized shapes; γ = N/s keeps the norm fixed under v̄ = λ^γ u(λx).
  const double s_match = match_exponent(params, mode);
  Field target = limit.field;
  if (critical) target = limit.field.with_values(limit.field.values() / lp_norm(limit.field, s_match), true);

  auto compare = [&](const Field& u, double eps, PointResult& pr) {
    Field v;
    switch (kind) {
      case RegimeKind::choquard:
      case RegimeKind::self_similar: v = rescale_first(u, eps, params); break;
      case RegimeKind::thomas_fermi: v = rescale_second(u, eps, params); break;
      case RegimeKind::formal_limit_p0: v = u; break;
      default: {
        pr.lambda = extract_lambda(u, limit, params, mode);
        v = scale_field(u, std::pow(pr.lambda, gamma) / lp_norm(u, s_match), 1.0 / pr.lambda, nullptr);
      }
    }
    for (Norm n : norms) pr.errors[n] = distance(v, target, n, q);
  };

  auto solve_point = [&](double eps, const std::optional<Field>& seed) {
    PointResult pr;
    try {
      ProblemParams pe = params;
      pe.eps = eps;
      const RieszOperator op = build_default_operator(grid_for(eps), params.alpha, ro);
      SolverOptions so = opts.solver;
      if (seed) {
        so.seed_profile = SeedProfile::paper_profile;
        so.seed = seed;
      }
      const GroundstateResult r = solve(pe, op, so);
      pr.level = r.c_level;
      pr.mass = eps * r.parts.b;
      pr.field = r.field;
      compare(r.field, eps, pr);
      pr.ok = true;
    } catch (const std::exception& e) {
      pr.failure = "eps=" + std::to_string(eps) + ": " + e.what();
    }
    return pr;
  };

  std::vector<PointResult> results(eps_schedule.size());
  if (critical) {
    // Continuation: each seed is the previous solution moved to the predicted scale.
    const double e_pred = pred.exponent.value_or(-0.5);
    std::optional<Field> seed;
    const LimitProfile& V = limit;
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
      const double eps = eps_schedule[i];
      const GridPtr<double> g = grid_for(eps);
      if (i == 0 || !results[i - 1].ok) {
        const double L = std::pow(eps, e_pred);
        seed = scale_field(V.field, std::pow(L, -gamma), L, g);
      } else {
        const double f = std::pow(eps / eps_schedule[i - 1], e_pred);
        seed = scale_field(results[i - 1].field, std::pow(f, -gamma), f, g);
      }
      results[i] = solve_point(eps, seed);
    }
  } else {
    const int jobs = std::max(1, std::min<int>(opts.jobs, int(eps_schedule.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < eps_schedule.size(); i = next++) results[i] = solve_point(eps_schedule[i], {});
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < results.size(); ++i) {
    const PointResult& pr = results[i];
    if (!pr.ok) {
      rep.complete = false;
      rep.failures.push_back(pr.failure);
      continue;
    }
    rep.eps.push_back(eps_schedule[i]);
    rep.levels.push_back(pr.level);
    rep.mass_term.push_back(pr.mass);
    for (Norm n : norms) rep.errors[n].push_back(pr.errors.at(n));
    if (critical) rep.lambda.push_back(pr.lambda);
  }

  if (critical && rep.lambda.size() >= 2) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < rep.eps.size(); ++i) {
      const double e = rep.eps[i];
      x.push_back(pred.log_abscissa ? std::log(e * std::log(1.0 / e)) : std::log(e));
      y.push_back(std::log(rep.lambda[i]));
    }
    rep.fitted_exponent = slope(x, y);
    if (x.size() >= 3) {
      std::vector<std::size_t> idx(x.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rep.eps[a] < rep.eps[b]; });
      std::vector<double> x3, y3;
      for (int k = 0; k < 3; ++k) {
        x3.push_back(x[idx[k]]);
        y3.push_back(y[idx[k]]);
      }
      rep.fitted_exponent_last3 = slope(x3, y3);
    }
  }
  return rep;
}

bool mass_vanishing_check(const SweepReport& report) {
  if (report.regime.kind != RegimeKind::formal_limit_p0)
    throw std::invalid_argument("mass vanishing applies to formal-limit-P0 sweeps");
  const auto& m = report.mass_term;
  if (m.size() < 4) throw std::invalid_argument("mass vanishing needs at least 4 sweep points");
  for (std::size_t i = 1; i < m.size(); ++i)
    if (!(m[i] < m[i - 1])) return false;
  return m.back() < 0.1 * m.front();
}

}  // namespace choquard
