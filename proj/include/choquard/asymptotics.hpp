#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "choquard/field.hpp"
#include "choquard/groundstate.hpp"
#include "choquard/params.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

enum class Direction { to_zero, to_infinity };

enum class RegimeKind {
  formal_limit_p0,
  choquard,
  thomas_fermi,
  critical_choquard,
  self_similar,
  critical_thomas_fermi,
  nonexistence_boundary,
};

std::string to_string(Direction d);
std::string to_string(RegimeKind k);
Direction parse_direction(const std::string& s);

struct RegimeLabel {
  Direction direction = Direction::to_zero;
  RegimeKind kind = RegimeKind::choquard;
};

// Total on valid params. Boundaries are decided exactly when α, p, q carry rationals.
RegimeLabel classify(const ProblemParams& params, Direction direction);

// v(x) = ε^{−a} u(x/√ε), a = (2+α)/(4(p−1)). The result lives on u's grid scaled by √ε
// unless a target grid is given.
Field rescale_first(const Field& u, double eps, const ProblemParams& params, const GridPtr<double>& target = nullptr);
Field unscale_first(const Field& v, double eps, const ProblemParams& params, const GridPtr<double>& target = nullptr);
// Coefficients of the equation solved by the first rescaling of a solution of params at ε.
ProblemParams first_rescaled_params(const ProblemParams& params, double eps);
// 𝓘_ε(u) = ε^e 𝓘^{(1)}(v).
double first_energy_exponent(const ProblemParams& params);

// v(x) = ε^{−1/(q−2)} u(ε^{−s} x), s = (2p−q)/(α(q−2)).
Field rescale_second(const Field& u, double eps, const ProblemParams& params, const GridPtr<double>& target = nullptr);
Field unscale_second(const Field& v, double eps, const ProblemParams& params, const GridPtr<double>& target = nullptr);
ProblemParams second_rescaled_params(const ProblemParams& params, double eps);
double second_energy_exponent(const ProblemParams& params);

enum class LimitKind { p0, choquard, tf, v_critical, vtilde_critical, gpp_explicit };

std::string to_string(LimitKind k);
LimitKind parse_limit_kind(const std::string& s);

struct LimitProfile {
  LimitKind kind = LimitKind::choquard;
  Field field;
  std::map<std::string, double> constants;
};

// Closed-form kinds are sampled on the operator grid and their constants are quadratures
// on it, so power-law tails need a grid reaching far out. Solver kinds delegate.
LimitProfile limit_profile(LimitKind kind, const ProblemParams& params, const RieszOperator& op,
                           const SolverOptions& solver = {});

// Residual of −ΔV = (I_α*V^p)V^{p−1} relative to sup|ΔV|, over r ≤ r_max.
double critical_choquard_residual(const Field& v, const ProblemParams& params, const RieszOperator& op, double r_max);
// sup |v^{q−1} − (I_α*v^p)v^{p−1}| / sup v^{q−1} over r ≤ r_max.
double critical_tf_residual(const Field& v, const ProblemParams& params, const RieszOperator& op, double r_max);

enum class MatchMode { critical_choquard, critical_tf };

// λ with ∫_{B_λ}|w̄|^s = ∫_{B_1}|V̄|^s, s = 2* or q, where w̄ and V̄ are the s-normalized
// fields u(μx), V(μx) and μ is the reference's "match_scale" constant (1 when absent).
double extract_lambda(const Field& u, const LimitProfile& reference, const ProblemParams& params, MatchMode mode);

enum class Norm { d1, l2, lq };

std::string to_string(Norm n);
Norm parse_norm(const std::string& s);

// ‖a − b‖ with a resampled onto b's grid (zero beyond a's R_max).
double distance(const Field& a, const Field& b, Norm norm, double q);

struct SweepOptions {
  SolverOptions solver;
  int grid_n = 2048;
  // Critical regimes: geometric grids on R_max = critical_radius/√ε.
  int critical_grid_n = 1500;
  double critical_ratio = 1.005;
  double critical_radius = 30.0;
  double eps_floor = 1e-4;
  int jobs = 1;
};

struct SweepReport {
  ProblemParams params;
  Direction direction = Direction::to_zero;
  RegimeLabel regime;
  std::vector<double> eps;
  std::vector<Norm> norms;
  std::map<Norm, std::vector<double>> errors;
  std::vector<double> lambda;
  std::vector<double> levels;
  std::vector<double> mass_term;  // ε‖u_ε‖²
  std::optional<double> fitted_exponent;
  std::optional<double> fitted_exponent_last3;
  std::optional<double> predicted_exponent;
  // Two-sided bounds (lower, upper) on the exponent where only those are known.
  std::optional<std::pair<double, double>> predicted_band;
  std::string fit_abscissa = "log eps";
  bool complete = true;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
};

// Needs a strictly monotone schedule of at least 4 points and a regime with a limit profile.
SweepReport sweep(const ProblemParams& params, Direction direction, const std::vector<double>& eps_schedule,
                  const std::vector<Norm>& norms, const SweepOptions& opts = {});

// True iff ε‖u_ε‖² decreases along the sweep and ends below a tenth of its first value.
bool mass_vanishing_check(const SweepReport& report);

}  // namespace choquard
