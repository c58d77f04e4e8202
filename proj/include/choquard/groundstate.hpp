#pragma once

#include <optional>
#include <string>
#include <vector>

#include "choquard/field.hpp"
#include "choquard/functionals.hpp"
#include "choquard/params.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

enum class SeedProfile { gaussian, paper_profile, file };

std::string to_string(SeedProfile s);
SeedProfile parse_seed_profile(const std::string& s);

struct SolverOptions {
  int max_iters = 400;
  double tol = 1e-10;          // relative strong residual
  double step = 0.5;           // initial descent step
  double precond_shift = 1e-3; // replaces ε in the preconditioner when ε is smaller
  SeedProfile seed_profile = SeedProfile::gaussian;
  // Required for paper_profile and file seeds; resampled onto the solver grid.
  std::optional<Field> seed;
  // Descent hands over to Newton below this relative residual.
  double newton_switch = 1e-3;
  int max_descent_iters = 150;
  bool newton = true;
};

enum class TailRegime { exponential, implicit, polynomial };

std::string to_string(TailRegime t);

struct TailFit {
  TailRegime regime = TailRegime::exponential;
  double exponent = 0;            // fitted rate (p>2), power (p<2), or ratio to the implicit law (p=2)
  double amplitude = 0;           // fitted prefactor
  double predicted_exponent = 0;
  std::optional<double> predicted_amplitude;  // plateau constant when the theory fixes it
  double window_lo = 0, window_hi = 0;
};

struct Residuals {
  double pohozaev = 0;  // |𝒫|/M
  double nehari = 0;    // |Nehari|/M
  double strong = 0;    // relative strong residual
};

struct IterationRecord {
  int iteration = 0;
  std::string phase;  // seed | descent | newton
  double energy = 0;
  double residual = 0;
  double step = 0;
};

struct GroundstateResult {
  ProblemParams params;
  Field field;
  EnergyBreakdown energy;
  FunctionalParts parts;
  double c_level = 0;
  Residuals residuals;
  int iterations = 0;
  std::optional<TailFit> tail;
  std::vector<IterationRecord> trace;
  bool energy_monotone = true;  // over accepted descent iterates
};

Residuals compute_residuals(const Field& u, const ProblemParams& params, const RieszOperator& op);

// Positive radial groundstate of −kΔu + εu − (I_α*|u|^p)|u|^{p−2}u + w|u|^{q−2}u = 0.
// Throws UnsupportedParameters inside excluded regions, NonConvergence on budget exhaustion.
GroundstateResult solve(const ProblemParams& params, const RieszOperator& op, const SolverOptions& opts = {});

// −Δv + v = (I_α*|v|^p)|v|^{p−2}v; the q fields of params are ignored.
GroundstateResult solve_choquard(ProblemParams params, const RieszOperator& op, const SolverOptions& opts = {});

// Decay-law fit per the sign of p − 2. The window is chosen from the field; an
// explicit [lo, hi] overrides it. Throws InsufficientTail for short windows.
TailFit fit_tail(const Field& u, const ProblemParams& params, std::optional<double> lo = {},
                 std::optional<double> hi = {});
TailFit fit_tail(const GroundstateResult& result);

}  // namespace choquard
