#pragma once

#include <optional>
#include <string>

#include "choquard/field.hpp"
#include "choquard/params.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

// The four integrals every functional is assembled from.
struct FunctionalParts {
  double a = 0;  // ‖∇u‖²
  double b = 0;  // ‖u‖²
  double c = 0;  // ‖u‖_q^q
  double d = 0;  // ∫(I_α*|u|^p)|u|^p
};

struct EnergyBreakdown {
  double kinetic = 0;
  double mass = 0;
  double nonlocal = 0;
  double local = 0;
  double total = 0;
};

// Throws std::invalid_argument when u, op and params disagree on N, α or grid.
void check_compatible(const Field& u, const ProblemParams& params, const RieszOperator& op);

FunctionalParts functional_parts(const Field& u, const ProblemParams& params, const RieszOperator& op);

EnergyBreakdown energy(const FunctionalParts& parts, const ProblemParams& params);
EnergyBreakdown energy(const Field& u, const ProblemParams& params, const RieszOperator& op);

double pohozaev(const FunctionalParts& parts, const ProblemParams& params);
double pohozaev(const Field& u, const ProblemParams& params, const RieszOperator& op);

double nehari(const FunctionalParts& parts, const ProblemParams& params);
double nehari(const Field& u, const ProblemParams& params, const RieszOperator& op);

// M(u) = ‖∇u‖² + ‖u‖² + ‖u‖_q^q, the scale for identity residuals.
double m_quantity(const FunctionalParts& parts);

// I = a/N + α/(2Np)·d, valid on the Pohožaev manifold.
double manifold_energy(const FunctionalParts& parts, const ProblemParams& params);

// Energy along the dilation ray t ↦ u(·/t) and its t-derivative.
double ray_energy(const FunctionalParts& parts, const ProblemParams& params, double t);
double ray_slope(const FunctionalParts& parts, const ProblemParams& params, double t);

// Unique t > 0 with ray_slope = 0. Throws NoProjection when d = 0.
double dilation_root(const FunctionalParts& parts, const ProblemParams& params);

struct Projection {
  double t = 1;
  Field projected;
  double relative_pohozaev = 0;  // |𝒫(projected)| / M(projected)
};

// Dilation of u onto the discrete Pohožaev manifold; the scalar root is refined
// against the discrete functional because interpolation perturbs the parts.
Projection pohozaev_project(const Field& u, const ProblemParams& params, const RieszOperator& op,
                            double rel_tol = 1e-12, int max_rounds = 20);

// Pointwise −kΔu + εu − (I_α*|u|^p)|u|^{p−2}u + w|u|^{q−2}u; the Dirichlet node at R_max is zero.
Field strong_residual(const Field& u, const ProblemParams& params, const RieszOperator& op);

// ‖F‖ over the sum of the four term norms, all weighted L² on the grid.
double relative_strong_residual(const Field& u, const ProblemParams& params, const RieszOperator& op);

// True when (P_ε), ε > 0, has no nontrivial solution; boundaries included.
bool nonexistence_guard(const ProblemParams& params);
// The triggered inequality with its numbers, or nullopt outside the region.
std::optional<std::string> nonexistence_clause(const ProblemParams& params);

// Existence region of the ε = 0 equation.
bool p0_admissible(const ProblemParams& params);

// (N+α)/N < p < (N+α)/(N−2).
bool choquard_admissible(const ProblemParams& params);

// Throws UnsupportedParameters when the solver for params would be ill-posed.
void require_solvable(const ProblemParams& params);

}  // namespace choquard
