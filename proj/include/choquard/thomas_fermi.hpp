#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "choquard/field.hpp"
#include "choquard/riesz.hpp"

namespace choquard {

// A minimizer-candidate of s = inf{‖ρ‖_m^m + ‖ρ‖_1 : ρ ≥ 0, D_α(ρ) = 1}.
struct TFProfile {
  Field rho;
  double m = 2;
  int N = 3;
  double alpha = 2;
  double s_tf = 0;
  double lambda = 0;  // m‖ρ‖_m^m + ‖ρ‖_1 at the last update
  double support_radius = 0;
  int iterations = 0;
};

struct TFOptions {
  double damping = 0.5;
  double tol = 1e-9;
  int max_iters = 5000;
};

// Needs m > 2N/(N+α); throws UnsupportedParameters otherwise, DomainTruncation when the
// support reaches 0.95 R_max.
TFProfile solve_tf(double m, const RieszOperator& op, const TFOptions& opts = {});

// Largest node with ρ > 1e-10·ρ(0).
double support_radius(const Field& rho);

// v_0(x) = m^{1/(q−2)} √ρ(k x), k = m^{2/(α(q−2))}(2N s/(N+α))^{−1/α}, q = 2m.
// Without a target grid the result lives on the source grid scaled by 1/k (exact, no interpolation).
Field tf_groundstate(const TFProfile& profile, double q, const GridPtr<double>& target = nullptr);

// |m‖ρ‖_m^m + ‖ρ‖_1 − s·2N/(N+α)| / s.
double virial_residual(const TFProfile& profile);

// sup |mρ^{m−1} − (λ I_α*ρ − 1)_+| with λ = s·2N/(N+α).
double el_residual(const TFProfile& profile, const RieszOperator& op);

// sup over r < r_max of |v − (I_α*v²)v + v^{q−1}|.
double tf_equation_residual(const Field& v, double q, const RieszOperator& op, double r_max);

// Closed form for N = 3, α = 2, m = 2: ρ_*(r) = sin(kr)/(2kr) on r < π/k with k^5 = 3π²/2,
// the D_2 = 1 member of the sin(kr)/r family, and v_0(r) = √(sin r / r) on r < π.
struct ExplicitGPP {
  Field rho;
  Field v0;
  double s_tf = 0;
  double k = 0;       // family parameter of ρ_*
  double R_rho = 0;   // π/k
  double R_v = 0;     // π
  double lambda = 0;  // 2k², the multiplier in 2ρ = (λ I_2*ρ − 1)_+
};

ExplicitGPP explicit_gpp(const GridPtr<double>& grid);

}  // namespace choquard
