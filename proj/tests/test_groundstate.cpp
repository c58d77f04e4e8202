#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "choquard/errors.hpp"
#include "choquard/functionals.hpp"
#include "choquard/groundstate.hpp"
#include "choquard/riesz.hpp"

using namespace choquard;

namespace {

ProblemParams params(double p, double q, double eps, int N = 3, double alpha = 2.0) {
  ProblemParams P;
  P.N = N;
  P.alpha = alpha;
  P.p = p;
  P.q = q;
  P.eps = eps;
  return P;
}

RieszOperator op_on(const GridSpec& s, double alpha) { return build_default_operator(make_grid<double>(s), alpha); }

bool nonincreasing(const Field& u) {
  for (Eigen::Index i = 1; i < u.size(); ++i)
    if (u[i] > u[i - 1]) return false;
  return true;
}

// Choquard-Pekar v(0) for N = 3, α = 2 by shooting on −Δv = ψv, −Δψ = v² with ψ = φ − 1.
// The system is invariant under (v, ψ) ↦ λ²(v, ψ)(λ·); with v(0) = 1 the shooting parameter
// is ψ(0), and λ² = −1/ψ(∞) maps back to ψ(∞) = −1.
double shooting_v0() {
  using State = std::array<double, 4>;  // v, v', ψ, ψ'
  auto rhs = [](double r, const State& y) {
    return State{y[1], -2.0 / r * y[1] - y[2] * y[0], y[3], -2.0 / r * y[3] - y[0] * y[0]};
  };
  struct Shot {
    bool overshoot;
    double psi_inf;
  };
  auto shoot = [&](double s) {
    const double h = 2e-4;
    double r = 1e-3;
    State y{1 - s * r * r / 6, -s * r / 3, s - r * r / 6, -r / 3};
    double psi_inf = 0;
    while (r < 60) {
      const State k1 = rhs(r, y);
      State t;
      for (int i = 0; i < 4; ++i) t[i] = y[i] + 0.5 * h * k1[i];
      const State k2 = rhs(r + 0.5 * h, t);
      for (int i = 0; i < 4; ++i) t[i] = y[i] + 0.5 * h * k2[i];
      const State k3 = rhs(r + 0.5 * h, t);
      for (int i = 0; i < 4; ++i) t[i] = y[i] + h * k3[i];
      const State k4 = rhs(r + h, t);
      for (int i = 0; i < 4; ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      r += h;
      if (y[0] > 1e-8) psi_inf = y[2] + r * y[3];
      if (y[0] < 0) return Shot{true, psi_inf};
      if (y[1] > 0) return Shot{false, psi_inf};
    }
    return Shot{false, psi_inf};
  };
  double lo = 0.1, hi = 5.0;
  REQUIRE(shoot(hi).overshoot);
  REQUIRE_FALSE(shoot(lo).overshoot);
  Shot last{};
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    last = shoot(mid);
    (last.overshoot ? hi : lo) = mid;
  }
  return -1.0 / last.psi_inf;
}

}  // namespace

TEST_CASE("GPP stationary state converges with all identities") {
  const ProblemParams P = params(2, 4, 1);
  const RieszOperator op = op_on(default_grid_spec(3, 1.0), 2.0);
  const GroundstateResult r = solve(P, op);
  CHECK(r.residuals.nehari < 1e-6);
  CHECK(r.residuals.pohozaev < 1e-6);
  CHECK(r.residuals.strong < 1e-6);
  CHECK(r.field.values().minCoeff() >= 0.0);
  CHECK(nonincreasing(r.field));
  CHECK(r.c_level > 0);
  CHECK(r.energy_monotone);
  CHECK(r.c_level == doctest::Approx(manifold_energy(r.parts, P)).epsilon(1e-6));
}

TEST_CASE("Choquard-Pekar groundstate against a shooting oracle") {
  ProblemParams P = params(2, 4, 1);
  P.local_weight = 0.0;
  const RieszOperator op = op_on(default_grid_spec(3, 1.0), 2.0);
  const GroundstateResult r = solve_choquard(P, op);
  const double oracle = shooting_v0();
  CHECK(std::abs(r.field[0] - oracle) / oracle < 5e-3);
  // Nehari for the pure equation: ‖∇v‖² + ‖v‖² = D_α(v²).
  CHECK(std::abs(r.parts.a + r.parts.b - r.parts.d) / r.parts.d < 1e-6);
}

TEST_CASE("eps = 0 groundstate in the P0 existence region") {
  const ProblemParams P = params(2, 2.2, 0);
  const RieszOperator op = op_on({3, 400.0, 2048, Stretch::geometric, 1.003}, 2.0);
  const GroundstateResult r = solve(P, op);
  CHECK(r.residuals.nehari < 1e-6);
  CHECK(r.residuals.pohozaev < 1e-6);
  CHECK(nonincreasing(r.field));
}

TEST_CASE("small-eps P0-regime solve reaches the plateau tail") {
  // φ > ε out to r ~ 300 here; the tail sits on u^{q−2} = φ − ε.
  const ProblemParams P = params(2, 2.2, 0.01);
  const RieszOperator op = op_on({3, 400.0, 2048, Stretch::geometric, 1.003}, 2.0);
  const GroundstateResult r = solve(P, op);
  CHECK(r.residuals.strong < 1e-10);
  CHECK(r.residuals.nehari < 1e-6);
}

TEST_CASE("levels increase with eps") {
  double prev = 0;
  for (double eps : {0.25, 1.0, 4.0}) {
    const RieszOperator op = op_on(default_grid_spec(3, eps), 2.0);
    const GroundstateResult r = solve(params(2, 4, eps), op);
    CHECK(r.residuals.nehari < 1e-6);
    CHECK(r.residuals.pohozaev < 1e-6);
    CHECK(r.c_level > prev + 1e-8);
    prev = r.c_level;
  }
}

TEST_CASE("exponential tail for p > 2") {
  const RieszOperator op = op_on(default_grid_spec(3, 1.0), 2.0);
  const GroundstateResult r = solve(params(3, 4, 1), op);
  REQUIRE(r.tail.has_value());
  CHECK(r.tail->regime == TailRegime::exponential);
  CHECK(std::abs(r.tail->exponent - 1.0) < 0.05);
}

TEST_CASE("algebraic tail for p < 2, both equations") {
  const RieszOperator op = op_on({3, 1000.0, 2048, Stretch::geometric, 1.004}, 2.0);
  for (double w : {1.0, 0.0}) {
    ProblemParams P = params(1.8, 4, 1);
    P.local_weight = w;
    const GroundstateResult r = w == 0.0 ? solve_choquard(P, op) : solve(P, op);
    REQUIRE(r.tail.has_value());
    CHECK(r.tail->regime == TailRegime::polynomial);
    CHECK(std::abs(r.tail->exponent - 5.0) / 5.0 < 0.05);
    REQUIRE(r.tail->predicted_amplitude.has_value());
    // Plateau (ε^{−1}A_α‖u‖_p^p)^{1/(2−p)}, computed here from the solved field.
    const double target = std::pow(riesz_constant(3, 2.0) * lp_power(r.field, 1.8), 1.0 / 0.2);
    CHECK(*r.tail->predicted_amplitude == doctest::Approx(target).epsilon(1e-10));
    CHECK(std::abs(r.tail->amplitude - target) / target < 0.05);
  }
}

TEST_CASE("tail fit recovers an exact power law") {
  const auto g = make_grid<double>({3, 1000.0, 2048, Stretch::geometric, 1.004});
  // p = 1.5, N − α = 1: predicted power 2, amplitude read off u·r².
  const Field u(g, Field::from_function(g, [](double r) { return r < 1 ? 1.0 : std::pow(r, -2.0); }).values(), true);
  const TailFit t = fit_tail(u, params(1.5, 4, 1), 50.0, 500.0);
  CHECK(t.regime == TailRegime::polynomial);
  CHECK(t.predicted_exponent == doctest::Approx(2.0));
  CHECK(std::abs(t.exponent - 2.0) < 1e-3);
  CHECK(t.amplitude == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(fit_tail(u, params(1.5, 4, 1), 50.0, 50.5), InsufficientTail);
}

TEST_CASE("solver guards and errors") {
  const RieszOperator op = op_on(default_grid_spec(3, 1.0, 512), 2.0);
  ProblemParams low = params(1.5, 4, 1);
  low.local_weight = 0;
  CHECK_THROWS_AS(solve_choquard(low, op), UnsupportedParameters);
  CHECK_THROWS_AS(solve(params(1.2, 3, 1), op), UnsupportedParameters);
  CHECK_THROWS_AS(solve(params(5, 6, 1), op), UnsupportedParameters);

  SolverOptions tiny;
  tiny.max_iters = 1;
  tiny.newton = false;
  try {
    solve(params(2, 4, 1), op, tiny);
    FAIL("expected non-convergence");
  } catch (const NonConvergence& e) {
    CHECK_FALSE(e.history().empty());
    CHECK(e.last_iterate().size() == std::size_t(op.grid().size()));
  }

  SolverOptions file;
  file.seed_profile = SeedProfile::file;
  CHECK_THROWS_AS(solve(params(2, 4, 1), op, file), std::invalid_argument);
  SolverOptions bad;
  bad.tol = 0;
  CHECK_THROWS_AS(solve(params(2, 4, 1), op, bad), std::invalid_argument);
}

TEST_CASE("seeded solve reproduces the unseeded groundstate") {
  const RieszOperator op = op_on(default_grid_spec(3, 1.0), 2.0);
  const GroundstateResult a = solve(params(2, 4, 1), op);
  SolverOptions so;
  so.seed_profile = SeedProfile::file;
  so.seed = a.field;
  const GroundstateResult b = solve(params(2, 4, 1), op, so);
  CHECK((a.field.values() - b.field.values()).cwiseAbs().maxCoeff() < 1e-8 * a.field[0]);
  CHECK(b.c_level == doctest::Approx(a.c_level).epsilon(1e-10));
}

TEST_CASE("solves are deterministic") {
  const RieszOperator op = op_on(default_grid_spec(3, 1.0), 2.0);
  const GroundstateResult a = solve(params(2, 4, 1), op);
  const GroundstateResult b = solve(params(2, 4, 1), op);
  CHECK((a.field.values() - b.field.values()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("fractional alpha via the kernel matrix") {
  const RieszOperator op = op_on(default_grid_spec(3, 1.0, 768), 1.0);
  REQUIRE(op.mode() == RieszMode::kernel_matrix);
  const GroundstateResult r = solve(params(2, 4, 1, 3, 1.0), op);
  CHECK(r.residuals.nehari < 1e-6);
  CHECK(r.residuals.pohozaev < 1e-6);
  CHECK(nonincreasing(r.field));
}
