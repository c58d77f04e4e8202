#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "choquard/errors.hpp"
#include "choquard/riesz.hpp"
#include "choquard/quadrature.hpp"

using namespace choquard;
using std::numbers::pi;

namespace {

GridPtr<double> uniform(int N, double R, int n) { return make_grid({N, R, n, Stretch::uniform, 1.0}); }
GridPtr<double> geometric(int N, double R, int n, double ratio) {
  return make_grid({N, R, n, Stretch::geometric, ratio});
}

// GPP density ρ_λ(r) = λ^{5/2}/(√2 π) sin(λr)/(λr) on r < π/λ.
double rho_gpp(double lam, double r) {
  if (r >= pi / lam) return 0.0;
  const double x = lam * r;
  return std::pow(lam, 2.5) / (std::sqrt(2.0) * pi) * (x == 0 ? 1.0 : std::sin(x) / x);
}

Field random_smooth(const GridPtr<double>& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double c[3], a[3];
  for (int k = 0; k < 3; ++k) {
    c[k] = U(rng) * 2 - 0.5;
    a[k] = 0.3 + 2 * U(rng);
  }
  return Field::from_function(g, [&](double r) {
    double s = 0;
    for (int k = 0; k < 3; ++k) s += c[k] * std::exp(-a[k] * r * r);
    return s;
  });
}

}  // namespace

TEST_CASE("riesz_constant examples") {
  // Oracle: the Γ formula evaluated independently, frozen.
  CHECK(riesz_constant(3, 2.0) == doctest::Approx(1.0 / (4 * pi)).epsilon(1e-14));
  CHECK(riesz_constant(3, 2.0) == doctest::Approx(0.0795774715459477).epsilon(1e-13));
  CHECK(riesz_constant(4, 2.0) == doctest::Approx(1.0 / (4 * pi * pi)).epsilon(1e-14));
  CHECK(riesz_constant(4, 2.0) == doctest::Approx(0.0253302959105844).epsilon(1e-13));
  CHECK_THROWS_AS(riesz_constant(3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(riesz_constant(3, 3.0), std::invalid_argument);
}

TEST_CASE("angular kernel against closed forms and quadrature") {
  // N=3, α=1: average of |e − tω|^{-2} is artanh(t)/t.
  AngularKernel g(3, 1.0);
  for (double t : {0.0, 0.1, 0.5, 0.7071, 0.72, 0.9, 0.99, 0.999999}) {
    const double exact = t == 0 ? 1.0 : std::atanh(t) / t;
    CHECK(std::abs(g(t) - exact) / exact < 1e-9);
  }
  AngularKernel two(5, 2.0);
  CHECK(two(0.3) == 1.0);
  // Series / table switch is continuous and both agree with direct quadrature.
  for (auto [N, a] : {std::pair{3, 0.5}, std::pair{4, 1.0}, std::pair{5, 3.0}, std::pair{4, 1.7}}) {
    AngularKernel k(N, a);
    for (double t : {0.2, 0.7, 0.7072, 0.95, 0.9999}) {
      CHECK(std::abs(k(t) - k.quadrature(t)) / k.quadrature(t) < 1e-9);
    }
  }
}

TEST_CASE("ball potentials by Newton's theorem") {
  for (auto mode : {RieszMode::exact_newton, RieszMode::kernel_matrix}) {
    auto g = uniform(3, 1.0, 257);
    RieszOperator op(g, 2.0, mode);
    auto phi = apply(op, Field::from_function(g, [](double) { return 1.0; }));
    for (Eigen::Index i = 0; i < g->size(); ++i) {
      const double r = g->nodes()(i);
      CHECK(phi[i] == doctest::Approx(0.5 - r * r / 6).epsilon(1e-12));
    }
    CHECK(phi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(phi[g->size() - 1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  // Exterior 1/(3r) with the jump of the indicator inside the grid.
  auto g = uniform(3, 4.0, 1025);
  RieszOperator op(g, 2.0, RieszMode::exact_newton);
  auto phi = apply(op, Field::from_function(g, [](double r) { return r <= 1.0 ? 1.0 : 0.0; }));
  auto ball = Field::from_function(g, [](double r) { return r <= 1.0 ? 1.0 : 0.0; });
  // Outside the support φ = A·mass/r with the grid's own mass; the jump makes that mass O(h) off.
  const double mass = integrate(ball);
  CHECK(std::abs(mass / (4 * pi / 3) - 1.0) < 2 * 4.0 / 1024);
  for (double r : {1.5, 2.0, 3.0, 4.0}) {
    Eigen::Index i = static_cast<Eigen::Index>(std::lround(r / 4.0 * 1024));
    CHECK(phi[i] == doctest::Approx(mass / (4 * pi * r)).epsilon(1e-12));
  }
}

TEST_CASE("GPP density family: potential identity and Riesz energy") {
  auto g = geometric(3, 6.0, 2048, 1.001);
  RieszOperator op(g, 2.0, RieszMode::exact_newton);
  for (double lam : {1.0, std::pow(pi * pi / 2, 0.2), 2.0}) {
    auto rho = Field::from_function(g, [lam](double r) { return rho_gpp(lam, r); });
    auto phi = apply(op, rho);
    double err = 0;
    for (Eigen::Index i = 0; i < g->size(); ++i) {
      const double r = g->nodes()(i);
      if (r >= pi / lam) break;
      const double exact = (rho[i] + std::pow(lam, 2.5) / (std::sqrt(2.0) * pi)) / (lam * lam);
      err = std::max(err, std::abs(phi[i] - exact) / exact);
    }
    CHECK(err < 1e-5);
    // Integrating the potential identity against ρ_λ: (‖ρ‖² + c‖ρ‖_1)/λ² = (λ² + 2λ²)/λ² = 3.
    CHECK(std::abs(dalpha(op, rho) - 3.0) < 1e-4);
  }
}

TEST_CASE("zero density gives zero potential") {
  auto g = uniform(4, 5.0, 64);
  for (auto [a, m] : {std::pair{2.0, RieszMode::exact_newton}, std::pair{1.3, RieszMode::kernel_matrix}}) {
    RieszOperator op(g, a, m);
    auto z = Field::zeros(g);
    CHECK(apply(op, z).values().cwiseAbs().maxCoeff() == 0.0);
    CHECK(dalpha(op, z) == 0.0);
  }
}

TEST_CASE("far-field law of a compactly supported density") {
  for (auto [N, a] : {std::pair{3, 1.0}, std::pair{3, 2.0}, std::pair{4, 0.7}}) {
    auto g = uniform(N, 6.0, 601);
    auto op = build_default_operator(g, a);
    auto rho = Field::from_function(g, [](double r) { return r < 1 ? (1 - r * r) * (1 - r * r) : 0.0; });
    auto phi = apply(op, rho);
    const Eigen::Index i = 500;  // r = 5
    const double r = g->nodes()(i);
    const double ratio = phi[i] * std::pow(r, N - a) / (riesz_constant(N, a) * integrate(rho));
    CHECK(std::abs(ratio - 1.0) < 1e-2);
  }
}

TEST_CASE("exact-newton and kernel-matrix agree at alpha = 2") {
  for (int N : {3, 5}) {
    auto g = geometric(N, 12.0, 600, 1.004);
    RieszOperator ex(g, 2.0, RieszMode::exact_newton), km(g, 2.0, RieszMode::kernel_matrix);
    for (double a : {0.5, 1.0, 3.0}) {
      auto f = Field::from_function(g, [a](double r) { return std::exp(-a * r * r); });
      Eigen::VectorXd p1 = ex.apply(f.values()), p2 = km.apply(f.values());
      CHECK((p1 - p2).cwiseAbs().maxCoeff() / p1.cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("bilinear symmetry of D_alpha on random smooth pairs") {
  std::mt19937_64 rng(11);
  for (auto [N, a] : {std::pair{3, 2.0}, std::pair{5, 2.0}, std::pair{3, 1.0}, std::pair{4, 2.5}}) {
    // The asymmetry is O(h^4) discretization error; exact-newton is cheap enough for a finer grid.
    const int n = a == 2.0 ? 4096 : 2048;
    auto g = geometric(N, 12.0, n, std::pow(1.003, 1023.0 / (n - 1)));
    auto op = build_default_operator(g, a);
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      auto f = random_smooth(g, rng), h = random_smooth(g, rng);
      const double fg = dalpha(op, f, h), gf = dalpha(op, h, f);
      worst = std::max(worst, std::abs(fg - gf) / std::max(std::abs(fg), std::abs(gf)));
    }
    MESSAGE("N=" << N << " alpha=" << a << " worst asymmetry " << worst);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("positivity and kernel nonnegativity") {
  std::mt19937_64 rng(5);
  for (double a : {0.5, 1.0, 2.0, 3.0}) {
    auto g = geometric(4, 10.0, 300, 1.01);
    RieszOperator op(g, a, RieszMode::kernel_matrix);
    CHECK(op.kernel()->minCoeff() >= 0.0);
    for (int trial = 0; trial < 5; ++trial) {
      auto f = random_smooth(g, rng);
      Eigen::VectorXd pos = f.values().cwiseAbs();
      CHECK(op.apply(pos).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("semigroup I_1 * I_1 = I_2 on a Gaussian (N=4)") {
  auto g = geometric(4, 160.0, 1024, 1.007);  // truncation error ~ R^{-2}
  RieszOperator one(g, 1.0, RieszMode::kernel_matrix), two(g, 2.0, RieszMode::exact_newton);
  Eigen::VectorXd f = Field::from_function(g, [](double r) { return std::exp(-r * r); }).values();
  Eigen::VectorXd lhs = one.apply(one.apply(f)), rhs = two.apply(f);
  double err = 0;
  for (Eigen::Index i = 0; i < g->size(); ++i)
    if (g->nodes()(i) <= 3.0) err = std::max(err, std::abs(lhs(i) - rhs(i)) / rhs(i));
  CHECK(err < 1e-3);
}

TEST_CASE("HLS inequality on random smooth fields") {
  // Oracle constant (closed form at the extremal), N=3, α=2, p=2.
  const int N = 3;
  const double a = 2.0, p = 2.0;
  const double A = riesz_constant(N, a);
  const double C = A * std::pow(pi, (N - a) / 2) * std::tgamma(a / 2) / std::tgamma((N + a) / 2) *
                   std::pow(std::tgamma(N / 2.0) / std::tgamma(N), -a / N);
  auto g = geometric(N, 30.0, 800, 1.005);
  RieszOperator op(g, a, RieszMode::exact_newton);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double s = 2.0 * N * p / (N + a);
  for (int trial = 0; trial < 100; ++trial) {
    const double c1 = U(rng), c2 = U(rng), a1 = 0.2 + U(rng), a2 = 0.2 + 3 * U(rng);
    auto u = Field::from_function(g, [&](double r) { return c1 * std::exp(-a1 * r * r) + c2 / (1 + a2 * r * r * r * r); });
    auto up = u.with_values(u.values().array().abs().pow(p).matrix());
    CHECK(dalpha(op, up) <= C * std::pow(lp_norm(u, s), 2 * p));
  }
}

TEST_CASE("operator preconditions and kernel cache") {
  auto g = uniform(3, 5.0, 128);
  CHECK_THROWS_AS(RieszOperator(g, 1.0, RieszMode::exact_newton), std::invalid_argument);
  RieszOptions tiny;
  tiny.memory_cap_bytes = 1000;
  CHECK_THROWS_AS(RieszOperator(g, 1.0, RieszMode::kernel_matrix, tiny), ResourceLimit);
  RieszOperator op(g, 1.0, RieszMode::kernel_matrix);
  auto other = uniform(3, 6.0, 128);
  CHECK_THROWS_AS(apply(op, Field::zeros(other)), std::invalid_argument);

  const auto dir = std::filesystem::temp_directory_path() / "choquard_kernel_cache_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  RieszOptions cached;
  cached.cache_dir = dir.string();
  RieszOperator first(g, 1.0, RieszMode::kernel_matrix, cached);
  CHECK(!first.loaded_from_cache());
  RieszOperator second(g, 1.0, RieszMode::kernel_matrix, cached);
  CHECK(second.loaded_from_cache());
  CHECK((*first.kernel() - *second.kernel()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((*first.kernel() - *op.kernel()).cwiseAbs().maxCoeff() == 0.0);
  const auto path = RieszOperator::cache_path(dir.string(), 3, 1.0, g->hash());
  CHECK(std::filesystem::file_size(path) == 3 * 8 + 128 * 128 * 8);
  // A different grid does not pick up the cached kernel.
  RieszOperator third(uniform(3, 5.5, 128), 1.0, RieszMode::kernel_matrix, cached);
  CHECK(!third.loaded_from_cache());
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel kernel assembly is deterministic") {
  auto g = uniform(3, 5.0, 200);
  RieszOptions par;
  par.jobs = 3;
  RieszOperator a(g, 1.5, RieszMode::kernel_matrix), b(g, 1.5, RieszMode::kernel_matrix, par);
  CHECK((*a.kernel() - *b.kernel()).cwiseAbs().maxCoeff() == 0.0);
}
