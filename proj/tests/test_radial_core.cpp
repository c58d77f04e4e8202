#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "choquard/field.hpp"
#include "choquard/interp.hpp"
#include "choquard/params.hpp"
#include "choquard/quadrature.hpp"

using namespace choquard;
using std::numbers::pi;

namespace {

GridPtr<double> uniform(int N, double R, int n) { return make_grid({N, R, n, Stretch::uniform, 1.0}); }

GridPtr<double> geometric(int N, double R, int n, double ratio) {
  return make_grid({N, R, n, Stretch::geometric, ratio});
}

}  // namespace

TEST_CASE("uniform grid node placement") {
  auto g = uniform(3, 1.0, 101);
  CHECK(g->nodes()(50) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g->nodes()(0) == 0.0);
  CHECK(g->r_max() == 1.0);
}

TEST_CASE("grid rejects bad descriptors") {
  CHECK_THROWS_AS(uniform(3, 1.0, 15), std::invalid_argument);
  CHECK_THROWS_AS(uniform(3, std::nan(""), 64), std::invalid_argument);
  CHECK_THROWS_AS(uniform(3, -1.0, 64), std::invalid_argument);
  CHECK_THROWS_AS(geometric(3, 1.0, 64, 0.9), std::invalid_argument);
}

TEST_CASE("quadrature of f=1 equals R^N/N") {
  for (int N : {3, 4, 5}) {
    auto g = uniform(N, 2.0, 57);
    const double exact = std::pow(2.0, N) / N;
    CHECK(std::abs(g->weights().sum() - exact) / exact < 1e-12);
  }
}

TEST_CASE("quadrature is exact for r^k, k <= 3, on uniform grids") {
  auto g = uniform(3, 1.7, 64);
  for (int k = 0; k <= 3; ++k) {
    auto u = Field::from_function(g, [k](double r) { return std::pow(r, k); });
    const double exact = 4 * pi * std::pow(1.7, k + 3) / (k + 3);
    CHECK(std::abs(integrate(u) - exact) / exact < 1e-12);
  }
}

TEST_CASE("quadrature weights are nonnegative") {
  for (int N : {3, 4, 5, 6, 8}) {
    for (auto g : {uniform(N, 10.0, 16), uniform(N, 10.0, 333), geometric(N, 40.0, 2048, 1.003),
                   geometric(N, 400.0, 1500, 1.006)}) {
      CHECK(g->weights().minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("geometric grid spacing increases monotonically") {
  auto g = geometric(3, 40.0, 2048, 1.003);
  CHECK(g->r_max() == 40.0);
  bool monotone = true;
  for (Eigen::Index i = 2; i < g->size() - 1; ++i) {
    double h0 = g->nodes()(i - 1) - g->nodes()(i - 2);
    double h1 = g->nodes()(i) - g->nodes()(i - 1);
    if (!(h1 > h0)) monotone = false;
  }
  CHECK(monotone);
}

TEST_CASE("integrate examples") {
  SUBCASE("unit ball volume") {
    auto g = uniform(3, 1.0, 64);
    CHECK(integrate(Field::from_function(g, [](double) { return 1.0; })) ==
          doctest::Approx(4 * pi / 3).epsilon(1e-12));
  }
  SUBCASE("Gaussian matches quadrature oracle") {
    // Oracle: adaptive Gauss-Legendre of 4π r² e^{-r²} on [0, 10].
    const double oracle = adaptive_gauss_legendre<double>(
        [](double r) { return 4 * pi * r * r * std::exp(-r * r); }, 0.0, 10.0, 1e-15);
    CHECK(oracle == doctest::Approx(5.568327996831708).epsilon(1e-13));
    auto g = uniform(3, 10.0, 1024);
    auto u = Field::from_function(g, [](double r) { return std::exp(-r * r); });
    CHECK(std::abs(integrate(u) - 5.568327996831708) / 5.568327996831708 < 1e-7);
  }
  SUBCASE("zero field") { CHECK(integrate(Field::zeros(uniform(3, 1.0, 32))) == 0.0); }
}

TEST_CASE("lp_norm examples") {
  auto ball = uniform(3, 1.0, 64);
  auto one = Field::from_function(ball, [](double) { return 1.0; });
  CHECK(lp_norm(one, 2.0) == doctest::Approx(std::sqrt(4 * pi / 3)).epsilon(1e-12));
  auto g = uniform(3, 40.0, 4096);
  auto e = Field::from_function(g, [](double r) { return std::exp(-r); });
  CHECK(std::abs(lp_norm(e, 1.0) - 8 * pi) / (8 * pi) < 1e-7);
  const double s = 3.3;
  auto abs_s = e.with_values(e.values().array().abs().pow(s).matrix());
  CHECK(std::pow(lp_norm(e, s), s) == doctest::Approx(integrate(abs_s)).epsilon(1e-13));
  CHECK_THROWS_AS(lp_norm(e, 0.5), std::invalid_argument);
}

TEST_CASE("dirichlet_energy examples") {
  auto g = uniform(3, 12.0, 2048);
  CHECK(dirichlet_energy(Field::from_function(g, [](double) { return 2.5; })) == doctest::Approx(0.0));
  auto u = Field::from_function(g, [](double r) { return std::exp(-r * r / 2); });
  const double exact = 1.5 * std::pow(pi, 1.5);
  CHECK(exact == doctest::Approx(8.352491995247562).epsilon(1e-13));
  CHECK(std::abs(dirichlet_energy(u) - exact) / exact < 1e-8);
}

TEST_CASE("Emden-Fowler U_* satisfies its Nehari identity (N=4)") {
  const int N = 4;
  auto g = geometric(N, 400.0, 3000, 1.003);
  auto U = Field::from_function(g, [](double r) { return std::sqrt(8.0) / (1 + r * r); });
  const double lhs = dirichlet_energy(U);
  const double rhs = lp_power(U, 4.0);
  CHECK(std::abs(lhs - rhs) / rhs < 5e-3);
}

TEST_CASE("m_quantity and dilation scaling laws") {
  ProblemParams prm;
  prm.q = 3.5;
  auto g = uniform(3, 30.0, 3000);
  CHECK(m_quantity(Field::zeros(g), prm) == 0.0);
  auto u = Field::from_function(g, [](double r) { return std::exp(-r * r); });
  CHECK(m_quantity(u, prm) > 0.0);
  const double a = dirichlet_energy(u), b = lp_power(u, 2.0), c = lp_power(u, prm.q);
  for (double t : {0.6, 1.0, 1.7, 2.5}) {
    auto ut = dilate(u, t);
    CHECK(std::abs(dirichlet_energy(ut) - std::pow(t, 1) * a) / a < 1e-4);
    CHECK(std::abs(lp_power(ut, 2.0) - std::pow(t, 3) * b) / b < 1e-4);
    CHECK(std::abs(lp_power(ut, prm.q) - std::pow(t, 3) * c) / c < 1e-4);
    CHECK(std::abs(integrate(ut) - std::pow(t, 3) * integrate(u)) / integrate(u) < 1e-6);
    const double M = m_quantity(ut, prm);
    CHECK(std::abs(M - (t * a + t * t * t * (b + c))) / M < 1e-4);
  }
}

TEST_CASE("dilate identity and errors") {
  auto g = geometric(3, 20.0, 300, 1.01);
  auto u = Field::from_function(g, [](double r) { return 1.0 / (1 + r * r); });
  auto v = dilate(u, 1.0);
  CHECK((v.values().array() == u.values().array()).all());
  CHECK_THROWS_AS(dilate(u, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dilate(u, -2.0), std::invalid_argument);
  int outside = -1;
  auto w = dilate(u, 2.0, {}, &outside);
  CHECK(outside == 0);
  auto z = dilate(u, 0.5, {}, &outside);
  CHECK(outside > 0);
  CHECK(z[g->size() - 1] == 0.0);
  auto y = dilate(u, 0.5, [](double s) { return 1.0 / (1 + s * s); }, &outside);
  CHECK(y[g->size() - 1] == doctest::Approx(1.0 / (1 + 1600.0)));
}

TEST_CASE("monotone cubic keeps monotone nonnegative data monotone") {
  auto g = uniform(3, 5.0, 40);
  // A steep edge stresses the filter.
  auto u = Field::from_function(g, [](double r) { return r < 2.0 ? 1.0 - 0.1 * r : 0.0; });
  MonotoneCubic<double> f(u);
  double prev = f(0.0);
  for (int i = 1; i <= 5000; ++i) {
    double x = 5.0 * i / 5000.0;
    double y = f(x);
    CHECK(y <= prev + 1e-15);
    CHECK(y >= 0.0);
    prev = y;
  }
}

TEST_CASE("integrate is linear and monotone") {
  auto g = geometric(3, 15.0, 400, 1.005);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd a(g->size()), b(g->size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a(i) = U(rng);
      b(i) = a(i) + U(rng);
    }
    Field fa(g, a), fb(g, b);
    CHECK(integrate(fa) <= integrate(fb));
    const double s = U(rng) * 3 - 1.5;
    Field lin(g, Eigen::VectorXd(s * a + b));
    CHECK(integrate(lin) == doctest::Approx(s * integrate(fa) + integrate(fb)).epsilon(1e-12));
  }
}

TEST_CASE("rearrangement sorts and clips") {
  auto g = uniform(3, 1.0, 16);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(16, -1.0, 2.0);
  auto r = rearrange(Field(g, v));
  CHECK(is_nonincreasing(r));
  CHECK(r.values().minCoeff() == 0.0);
  CHECK(r[0] == 2.0);
}

TEST_CASE("field validation") {
  auto g = uniform(3, 1.0, 16);
  CHECK_THROWS_AS(Field(g, Eigen::VectorXd::Zero(15)), std::invalid_argument);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(16);
  bad(3) = std::nan("");
  CHECK_THROWS_AS(Field(g, bad), std::invalid_argument);
  bad(3) = -1.0;
  CHECK_THROWS_AS(Field(g, bad, true), std::invalid_argument);
}

TEST_CASE("Laplacian stencil accuracy") {
  // Δ e^{-r²} = (4r² − 2N) e^{-r²}; fourth-order stencils.
  for (int N : {3, 5}) {
    auto g = geometric(N, 8.0, 800, 1.002);
    auto u = Field::from_function(g, [](double r) { return std::exp(-r * r); });
    Eigen::VectorXd lap = radial_laplacian(u);
    double err = 0;
    for (Eigen::Index i = 0; i < g->size() - 1; ++i) {
      const double r = g->nodes()(i);
      err = std::max(err, std::abs(lap(i) - (4 * r * r - 2 * N) * std::exp(-r * r)));
    }
    CHECK(err < 1e-6);
  }
}

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  GaussLegendre<double> gl(6);
  CHECK(gl.w.sum() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(gl.integrate([](double x) { return std::pow(x, 10); }, -1.0, 1.0) ==
        doctest::Approx(2.0 / 11).epsilon(1e-14));
  GaussLegendre<long double> gll(5);
  CHECK(static_cast<double>(gll.w.sum()) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("templated grid works in long double") {
  auto g = make_grid<long double>({3, 2.0, 40, Stretch::uniform, 1.0});
  RadialField<long double> u(g, Vector<long double>::Ones(40));
  CHECK(static_cast<double>(integrate(u)) == doctest::Approx(4 * pi * 8 / 3).epsilon(1e-14));
}

TEST_CASE("rational parsing and params validation") {
  auto r = Rational::parse("7/3");
  REQUIRE(r);
  CHECK(r->num() == 7);
  CHECK(r->den() == 3);
  auto d = Rational::parse("2.25");
  REQUIRE(d);
  CHECK(compare(*d, Rational(9, 4)) == 0);
  auto e = Rational::parse("1e-3");
  REQUIRE(e);
  CHECK(compare(*e, Rational(1, 1000)) == 0);
  CHECK(!Rational::parse("abc"));
  CHECK(compare(Rational(20, 7), Rational(2) * Rational(5) * Rational(2) / Rational(7)) == 0);
  ProblemParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha = 3.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.alpha = 2.0;
  p.q = 2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  ProblemParams e5;
  e5.N = 5;
  CHECK(e5.sobolev_exponent() == doctest::Approx(10.0 / 3));
  CHECK(e5.upper_choquard() == doctest::Approx(7.0 / 3));
  CHECK(e5.hls_critical_q() == doctest::Approx(20.0 / 7));
}
