#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rtbp/coords.hpp"
#include "rtbp/dynamics.hpp"

using namespace rtbp;

TEST_CASE("kepler equation: exact anchor points") {
  // u = ell at e = 0 and at ell = 0, pi, 2pi for any e.
  CHECK(solve_kepler(0.7, 0.0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(solve_kepler(PI, 0.3) == doctest::Approx(PI).epsilon(1e-15));
  CHECK(std::abs(solve_kepler(0.0, 0.9)) < 1e-14);
  // Residual below 1e-13 across a (ell, e) sweep, including high e.
  for (int i = 0; i < 200; ++i) {
    double ell = TWO_PI * i / 200.0;
    for (double e : {0.1, 0.5, 0.9, 0.99, 0.999}) {
      double u = solve_kepler(ell, e);
      CHECK(std::abs(u - e * std::sin(u) - ell) < 1e-13);
    }
  }
}

TEST_CASE("kepler equation: continuity in ell across branch cuts") {
  double e = 0.8;
  double prev = solve_kepler(-0.1, e);
  for (double ell = -0.1; ell < 13.0; ell += 1e-3) {
    double u = solve_kepler(ell, e);
    CHECK(u - prev < 0.05);  // monotone, no 2pi jumps
    CHECK(u > prev - 1e-12);
    prev = u;
  }
}

TEST_CASE("kepler derivative matches implicit-function theorem") {
  double e = 0.6, ell = 1.3, h = 1e-7;
  Dual u = solve_kepler(Dual(ell, 1.0), Dual(e));
  double fd = (solve_kepler(ell + h, e) - solve_kepler(ell - h, e)) / (2 * h);
  CHECK(u.d == doctest::Approx(fd).epsilon(1e-7));
  Dual ue = solve_kepler(Dual(ell), Dual(e, 1.0));
  double fde = (solve_kepler(ell, e + h) - solve_kepler(ell, e - h)) / (2 * h);
  CHECK(ue.d == doctest::Approx(fde).epsilon(1e-7));
}

TEST_CASE("delaunay round trip") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    Delaunay d;
    d.L = 0.5 + 1.2 * uni(rng);
    d.ell = TWO_PI * uni(rng);
    double e = 0.05 + 0.9 * uni(rng);
    d.G = d.L * std::sqrt(1.0 - e * e) * (uni(rng) < 0.3 ? -1.0 : 1.0);
    d.g = TWO_PI * uni(rng);
    auto s = delaunay_to_cart(d);
    Delaunay b = cart_to_delaunay(s);
    CHECK(b.L == doctest::Approx(d.L).epsilon(1e-12));
    CHECK(b.G == doctest::Approx(d.G).epsilon(1e-12));
    CHECK(std::abs(wrap_2pi(b.ell - d.ell + PI) - PI) < 1e-10);
    CHECK(std::abs(wrap_2pi(b.g - d.g + PI) - PI) < 1e-10);
  }
}

TEST_CASE("delaunay map reproduces two-body geometry") {
  // Pericenter: ell = 0, g = 0, prograde -> point at (a(1-e), 0) with
  // tangential speed sqrt((1+e)/(a(1-e))).
  double L = 0.8, e = 0.4;
  double a = L * L;
  Delaunay d{L, 0.0, L * std::sqrt(1 - e * e), 0.0};
  auto s = delaunay_to_cart(d);
  CHECK(s[0] == doctest::Approx(a * (1 - e)).epsilon(1e-14));
  CHECK(std::abs(s[1]) < 1e-14);
  CHECK(std::abs(s[2]) < 1e-14);
  CHECK(s[3] == doctest::Approx(std::sqrt((1 + e) / (a * (1 - e)))).epsilon(1e-13));
}

TEST_CASE("two-body energy and angular momentum identities") {
  Delaunay d{0.95, 2.0, -0.6, 4.0};
  auto s = delaunay_to_cart(d);
  double r = std::hypot(s[0], s[1]);
  double E2b = 0.5 * (s[2] * s[2] + s[3] * s[3]) - 1.0 / r;
  CHECK(E2b == doctest::Approx(-1.0 / (2 * d.L * d.L)).epsilon(1e-13));
  CHECK(s[0] * s[3] - s[1] * s[2] == doctest::Approx(d.G).epsilon(1e-13));
}

TEST_CASE("degenerate inputs throw") {
  CHECK_THROWS_AS(cart_to_delaunay(std::array<double, 4>{1.0, 0.0, 0.0, 1.0}),
                  NumericalError);  // circular orbit
  CHECK_THROWS_AS(cart_to_delaunay(std::array<double, 4>{1.0, 0.0, 0.0, 2.0}),
                  NumericalError);  // hyperbolic
  CHECK_THROWS_AS(solve_kepler(1.0, 1.5), NumericalError);
  CHECK_THROWS_AS(ecc_of_energy(-3.0, 0.2), NumericalError);
}

TEST_CASE("eccentricity on the energy level") {
  const double L0 = std::pow(3.0, -1.0 / 3.0);
  CHECK(ecc_of_energy(-1.535, L0) == doctest::Approx(0.700).epsilon(0.01));
  CHECK(ecc_of_energy(-1.551, L0) == doctest::Approx(0.676).epsilon(0.01));
  // Consistency: J = -1/(2L^2) - G with G = L sqrt(1-e^2) (prograde branch
  // of the resonant family has G = -J - 1/(2L^2) > 0).
  double J = -1.6;
  double E = ecc_of_energy(J, L0);
  double G = L0 * std::sqrt(1.0 - E * E);
  CHECK(-1.0 / (2 * L0 * L0) - G == doctest::Approx(J).epsilon(1e-13));
}
