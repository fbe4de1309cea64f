#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rtbp/dynamics.hpp"

using namespace rtbp;

namespace {
Vec4 sample_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (;;) {
    Vec4 s(1.5 * uni(rng), 1.5 * uni(rng), uni(rng), uni(rng));
    double r1 = std::hypot(s[0] - 1.0, s[1]);
    double r2 = std::hypot(s[0], s[1]);
    if (r1 > 0.3 && r2 > 0.3) return s;
  }
}
}  // namespace

TEST_CASE("hamiltonian anchor: circular resonant seed at mu = 0") {
  Params p;
  p.mu = 0.0;
  CHECK(jacobi_energy(Vec4(1, 0, 0, 1), p) == doctest::Approx(-1.5).epsilon(1e-15));
  // And (1,0,0,1) is then a relative equilibrium.
  CHECK(vector_field(Vec4(1, 0, 0, 1), p).norm() < 1e-15);
}

TEST_CASE("vector field is the hamiltonian field of J") {
  Params p;
  std::mt19937_64 rng(11);
  const double h = 1e-6;
  for (int k = 0; k < 50; ++k) {
    Vec4 s = sample_state(rng);
    Vec4 f = vector_field(s, p);
    // dJ/dt along the field vanishes; gradient by central differences.
    Vec4 grad;
    for (int i = 0; i < 4; ++i) {
      Vec4 sp = s, sm = s;
      sp[i] += h;
      sm[i] -= h;
      grad[i] = (jacobi_energy(sp, p) - jacobi_energy(sm, p)) / (2 * h);
    }
    CHECK(f[0] == doctest::Approx(grad[2]).epsilon(1e-7));
    CHECK(f[1] == doctest::Approx(grad[3]).epsilon(1e-7));
    CHECK(f[2] == doctest::Approx(-grad[0]).epsilon(1e-7));
    CHECK(f[3] == doctest::Approx(-grad[1]).epsilon(1e-7));
  }
}

TEST_CASE("field jacobian matches finite differences") {
  Params p;
  std::mt19937_64 rng(13);
  const double h = 1e-6;
  for (int k = 0; k < 20; ++k) {
    Vec4 s = sample_state(rng);
    Mat4 A = field_jacobian(s, p);
    for (int j = 0; j < 4; ++j) {
      Vec4 sp = s, sm = s;
      sp[j] += h;
      sm[j] -= h;
      Vec4 col = (vector_field(sp, p) - vector_field(sm, p)) / (2 * h);
      for (int i = 0; i < 4; ++i)
        CHECK(A(i, j) == doctest::Approx(col[i]).epsilon(5e-6));
    }
  }
}

TEST_CASE("reversal symmetry conjugates the flow") {
  Params p;
  std::mt19937_64 rng(17);
  for (int k = 0; k < 20; ++k) {
    Vec4 s = sample_state(rng);
    Vec4 f = vector_field(s, p);
    Vec4 fr = vector_field(reflect(s), p);
    // f(R s) = -R f(s)
    Vec4 want = -reflect(f);
    CHECK((fr - want).norm() < 1e-14);
  }
}

TEST_CASE("dG of the circular-problem perturbation: dual vs central difference") {
  Params p;
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    Delaunay d;
    d.L = std::pow(3.0, -1.0 / 3.0) * (0.95 + 0.1 * uni(rng));
    d.ell = TWO_PI * uni(rng);
    double e = 0.3 + 0.6 * uni(rng);
    d.G = d.L * std::sqrt(1 - e * e);
    d.g = TWO_PI * uni(rng);
    double a = dG_delta_h_circ(d, p);
    double b = dG_delta_h_circ_fd(d, p);
    CHECK(a == doctest::Approx(b).epsilon(1e-5));
  }
}

TEST_CASE("perturbation identity: mu*DeltaH_circ = J + 1/(2L^2) + G is O(mu)") {
  Params p;
  Delaunay d{std::pow(3.0, -1.0 / 3.0), 1.0, 0.5, 2.0};
  auto s = delaunay_to_cart(d);
  double dh = (jacobi_energy(s, p) + 1.0 / (2 * d.L * d.L) + d.G) / p.mu;
  CHECK(std::abs(dh) < 50.0);  // O(1) after dividing by mu
  // At mu = 0 the identity is exact.
  Params p0;
  p0.mu = 0.0;
  CHECK(std::abs(jacobi_energy(s, p0) + 1.0 / (2 * d.L * d.L) + d.G) < 1e-13);
}

TEST_CASE("elliptic hamiltonian reduces to the circular one at e0 = 0") {
  Params p;
  Vec4 s(0.4, 0.3, -0.2, 1.1);
  for (double t : {0.0, 1.3, 4.0}) {
    double hc = jacobi_energy(s, p);
    // At e0=0 the primaries stay at their circular spots for all t.
    CHECK(elliptic_hamiltonian(s, t, 0.0, p) == doctest::Approx(hc).epsilon(1e-14));
  }
}

TEST_CASE("first-order elliptic perturbation has a pure e^{it} harmonic") {
  Params p;
  Delaunay d{std::pow(3.0, -1.0 / 3.0), 0.7, 0.45, 1.9};
  auto c = ell_fourier_coeffs(d, p, 2, 64);
  // k = 0, +-2 vanish to high accuracy; k = +1 and -1 = conj pair carry it.
  CHECK(std::abs(c[2]) < 1e-8);              // k = 0
  CHECK(std::abs(c[0]) < 1e-8);              // k = -2
  CHECK(std::abs(c[4]) < 1e-8);              // k = +2
  CHECK(std::abs(c[3]) > 1e-4);              // k = +1 nontrivial
  CHECK(std::abs(c[3] - std::conj(c[1])) < 1e-10);  // real signal
  CHECK(delta_h_ell_harmonic(d, p) == c[3]);
}

TEST_CASE("node-count robustness of the harmonic") {
  Params p;
  Delaunay d{std::pow(3.0, -1.0 / 3.0), 2.2, 0.4, 0.6};
  auto c64 = ell_fourier_coeffs(d, p, 1, 64);
  auto c128 = ell_fourier_coeffs(d, p, 1, 128);
  CHECK(std::abs(c64[2] - c128[2]) < 5e-9);
}
