#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rtbp/coords.hpp"
#include "rtbp/porbit.hpp"

using namespace rtbp;

TEST_CASE("resonant orbit at J = -1.719: closure, symmetry, hyperbolicity") {
  Params prm;
  IntegratorConfig cfg;
  PeriodicOrbit po = find_resonant_po(-1.719, prm, cfg);

  CHECK(po.residual < 1e-11);
  // Period within O(mu) of 2*pi (twist band of the resonance).
  CHECK(std::abs(po.period - TWO_PI) < 20 * prm.mu);
  // Orbit closes after one period.
  Vec4 s0 = section_lift(SectionPoint{po.x0, 0.0, po.J, po.sign}, prm);
  Vec4 s1 = flow(s0, po.period, prm, cfg);
  CHECK((s1 - s0).norm() < 1e-9);
  // R-symmetric: the starting point is on the symmetry axis.
  CHECK(std::abs(s0[2]) < 1e-14);
  // Hyperbolic with reciprocal multipliers.
  CHECK(po.lambda_u > 1.0);
  CHECK(std::abs(po.monodromy.determinant() - 1.0) < 1e-6);
  // Eigenvector symmetry: v_s parallel to (v_u mirrored in px).
  Vec2 vm(po.v_u[0], -po.v_u[1]);
  CHECK(std::abs(std::abs(vm.dot(po.v_s)) - 1.0) < 1e-8);
  // Stays L-close to the resonance.
  CHECK(po.max_L_dev < 0.05);
  // The osculating eccentricity at the symmetric point matches E(J, L0).
  double e_lvl = ecc_of_energy(po.J, resonant_L());
  auto d = cart_to_delaunay(std::array<double, 4>{s0[0], s0[1], s0[2], s0[3]});
  double e_osc = std::sqrt(1.0 - d.G * d.G / (d.L * d.L));
  CHECK(e_osc == doctest::Approx(e_lvl).epsilon(0.02));
}

TEST_CASE("family continuation across the working range") {
  Params prm;
  IntegratorConfig cfg;
  auto fam = continue_family(-1.72, -1.40, 9, prm, cfg);
  REQUIRE(fam.size() == 9);
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const auto& po = fam[i];
    CHECK(po.residual < 1e-11);
    CHECK(po.lambda_u > 1.0);
    CHECK(std::abs(po.period - TWO_PI) < 20 * prm.mu);
    CHECK(po.max_L_dev < 0.08);
    // x0 tracks the two-body pericenter a(1-E(J,L0)) along the family.
    double rp = resonant_L() * resonant_L() * (1.0 - ecc_of_energy(po.J, resonant_L()));
    CHECK(std::abs(po.x0 - rp) < 0.02);
  }
  // Multiplier grows with J (splitting strengthens toward higher energies).
  CHECK(fam.back().lambda_u > fam.front().lambda_u);
}

TEST_CASE("monodromy order matches the crossing count") {
  Params prm;
  IntegratorConfig cfg;
  PeriodicOrbit po = find_resonant_po(-1.719, prm, cfg);
  CHECK((po.n_cross == 4 || po.n_cross == 6));
  // P^n really fixes the point.
  SectionPoint p{po.x0, 0.0, po.J, po.sign};
  auto r = poincare(p, po.n_cross, prm, cfg);
  CHECK(r.point.x == doctest::Approx(po.x0).epsilon(1e-9));
  CHECK(std::abs(r.point.px) < 1e-9);
  CHECK(r.time == doctest::Approx(po.period).epsilon(1e-9));
}

TEST_CASE("splitting of an explicit 2x2 matrix") {
  Mat2 D;
  D << 2.0, 1.0, 1.0, 1.0;  // trace 3, det 1: golden-ratio multipliers
  auto sp = hyperbolic_splitting(D);
  double phi = 0.5 * (3.0 + std::sqrt(5.0));
  CHECK(sp.lambda_u == doctest::Approx(phi).epsilon(1e-14));
  CHECK(sp.lambda_s == doctest::Approx(1.0 / phi).epsilon(1e-12));
  CHECK((D * sp.v_u - sp.lambda_u * sp.v_u).norm() < 1e-13);
  CHECK((D * sp.v_s - sp.lambda_s * sp.v_s).norm() < 1e-13);
  Mat2 E;
  E << 0.0, 1.0, -1.0, 0.0;  // elliptic
  CHECK_THROWS_AS(hyperbolic_splitting(E), NumericalError);
}
