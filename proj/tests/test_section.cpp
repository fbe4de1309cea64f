#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rtbp/section.hpp"

using namespace rtbp;

TEST_CASE("lift/project round trip on both branches") {
  Params prm;
  for (int sign : {+1, -1}) {
    SectionPoint p{0.38, 0.07, -1.719, sign};
    Vec4 s = section_lift(p, prm);
    CHECK(s[1] == 0.0);
    CHECK(jacobi_energy(s, prm) == doctest::Approx(p.J).epsilon(1e-13));
    SectionPoint q = section_project(s, prm);
    CHECK(q.x == doctest::Approx(p.x).epsilon(1e-14));
    CHECK(q.px == doctest::Approx(p.px).epsilon(1e-14));
    CHECK(q.sign == p.sign);
    CHECK(q.J == doctest::Approx(p.J).epsilon(1e-13));
  }
}

TEST_CASE("lift differential against finite differences") {
  Params prm;
  SectionPoint p{0.38, 0.05, -1.719, +1};
  auto B = section_lift_differential(p, prm);
  const double h = 1e-7;
  for (int j = 0; j < 2; ++j) {
    SectionPoint pp = p, pm = p;
    (j == 0 ? pp.x : pp.px) += h;
    (j == 0 ? pm.x : pm.px) -= h;
    Vec4 col = (section_lift(pp, prm) - section_lift(pm, prm)) / (2 * h);
    for (int i = 0; i < 4; ++i)
      CHECK(B(i, j) == doctest::Approx(col[i]).epsilon(1e-6));
  }
}

TEST_CASE("poincare map preserves energy and lands on the section") {
  Params prm;
  IntegratorConfig cfg;
  SectionPoint p{0.384, 0.0, -1.719, +1};
  auto r1 = poincare(p, 1, prm, cfg);
  CHECK(r1.time > 0.1);
  Vec4 s1 = section_lift(r1.point, prm);
  CHECK(jacobi_energy(s1, prm) == doctest::Approx(p.J).epsilon(1e-11));
  // Forward k=2 then backward k=2 recovers the start.
  auto f2 = poincare(p, 2, prm, cfg, +1.0);
  auto b2 = poincare(f2.point, 2, prm, cfg, -1.0);
  CHECK(b2.point.x == doctest::Approx(p.x).epsilon(1e-9));
  CHECK(b2.point.px == doctest::Approx(p.px).epsilon(1e-8));
}

TEST_CASE("dpoincare matches finite differences of the map") {
  Params prm;
  IntegratorConfig cfg;
  SectionPoint p{0.384, 0.01, -1.719, +1};
  int k = 4;
  auto dm = dpoincare(p, k, prm, cfg);
  CHECK(std::abs(dm.D.determinant() - 1.0) < 1e-6);  // area preserving
  const double h = 1e-7;
  for (int j = 0; j < 2; ++j) {
    SectionPoint pp = p, pm = p;
    (j == 0 ? pp.x : pp.px) += h;
    (j == 0 ? pm.x : pm.px) -= h;
    auto rp = poincare(pp, k, prm, cfg);
    auto rm = poincare(pm, k, prm, cfg);
    Vec2 col((rp.point.x - rm.point.x) / (2 * h), (rp.point.px - rm.point.px) / (2 * h));
    CHECK(dm.D(0, j) == doctest::Approx(col[0]).epsilon(2e-5));
    CHECK(dm.D(1, j) == doctest::Approx(col[1]).epsilon(2e-5));
  }
  // Tangent transport agrees with the assembled differential.
  Vec2 v(0.6, -0.8);
  Vec2 w = transport_tangent(p, v, k, prm, cfg);
  CHECK((w - dm.D * v).norm() < 1e-9 * std::max(1.0, w.norm()));
}

TEST_CASE("composition: D(P^4) = product over single returns") {
  Params prm;
  IntegratorConfig cfg;
  SectionPoint p{0.384, 0.01, -1.719, +1};
  Mat2 Dderiv = dpoincare(p, 4, prm, cfg).D;
  Mat2 acc = Mat2::Identity();
  SectionPoint cur = p;
  for (int i = 0; i < 4; ++i) {
    auto dm = dpoincare(cur, 1, prm, cfg);
    acc = dm.D * acc;
    cur = dm.point;
  }
  CHECK((acc - Dderiv).norm() < 1e-7 * std::max(1.0, Dderiv.norm()));
}

TEST_CASE("dg/dt monitor is near -1 on a resonant-band orbit") {
  Params prm;
  IntegratorConfig cfg;
  // Eccentric state near the resonance: dg/dt = -1 + O(mu).
  SectionPoint p{0.384, 0.0, -1.719, +1};
  Trajectory traj;
  flow(section_lift(p, prm), 12.0, prm, cfg, &traj);
  std::optional<double> flip;
  auto samples = monitor_dgdt(traj, prm, &flip);
  REQUIRE(samples.size() > 100);
  for (const auto& s : samples) {
    CHECK(std::abs(s.dgdt + 1.0) < 200 * prm.mu);
  }
  CHECK(!flip.has_value());
}
