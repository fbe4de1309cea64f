#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "rtbp/manifold.hpp"

using namespace rtbp;

namespace {

const Params prm;
const IntegratorConfig cfg;

const PeriodicOrbit& po_1719() {
  static PeriodicOrbit po = find_resonant_po(-1.719, prm, cfg);
  return po;
}

const ManifoldCurve& wu_plus() {
  static ManifoldCurve c = globalize(po_1719(), ManifoldSide::unstable, +1, prm, cfg);
  return c;
}

double polyline_distance(const ManifoldCurve& c, double x, double px) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < c.samples.size(); ++i) {
    const auto& a = c.samples[i].pt;
    const auto& b = c.samples[i + 1].pt;
    if (c.samples[i].segment_id != c.samples[i + 1].segment_id) continue;
    double dx = b.x - a.x, dp = b.px - a.px;
    double len2 = dx * dx + dp * dp;
    double t = len2 > 0 ? ((x - a.x) * dx + (px - a.px) * dp) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(x - (a.x + t * dx), px - (a.px + t * dp)));
  }
  return best;
}

}  // namespace

TEST_CASE("globalized unstable branch straddles the axis; samples stay on the level set") {
  const ManifoldCurve& c = wu_plus();
  CHECK(c.straddles_axis());
  CHECK(c.N >= 1);
  CHECK(c.samples.size() >= 17);
  // Energy is invariant along every sample's orbit.
  for (const auto& s : c.samples) CHECK(std::abs(s.pt.J - po_1719().J) < 1e-9);
  // Adjacent image gaps honor the refinement threshold inside segments.
  for (std::size_t i = 0; i + 1 < c.samples.size(); ++i) {
    if (c.samples[i].segment_id != c.samples[i + 1].segment_id) continue;
    double gap = std::hypot(c.samples[i + 1].pt.x - c.samples[i].pt.x,
                            c.samples[i + 1].pt.px - c.samples[i].pt.px);
    CHECK(gap < 1e-3);
  }
}

TEST_CASE("fundamental domain consistency: P~(w(xi-)) = w(lambda_u xi-)") {
  const PeriodicOrbit& po = po_1719();
  const double xi_minus = 1e-7;
  SectionPoint a{po.x0 + xi_minus * po.v_u[0], xi_minus * po.v_u[1], po.J, po.sign};
  SectionPoint b{po.x0 + po.lambda_u * xi_minus * po.v_u[0],
                 po.lambda_u * xi_minus * po.v_u[1], po.J, po.sign};
  MapResult r = poincare(a, po.n_cross, prm, cfg);
  CHECK(std::hypot(r.point.x - b.x, r.point.px - b.px) < 1e-8);
}

TEST_CASE("invariance oracle: P~ of a mid-curve sample lands on the next-iterate curve") {
  const PeriodicOrbit& po = po_1719();
  GlobalizeOptions opt;
  opt.force_N = wu_plus().N - 1;
  ManifoldCurve prev = globalize(po, ManifoldSide::unstable, +1, prm, cfg, opt);
  const ManifoldCurve& next = wu_plus();

  const auto& mid = prev.samples[prev.samples.size() / 2];
  MapResult r = poincare(mid.pt, po.n_cross, prm, cfg);
  CHECK(polyline_distance(next, r.point.x, r.point.px) < 1e-6);
}

TEST_CASE("stable curve: reflection of the unstable one, checked against backward growth") {
  const PeriodicOrbit& po = po_1719();
  const ManifoldCurve& cu = wu_plus();
  ManifoldCurve cs = stable_from_unstable(cu);
  CHECK(cs.side == ManifoldSide::stable);

  // Reflecting twice is the identity.
  ManifoldCurve cu2 = stable_from_unstable(cs);
  for (std::size_t i = 0; i < cu.samples.size(); ++i) {
    CHECK(cu2.samples[i].pt.x == cu.samples[i].pt.x);
    CHECK(cu2.samples[i].pt.px == cu.samples[i].pt.px);
  }

  // The eigen-directions are mirror images, so the same half-branch label
  // corresponds to the reflected displacement (up to the solver's sign
  // normalization).
  Vec2 vm(po.v_u[0], -po.v_u[1]);
  int dir_s = vm.dot(po.v_s) > 0 ? +1 : -1;
  GlobalizeOptions opt;
  opt.force_N = cu.N;
  ManifoldCurve bw = globalize(po, ManifoldSide::stable, dir_s, prm, cfg, opt);
  REQUIRE(bw.samples.size() >= 17);
  // Pointwise agreement of the independently grown backward curve with the
  // reflected forward one (compare as point sets via the polyline).
  for (std::size_t i = 0; i < bw.samples.size(); i += std::max<std::size_t>(1, bw.samples.size() / 40))
    CHECK(polyline_distance(cs, bw.samples[i].pt.x, bw.samples[i].pt.px) < 1e-8);
}

TEST_CASE("axis crossings at the slow-stretching end: jitter-merged and reproducible") {
  const ManifoldCurve& c = wu_plus();
  auto coarse = axis_crossing_abscissas(c);
  auto fine = axis_crossings(c, prm, cfg);
  REQUIRE(!fine.empty());
  CHECK(!coarse.empty());
  for (const auto& z : fine) {
    CHECK(z.z.px == 0.0);
    CHECK(std::abs(z.z.x) < 1.5);
  }

  GlobalizeOptions opt;
  opt.mesh_init = 33;
  ManifoldCurve c2 = globalize(po_1719(), ManifoldSide::unstable, +1, prm, cfg, opt);
  auto fine2 = axis_crossings(c2, prm, cfg);
  REQUIRE(fine2.size() == fine.size());
  // Hundreds of iterates amplify roundoff along the curve; the crossing
  // abscissa is still pinned to the few-nanometer scale.
  for (std::size_t i = 0; i < fine.size(); ++i)
    CHECK(std::abs(fine2[i].z.x - fine[i].z.x) < 5e-9);
}

TEST_CASE("mesh doubling leaves the crossing abscissa fixed to 1e-9 (mid-range energy)") {
  auto fam = continue_family(-1.70, -1.55, 4, prm, cfg);
  const PeriodicOrbit& po = fam.back();
  REQUIRE(po.residual < 1e-10);

  GlobalizeOptions opt;
  ManifoldCurve c1 = globalize(po, ManifoldSide::unstable, +1, prm, cfg, opt);
  opt.mesh_init = 33;
  ManifoldCurve c2 = globalize(po, ManifoldSide::unstable, +1, prm, cfg, opt);
  auto f1 = axis_crossings(c1, prm, cfg);
  auto f2 = axis_crossings(c2, prm, cfg);
  REQUIRE(!f1.empty());
  REQUIRE(f1.size() == f2.size());
  for (std::size_t i = 0; i < f1.size(); ++i)
    CHECK(std::abs(f2[i].z.x - f1[i].z.x) < 1e-9);
}

TEST_CASE("unreachable stop predicate errors out at the iterate cap") {
  GlobalizeOptions opt;
  opt.iterate_cap = 3;
  auto never = [](const ManifoldCurve&) { return false; };
  CHECK_THROWS_AS(globalize(po_1719(), ManifoldSide::unstable, +1, prm, cfg, opt, never),
                  NumericalError);
}

TEST_CASE("loop regime at J = -1.456: curve develops a recorded discontinuity") {
  PeriodicOrbit po = find_resonant_po(-1.50, prm, cfg);
  po = find_resonant_po(-1.456, prm, cfg, po.x0 - 0.01);
  CHECK(po.residual < 1e-10);
  ManifoldCurve c = globalize(po, ManifoldSide::unstable, +1, prm, cfg);
  bool flagged = c.n_segments > 1 || !c.warnings.empty();
  for (const auto& s : c.samples) flagged = flagged || s.tangency;
  CHECK(flagged);
}
