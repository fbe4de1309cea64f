#include "rtbp/porbit.hpp"

#include <cmath>

#include "rtbp/coords.hpp"

namespace rtbp {

namespace {

// The symmetric half-period return among the crossings of a short forward
// run: the {y=0} crossing closest to px = 0 inside t in (2, 4.4) (the
// rotating-frame period stays within O(mu) of 2*pi along the family).
struct ReturnPick {
  int k = -1;      // crossing index (1-based)
  double t = 0.0;
  double px = 0.0;
};

ReturnPick pick_half_return(const SectionPoint& p, const Params& prm,
                            const IntegratorConfig& cfg) {
  Trajectory traj;
  flow(section_lift(p, prm), 4.8, prm, cfg, &traj);
  auto cand = approx_crossings(traj, CrossingSpec{});
  ReturnPick best;
  double best_px = 1e30;
  for (std::size_t j = 0; j < cand.size(); ++j) {
    if (cand[j].t < 2.0 || cand[j].t > 4.4) continue;
    double apx = std::abs(cand[j].y[2]);
    if (apx < best_px) {
      best_px = apx;
      best = ReturnPick{static_cast<int>(j) + 1, cand[j].t, cand[j].y[2]};
    }
  }
  if (best.k < 0)
    throw NumericalError("find_resonant_po: no symmetric return candidate");
  return best;
}

PeriodicOrbit newton_solve(double x0, double J, const Params& prm,
                           const IntegratorConfig& cfg) {
  // Determine the py branch from the full state of the two-body seed.
  SectionPoint p;
  p.x = x0;
  p.px = 0.0;
  p.J = J;
  p.sign = +1;
  {
    // Choose the sign that solves the quadratic consistently: both branches
    // exist; the physical resonant orbit is selected by the caller's seed.
    // Pick the branch closer to the two-body py for this x0.
    double L0 = resonant_L();
    double e = ecc_of_energy(J, L0);
    double a = L0 * L0;
    double py2b;
    if (x0 > 0)  // pericenter side, prograde
      py2b = std::sqrt((1 + e) / (a * (1 - e)));
    else  // apocenter side
      py2b = -std::sqrt((1 - e) / (a * (1 + e)));
    SectionPoint pp = p, pm = p;
    pp.sign = +1;
    pm.sign = -1;
    double dp = 1e30, dm = 1e30;
    try { dp = std::abs(section_lift(pp, prm)[3] - py2b); } catch (...) {}
    try { dm = std::abs(section_lift(pm, prm)[3] - py2b); } catch (...) {}
    p.sign = (dp <= dm) ? +1 : -1;
  }

  double half_t = 0.0, resid = 0.0;
  int k_half = 0;
  for (int it = 0;; ++it) {
    if (it > 30) throw NumericalError("find_resonant_po: Newton did not converge");
    ReturnPick rp = pick_half_return(p, prm, cfg);
    auto dm = dpoincare(p, rp.k, prm, cfg);
    resid = dm.point.px;
    half_t = dm.time;
    k_half = rp.k;
    if (std::abs(resid) <= 1e-12) break;
    double dF = dm.D(1, 0);  // d(px at return)/d(x0) along {px0 = 0}
    double step = -resid / dF;
    if (std::abs(step) > 0.02) step = (step > 0 ? 0.02 : -0.02);
    p.x += step;
    if (std::abs(step) < 1e-15 && std::abs(resid) > 1e-10)
      throw NumericalError("find_resonant_po: stalled, residual=" + std::to_string(resid));
  }

  PeriodicOrbit po;
  po.J = J;
  po.x0 = p.x;
  po.sign = p.sign;
  po.py0 = section_lift(p, prm)[3];
  po.period = 2.0 * half_t;
  po.residual = std::abs(resid);

  // Crossings per period and the L-deviation from one full revolution.
  Trajectory traj;
  flow(section_lift(p, prm), po.period + 0.4, prm, cfg, &traj);
  auto cand = approx_crossings(traj, CrossingSpec{});
  int n = 0;
  for (const auto& c : cand)
    if (c.t <= po.period + 1e-6) ++n;
  po.n_cross = n;
  double L0 = resonant_L(), dev = 0.0;
  for (const auto& nd : traj.nodes) {
    if (nd.t > po.period) break;
    dev = std::max(dev, std::abs(osculating_L(nd.y) - L0));
  }
  po.max_L_dev = dev;
  (void)k_half;

  auto dmono = dpoincare(p, po.n_cross, prm, cfg);
  po.monodromy = dmono.D;
  Splitting sp = hyperbolic_splitting(po.monodromy);
  po.lambda_u = sp.lambda_u;
  po.v_u = sp.v_u;
  po.v_s = sp.v_s;
  return po;
}

}  // namespace

Splitting hyperbolic_splitting(const Mat2& D) {
  double tr = D.trace(), det = D.determinant();
  if (std::abs(det - 1.0) > 1e-6)
    throw NumericalError("hyperbolic_splitting: determinant " + std::to_string(det));
  double disc = tr * tr - 4.0 * det;
  if (disc <= 0)
    throw NumericalError("hyperbolic_splitting: elliptic return map, trace=" +
                         std::to_string(tr));
  double s = std::sqrt(disc);
  double l1 = 0.5 * (tr + s), l2 = 0.5 * (tr - s);
  Splitting out;
  out.lambda_u = (std::abs(l1) > std::abs(l2)) ? l1 : l2;
  out.lambda_s = (std::abs(l1) > std::abs(l2)) ? l2 : l1;
  auto eigvec = [&](double lam) {
    // (D - lam I) v = 0
    Vec2 r1(D(0, 0) - lam, D(0, 1));
    Vec2 r2(D(1, 0), D(1, 1) - lam);
    Vec2 v = (r1.norm() > r2.norm()) ? Vec2(-r1[1], r1[0]) : Vec2(-r2[1], r2[0]);
    v.normalize();
    if (v[0] < 0 || (v[0] == 0 && v[1] < 0)) v = -v;
    return v;
  };
  out.v_u = eigvec(out.lambda_u);
  out.v_s = eigvec(out.lambda_s);
  return out;
}

PeriodicOrbit find_resonant_po(double J, const Params& prm, const IntegratorConfig& cfg,
                               std::optional<double> x0_guess) {
  const double L0 = resonant_L();
  const double a = L0 * L0;
  const double e = ecc_of_energy(J, L0);
  std::vector<double> seeds;
  if (x0_guess) seeds.push_back(*x0_guess);
  seeds.push_back(a * (1.0 - e));   // pericenter on the positive axis
  seeds.push_back(-a * (1.0 + e));  // apocenter on the negative axis
  std::string last_err;
  for (double s : seeds) {
    try {
      PeriodicOrbit po = newton_solve(s, J, prm, cfg);
      if (po.lambda_u > 1.0) return po;
      last_err = "converged to a non-hyperbolic orbit";
    } catch (const std::exception& ex) {
      last_err = ex.what();
    }
  }
  throw NumericalError("find_resonant_po(J=" + std::to_string(J) + "): " + last_err);
}

std::vector<PeriodicOrbit> continue_family(double J_from, double J_to, int n_points,
                                           const Params& prm, const IntegratorConfig& cfg) {
  std::vector<PeriodicOrbit> fam;
  fam.reserve(n_points);
  const double a = resonant_L() * resonant_L();
  // Track the offset of the converged orbit from its two-body seed: the
  // offset varies slowly along the family while the seed itself moves fast.
  auto seed_of = [&](double J, double x_prev) {
    double e = ecc_of_energy(J, resonant_L());
    return (x_prev > 0) ? a * (1.0 - e) : -a * (1.0 + e);
  };
  std::optional<double> guess;
  double prev_offset = 0.0;
  bool have_prev = false;
  for (int i = 0; i < n_points; ++i) {
    double J = J_from + (J_to - J_from) * (n_points == 1 ? 0.0 : double(i) / (n_points - 1));
    if (have_prev) guess = seed_of(J, *guess) + prev_offset;
    PeriodicOrbit po = find_resonant_po(J, prm, cfg, guess);
    guess = po.x0;
    prev_offset = po.x0 - seed_of(J, po.x0);
    have_prev = true;
    fam.push_back(po);
  }
  return fam;
}

}  // namespace rtbp
