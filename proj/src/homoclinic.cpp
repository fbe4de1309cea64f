#include "rtbp/homoclinic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "rtbp/coords.hpp"

namespace rtbp {

namespace {

constexpr double kXiMinus = 1e-7;

double wrap_half_pi(double a) {
  while (a > M_PI / 2) a -= M_PI;
  while (a <= -M_PI / 2) a += M_PI;
  return a;
}

int stable_dir_for(const PeriodicOrbit& pp, int dir_u) {
  const Vec2 mirror(pp.v_u[0], -pp.v_u[1]);
  return mirror.dot(pp.v_s) >= 0 ? dir_u : -dir_u;
}

// One evaluated point of a branch at iterate depth N.
struct BranchPoint {
  double xi = 0.0;
  SectionPoint pt;
  bool tangency = false;
};

BranchPoint eval_branch(const PeriodicOrbit& pp, ManifoldSide side, int dir, double xi,
                        int N, const Params& prm, const IntegratorConfig& cfg) {
  IteratedPoint ip = iterate_manifold_seed(pp, side, dir, xi, N, prm, cfg);
  return {xi, ip.pt, ip.tangency};
}

// Sign-change bracket of px among consecutive mesh points whose chord
// crosses the axis inside the x window.
struct Bracket {
  BranchPoint lo, hi;
  int N = 0;
};

// Polish a sign-change bracket and keep the result only when the located
// crossing lands inside the x window around the predicted position. A
// bracket whose far endpoint lies past a fold of the branch makes the
// bisection bounce between pieces; subdividing isolates the on-piece part.
std::optional<AxisCrossing> try_bracket(const PeriodicOrbit& pp, ManifoldSide side, int dir,
                                        const Bracket& b, double x_pred, double window,
                                        const Params& prm, const IntegratorConfig& cfg,
                                        int depth = 0) {
  auto z = polish_axis_bracket(pp, side, dir, b.N, b.lo.xi, b.lo.pt, b.hi.xi, b.hi.pt,
                               prm, cfg);
  if (z && std::fabs(z->z.x - x_pred) <= window) return z;
  if (depth >= 2) return std::nullopt;

  const int parts = 16;
  std::vector<BranchPoint> sub(parts + 1);
  sub[0] = b.lo;
  sub[parts] = b.hi;
  for (int k = 1; k < parts; ++k) {
    const double xi =
        b.lo.xi * std::pow(b.hi.xi / b.lo.xi, static_cast<double>(k) / parts);
    try {
      sub[k] = eval_branch(pp, side, dir, xi, b.N, prm, cfg);
    } catch (const NumericalError&) {
      sub[k] = sub[k - 1];  // degenerate sub-bracket, skipped by the sign test
    }
  }
  for (int k = 0; k < parts; ++k) {
    if (!(sub[k].pt.px * sub[k + 1].pt.px < 0)) continue;
    if (std::min(std::fabs(sub[k].pt.x - x_pred), std::fabs(sub[k + 1].pt.x - x_pred)) >
        window + 0.05)
      continue;
    if (auto zz = try_bracket(pp, side, dir, {sub[k], sub[k + 1], b.N}, x_pred, window,
                              prm, cfg, depth + 1))
      return zz;
  }
  return std::nullopt;
}

struct Located {
  AxisCrossing crossing;
  int N = 0;
  double xi_lo = 0.0, xi_hi = 0.0;  // mesh bracket around xi of the crossing
};

// Scan mesh images of the fundamental domain [xi_-, lambda*xi_-], lap by
// lap, for the first axis crossing within the window around x_pred.
std::optional<Located> scan_branch(const PeriodicOrbit& pp, ManifoldSide side, int dir,
                                   double x_pred, double window, int n_cap,
                                   const Params& prm, const IntegratorConfig& cfg) {
  const int m = 33;
  std::vector<double> xi(m);
  std::vector<BranchPoint> cur(m);
  for (int j = 0; j < m; ++j) {
    xi[j] = kXiMinus * std::pow(pp.lambda_u, j / (m - 1.0));
    cur[j] = eval_branch(pp, side, dir, xi[j], 0, prm, cfg);
  }
  const double t_dir = side == ManifoldSide::unstable ? +1.0 : -1.0;
  for (int N = 1; N <= n_cap; ++N) {
    for (int j = 0; j < m; ++j) {
      MapResult r = poincare(cur[j].pt, pp.n_cross, prm, cfg, t_dir);
      cur[j].pt = r.point;
      cur[j].tangency = cur[j].tangency || r.tangency;
    }
    for (int j = 0; j + 1 < m; ++j) {
      if (!(cur[j].pt.px * cur[j + 1].pt.px < 0)) continue;
      Bracket b{{xi[j], cur[j].pt, cur[j].tangency},
                {xi[j + 1], cur[j + 1].pt, cur[j + 1].tangency},
                N};
      if (auto z = try_bracket(pp, side, dir, b, x_pred, window, prm, cfg))
        return Located{*z, N, xi[j], xi[j + 1]};
    }
  }
  return std::nullopt;
}

// Continuation: the crossing parameter scales dominantly with the change of
// the multiplier, xi* ~ xi*_prev (lambda_prev / lambda)^N at fixed depth N.
// The prediction drifts by a few tens of percent per step, so a fine mesh is
// laid over a modest factor around it first and widened on a miss until one
// full multiplier of the seed parameter is covered. Brackets are accepted
// for polishing only when both endpoints already sit near x_pred, which
// weeds out chords across discontinuities of the stretched branch image.
std::optional<Located> scan_near(const PeriodicOrbit& pp, ManifoldSide side, int dir,
                                 double ln_s_pred, int N_hint, double x_pred,
                                 double window, const Params& prm,
                                 const IntegratorConfig& cfg) {
  const double slack = window + 0.05;
  struct Level {
    double span;  // scanned slice is [xi_pred / span, xi_pred * span]
    int m;
  };
  // Even point counts keep the mesh off the exact prediction, where the
  // mirror symmetry of the two branches would alias the dual computation.
  const Level levels[] = {{1.06, 64}, {1.6, 192}, {pp.lambda_u, 448}};

  // A candidate right at the prediction ends the search; ones further out
  // (shadowing crossings of a neighboring channel can fall inside the
  // window) are kept and the globally closest is returned only after every
  // depth has been tried. The stable-side dual must rank the exact mirror
  // above exponentially close shadows, so no early acceptance there.
  const double strong = side == ManifoldSide::stable ? 1e-10 : 0.3 * window;
  std::optional<Located> weak;
  auto dev = [&](const Located& l) { return std::fabs(l.crossing.z.x - x_pred); };

  // Polish the most promising sign-change brackets of a sampled slice. The
  // crossing piece of the branch can be narrower than the mesh, so only the
  // nearer endpoint is required to sit close to x_pred.
  auto process = [&](const std::vector<BranchPoint>& pts,
                     int N) -> std::optional<Located> {
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
      if (!(pts[j].pt.px * pts[j + 1].pt.px < 0)) continue;
      const double d = std::min(std::fabs(pts[j].pt.x - x_pred),
                                std::fabs(pts[j + 1].pt.x - x_pred));
      if (d <= slack) cand.emplace_back(d, j);
    }
    std::sort(cand.begin(), cand.end());
    if (cand.size() > 6) cand.resize(6);
    std::optional<Located> best;
    for (auto [d, j] : cand) {
      if (auto z = try_bracket(pp, side, dir, {pts[j], pts[j + 1], N}, x_pred, window,
                               prm, cfg)) {
        Located l{*z, N, pts[j].xi, pts[j + 1].xi};
        if (!best || dev(l) < dev(*best)) best = l;
        if (dev(*best) <= strong) break;
      }
    }
    return best;
  };
  auto absorb = [&](std::optional<Located> l) {
    if (l && (!weak || dev(*l) < dev(*weak))) weak = *l;
    return weak && dev(*weak) <= strong;
  };

  for (int dN : {0, -1, 1}) {
    const int N = N_hint + dN;
    if (N < 1) continue;
    double xi_pred = std::exp(ln_s_pred - N * std::log(pp.lambda_u));
    while (xi_pred > kXiMinus * pp.lambda_u) xi_pred /= pp.lambda_u;
    while (xi_pred < kXiMinus) xi_pred *= pp.lambda_u;
    for (const Level& lv : levels) {
      std::vector<BranchPoint> cur(lv.m);
      bool ok = true;
      for (int j = 0; j < lv.m; ++j) {
        const double xi = xi_pred * std::pow(lv.span, 2.0 * j / (lv.m - 1) - 1.0);
        try {
          cur[j] = eval_branch(pp, side, dir, xi, N, prm, cfg);
        } catch (const NumericalError&) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      if (absorb(process(cur, N))) return weak;
      // A piece hit by a single sample shows no sign change; zoom on the
      // isolated points closest to the prediction.
      std::vector<std::pair<double, int>> iso;
      for (int j = 1; j + 1 < lv.m; ++j) {
        const double d = std::fabs(cur[j].pt.x - x_pred);
        if (d > std::min(window, 0.02)) continue;
        if (cur[j - 1].pt.px * cur[j].pt.px < 0 ||
            cur[j].pt.px * cur[j + 1].pt.px < 0)
          continue;
        iso.emplace_back(d, j);
      }
      std::sort(iso.begin(), iso.end());
      if (iso.size() > 6) iso.resize(6);
      for (auto [d, j] : iso) {
        const int mz = 24;
        std::vector<BranchPoint> fine(mz);
        bool zok = true;
        for (int k = 0; k < mz; ++k) {
          const double xi =
              cur[j - 1].xi * std::pow(cur[j + 1].xi / cur[j - 1].xi, k / (mz - 1.0));
          try {
            fine[k] = eval_branch(pp, side, dir, xi, N, prm, cfg);
          } catch (const NumericalError&) {
            zok = false;
            break;
          }
        }
        if (!zok) continue;
        if (absorb(process(fine, N))) return weak;
      }
    }
  }
  return weak;
}

Vec2 transported_tangent(const PeriodicOrbit& pp, ManifoldSide side, int dir, double xi,
                         int N, const Params& prm, const IntegratorConfig& cfg) {
  const double t_dir = side == ManifoldSide::unstable ? +1.0 : -1.0;
  SectionPoint p = manifold_seed(pp, side, dir, xi);
  Vec2 v = side == ManifoldSide::unstable ? Vec2(dir * pp.v_u) : Vec2(dir * pp.v_s);
  for (int n = 0; n < N; ++n) {
    v = transport_tangent(p, v, pp.n_cross, prm, cfg, t_dir);
    v.normalize();
    p = poincare(p, pp.n_cross, prm, cfg, t_dir).point;
  }
  return v;
}

// Quadratic fit x(px) = c0 + c1 px + c2 px^2 through on-curve samples
// around a crossing; returns the tangent slope dx/dpx at px = 0 and, if
// x0_out is given, the fitted abscissa c0.
double fit_crossing_slope(const std::vector<SectionPoint>& pts, double* x0_out) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (int k = 0; k < n; ++k) {
    A(k, 0) = 1.0;
    A(k, 1) = pts[k].px;
    A(k, 2) = pts[k].px * pts[k].px;
    rhs(k) = pts[k].x;
  }
  Eigen::Vector3d c = A.colPivHouseholderQr().solve(rhs);
  if (x0_out) *x0_out = c(0);
  return c(1);
}

// Collect on-curve samples with |px| <= h around a located crossing. The
// two parameter values where px reaches -h and +h are found by bisection in
// log(xi) against the polished crossing, then the slice between them is
// sampled geometrically.
std::vector<SectionPoint> crossing_samples(const PeriodicOrbit& pp, ManifoldSide side,
                                           int dir, const Located& loc, double h,
                                           const Params& prm, const IntegratorConfig& cfg) {
  auto px_at = [&](double xi) { return eval_branch(pp, side, dir, xi, loc.N, prm, cfg).pt; };
  const SectionPoint at_c = px_at(loc.crossing.xi);

  // Bracket [xi_c, end] contains the level |px| = h on each side as long as
  // the mesh bracket endpoints exceed it; widen towards the mesh edge.
  auto level = [&](double xi_end, const SectionPoint& p_end) {
    double a = loc.crossing.xi, b = xi_end;
    SectionPoint pa = at_c, pb = p_end;
    for (int grow = 0; grow < 6 && std::fabs(pb.px) < h; ++grow) {
      b *= b / a;  // widen outward, keeping the crossing on the a side
      pb = px_at(b);
    }
    if (std::fabs(pb.px) < h)
      throw NumericalError("crossing_samples: bracket does not reach |px| = " +
                           std::to_string(h));
    for (int it = 0; it < 40 && std::fabs(std::fabs(pb.px) - h) > h / 8; ++it) {
      const double m = std::sqrt(a * b);
      SectionPoint pm = px_at(m);
      if (std::fabs(pm.px) < h) {
        a = m;
        pa = pm;
      } else {
        b = m;
        pb = pm;
      }
    }
    return b;
  };
  SectionPoint p_lo = px_at(loc.xi_lo), p_hi = px_at(loc.xi_hi);
  const double xi_a = level(loc.xi_lo, p_lo);
  const double xi_b = level(loc.xi_hi, p_hi);

  std::vector<SectionPoint> inside;
  const int m = 13;
  for (int j = 0; j < m; ++j) {
    const double xi = xi_a * std::pow(xi_b / xi_a, j / (m - 1.0));
    SectionPoint pt = px_at(xi);
    if (std::fabs(pt.px) <= 1.3 * h) inside.push_back(pt);
  }
  if (inside.size() < 5)
    throw NumericalError("crossing_samples: too few points in the |px| <= h slice");
  return inside;
}

const ChannelSpec& spec_for(int i) {
  if (i < 1 || i > 4) throw NumericalError("channel label out of range: " + std::to_string(i));
  return channel_specs()[static_cast<std::size_t>(i - 1)];
}

PeriodicOrbit seed_orbit(const PeriodicOrbit& po, const ChannelSpec& spec, const Params& prm,
                         const IntegratorConfig& cfg) {
  return spec.partner ? partner_axis_point(po, prm, cfg) : po;
}

}  // namespace

const std::array<ChannelSpec, 4>& channel_specs() {
  // Calibrated at J_ref = -1.55. Channels 1 and 4 live on the branches of
  // the half-period axis point, 2 and 3 on those of the primary one; the
  // ordering matches the measured tangency energies of each pair.
  static const std::array<ChannelSpec, 4> specs{{
      {true, +1, -0.175500, -0.77, 1.746229114e-07, 23},
      {false, +1, -0.812782, -1.17, 1.220727142e-07, 22},
      {false, -1, -0.801692, -0.69, 1.779363955e-07, 44},
      {true, -1, -0.175500, -0.77, 1.231417196e-07, 46},
  }};
  return specs;
}

PeriodicOrbit partner_axis_point(const PeriodicOrbit& po, const Params& prm,
                                 const IntegratorConfig& cfg) {
  SectionPoint p0{po.x0, 0.0, po.J, po.sign};
  MapResult half = poincare(p0, po.n_cross / 2, prm, cfg);
  if (std::fabs(half.point.px) > 1e-9)
    throw NumericalError("partner_axis_point: half-period image off the axis, px = " +
                         std::to_string(half.point.px));
  PeriodicOrbit q = po;
  q.x0 = half.point.x;
  q.sign = half.point.sign;
  DMapResult dm = dpoincare(SectionPoint{q.x0, 0.0, q.J, q.sign}, po.n_cross, prm, cfg);
  Splitting sp = hyperbolic_splitting(dm.D);
  q.monodromy = dm.D;
  q.lambda_u = sp.lambda_u;
  q.v_u = sp.v_u;
  q.v_s = sp.v_s;
  return q;
}

double splitting_angle(const Vec2& v_u, const Vec2& v_s) {
  if (v_u.norm() < 1e-12 || v_s.norm() < 1e-12)
    throw NumericalError("splitting_angle: degenerate tangent");
  return wrap_half_pi(std::atan2(v_u[1], v_u[0]) - std::atan2(v_s[1], v_s[0]));
}

HomoclinicChannelRecord find_symmetric_homoclinic(const PeriodicOrbit& po, int i,
                                                  const Params& prm,
                                                  const IntegratorConfig& cfg,
                                                  const HomoclinicChannelRecord* prev,
                                                  const HomoclinicChannelRecord* prev2) {
  const ChannelSpec& spec = spec_for(i);
  const PeriodicOrbit pp = seed_orbit(po, spec, prm, cfg);

  const double base_J = prev ? prev->J : kChannelRefJ;
  const double base_x = prev ? prev->z.x : spec.x_ref;
  const double x_pred = base_x + spec.dxdJ * (po.J - base_J);
  const double window = 0.02 + 0.5 * std::fabs(po.J - base_J);

  auto ln_s = [](const HomoclinicChannelRecord& r) {
    return std::log(r.xi_star) + r.N * std::log(r.seed_lambda);
  };
  // Without history the calibrated reference crossing plays the role of the
  // previous point, so the search never starts blind.
  double ln_s_pred;
  int N_pred;
  if (prev) {
    ln_s_pred = ln_s(*prev);
    if (prev2 && prev->J != prev2->J)
      ln_s_pred += (ln_s(*prev) - ln_s(*prev2)) * (po.J - prev->J) / (prev->J - prev2->J);
    N_pred = prev->N;
  } else {
    ln_s_pred = std::log(spec.xi_ref) + spec.N_ref * std::log(kChannelRefLambda);
    N_pred = spec.N_ref;
  }
  std::optional<Located> loc =
      scan_near(pp, ManifoldSide::unstable, spec.dir, ln_s_pred, N_pred, x_pred, window,
                prm, cfg);
  if (!loc)
    loc = scan_branch(pp, ManifoldSide::unstable, spec.dir, x_pred, window, N_pred + 8,
                      prm, cfg);
  if (!loc)
    throw NumericalError("find_symmetric_homoclinic: channel " + std::to_string(i) +
                         " absent at J = " + std::to_string(po.J));

  HomoclinicChannelRecord rec;
  rec.i = i;
  rec.J = po.J;
  rec.z = loc->crossing.z;
  rec.xi_star = loc->crossing.xi;
  rec.N = loc->N;
  rec.seed_lambda = pp.lambda_u;
  rec.v_u = transported_tangent(pp, ManifoldSide::unstable, spec.dir, rec.xi_star, rec.N,
                                prm, cfg);

  // Independent stable-side computation: same crossing approached backward
  // in time along W^s, which the reversal symmetry carries onto the mirror
  // of the unstable branch.
  const int dir_s = stable_dir_for(pp, spec.dir);
  auto sloc = scan_near(pp, ManifoldSide::stable, dir_s,
                        std::log(rec.xi_star) + rec.N * std::log(pp.lambda_u), rec.N,
                        rec.z.x, 1e-3, prm, cfg);
  if (!sloc)
    sloc = scan_branch(pp, ManifoldSide::stable, dir_s, rec.z.x, 1e-3, rec.N + 5, prm, cfg);
  if (!sloc)
    throw NumericalError("find_symmetric_homoclinic: stable-side crossing not found for "
                         "channel " + std::to_string(i));
  rec.us_discrepancy = std::fabs(sloc->crossing.z.x - rec.z.x);
  rec.v_s = transported_tangent(pp, ManifoldSide::stable, dir_s, sloc->crossing.xi,
                                sloc->N, prm, cfg);
  rec.theta = splitting_angle(rec.v_u, rec.v_s);
  return rec;
}

HomoclinicChannelRecord find_symmetric_homoclinic(double J, int i, const Params& prm,
                                                  const IntegratorConfig& cfg) {
  return find_symmetric_homoclinic(find_resonant_po(J, prm, cfg), i, prm, cfg);
}

double splitting_angle_fd(const PeriodicOrbit& seed, const ChannelSpec& spec,
                          const HomoclinicChannelRecord& rec, const Params& prm,
                          const IntegratorConfig& cfg, double h) {
  const PeriodicOrbit pp = seed_orbit(seed, spec, prm, cfg);
  Located loc;
  loc.crossing.xi = rec.xi_star;
  loc.N = rec.N;
  loc.xi_lo = rec.xi_star / std::pow(pp.lambda_u, 1.0 / 32.0);
  loc.xi_hi = rec.xi_star * std::pow(pp.lambda_u, 1.0 / 32.0);
  auto u_pts = crossing_samples(pp, ManifoldSide::unstable, spec.dir, loc, h, prm, cfg);
  const double cu = fit_crossing_slope(u_pts, nullptr);

  const int dir_s = stable_dir_for(pp, spec.dir);
  auto s_pts = crossing_samples(pp, ManifoldSide::stable, dir_s, loc, h, prm, cfg);
  const double cs = fit_crossing_slope(s_pts, nullptr);
  return splitting_angle(Vec2(cu, 1.0), Vec2(cs, 1.0));
}

std::vector<Tangency> tangency_scan(double J_lo, double J_hi, int n_grid, int i,
                                    const Params& prm, const IntegratorConfig& cfg,
                                    double J_tol) {
  if (n_grid < 2) throw NumericalError("tangency_scan: need at least two grid points");
  const ChannelSpec& spec = spec_for(i);

  struct Node {
    double J;
    PeriodicOrbit po;
    HomoclinicChannelRecord rec;
    double theta;
  };
  auto eval = [&](double J, const Node* p1, const Node* p2) {
    Node n;
    n.J = J;
    n.po = find_resonant_po(J, prm, cfg,
                            p1 ? std::optional<double>(p1->po.x0) : std::nullopt);
    n.rec = find_symmetric_homoclinic(n.po, i, prm, cfg, p1 ? &p1->rec : nullptr,
                                      p2 ? &p2->rec : nullptr);
    n.theta = splitting_angle_fd(n.po, spec, n.rec, prm, cfg);
    return n;
  };

  // The channel geometry is calibrated at kChannelRefJ; walk outward from
  // there in capped steps so each point is continued from its neighbors.
  const Node ref = eval(kChannelRefJ, nullptr, nullptr);
  std::vector<Node> grid(static_cast<std::size_t>(n_grid));
  auto sweep = [&](const std::vector<int>& ids) {
    Node p1 = ref;
    std::optional<Node> p2;
    for (int id : ids) {
      const double J = J_lo + (J_hi - J_lo) * id / (n_grid - 1.0);
      while (std::fabs(J - p1.J) > 0.0045) {
        Node n = eval(p1.J + std::copysign(0.004, J - p1.J), &p1, p2 ? &*p2 : nullptr);
        p2 = p1;
        p1 = n;
      }
      Node n = eval(J, &p1, p2 ? &*p2 : nullptr);
      p2 = p1;
      p1 = n;
      grid[static_cast<std::size_t>(id)] = n;
    }
  };
  std::vector<int> up, down;
  for (int k = 0; k < n_grid; ++k) {
    const double J = J_lo + (J_hi - J_lo) * k / (n_grid - 1.0);
    (J >= kChannelRefJ ? up : down).push_back(k);
  }
  std::sort(down.begin(), down.end(), std::greater<int>());
  sweep(up);
  sweep(down);

  std::vector<Tangency> out;
  for (int k = 0; k + 1 < n_grid; ++k) {
    if (!(grid[k].theta * grid[k + 1].theta < 0)) continue;
    Node a = grid[k], b = grid[k + 1];
    while (b.J - a.J > J_tol) {
      Node m = eval(0.5 * (a.J + b.J), &a, &b);
      if (m.theta * a.theta < 0)
        b = m;
      else
        a = m;
    }
    out.push_back({i, 0.5 * (a.J + b.J), b.J - a.J});
  }
  return out;
}

std::vector<ChannelInterval> channel_intervals(const std::vector<Tangency>& tangencies,
                                               double J_plus) {
  std::array<std::vector<double>, 4> per;
  for (const Tangency& t : tangencies) {
    if (t.channel < 1 || t.channel > 4)
      throw NumericalError("channel_intervals: bad channel label");
    per[static_cast<std::size_t>(t.channel - 1)].push_back(t.J);
  }
  for (auto& v : per) std::sort(v.begin(), v.end());

  // Pair channels with matching tangency sets; each pair contributes the
  // spans between consecutive tangencies and above the last one.
  std::vector<ChannelInterval> out;
  std::array<bool, 4> used{};
  for (int a = 0; a < 4; ++a) {
    if (used[a] || per[a].empty()) continue;
    for (int b = a + 1; b < 4; ++b) {
      if (used[b] || per[b].size() != per[a].size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < per[a].size(); ++k)
        if (std::fabs(per[a][k] - per[b][k]) > 5e-3) match = false;
      if (!match) continue;
      used[a] = used[b] = true;
      for (std::size_t k = 0; k < per[a].size(); ++k) {
        const double lo = 0.5 * (per[a][k] + per[b][k]);
        const double hi =
            k + 1 < per[a].size() ? 0.5 * (per[a][k + 1] + per[b][k + 1]) : J_plus;
        if (hi > lo) out.push_back({lo, hi, {a + 1, b + 1}});
      }
      break;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ChannelInterval& p, const ChannelInterval& q) { return p.J_lo < q.J_lo; });
  return out;
}

std::vector<ChannelInterval> diffusion_intervals(const std::vector<ChannelInterval>& tilde,
                                                 double J_cut) {
  std::vector<ChannelInterval> out;
  for (ChannelInterval c : tilde) {
    c.J_hi = std::min(c.J_hi, J_cut);
    if (c.J_hi > c.J_lo) out.push_back(c);
  }
  return out;
}

HomoclinicBounds homoclinic_bounds(const HomoclinicChannelRecord& rec, const Params& prm,
                                   const IntegratorConfig& cfg, double M0, double tol,
                                   double M_cap) {
  const double L0 = resonant_L();
  const double E0 = ecc_of_energy(rec.J, L0);
  HomoclinicBounds cur{}, last{};
  cur.max_L_dev = cur.max_E11 = cur.max_E2 = 0.0;

  Vec4 y = section_lift(rec.z, prm);
  double t_done = 0.0;
  auto absorb = [&](const Vec4& s) {
    DelaunayT<double> d = cart_to_delaunay(std::array<double, 4>{s[0], s[1], s[2], s[3]});
    const double e = std::sqrt(std::max(0.0, 1.0 - d.G * d.G / (d.L * d.L)));
    const double EJL = ecc_of_energy(rec.J, d.L);
    cur.max_L_dev = std::max(cur.max_L_dev, std::fabs(d.L - L0));
    cur.max_E11 = std::max(cur.max_E11, std::fabs(EJL - E0));
    cur.max_E2 = std::max(cur.max_E2, std::fabs(e - EJL));
  };
  absorb(y);

  double M = M0;
  while (true) {
    Trajectory traj;
    y = flow(y, M - t_done, prm, cfg, &traj);
    for (std::size_t k = 0; k + 1 < traj.nodes.size(); ++k) {
      const double t0 = traj.nodes[k].t, t1 = traj.nodes[k + 1].t;
      absorb(traj.nodes[k + 1].y);
      absorb(traj.eval(t0 + (t1 - t0) / 3));
      absorb(traj.eval(t0 + 2 * (t1 - t0) / 3));
    }
    t_done = M;
    cur.M = M;
    const bool settled = M > M0 && std::fabs(cur.max_L_dev - last.max_L_dev) < tol &&
                         std::fabs(cur.max_E11 - last.max_E11) < tol &&
                         std::fabs(cur.max_E2 - last.max_E2) < tol;
    if (settled || M >= M_cap) break;
    last = cur;
    M = std::min(2 * M, M_cap);
  }
  return cur;
}

void write_channels_csv(const std::vector<HomoclinicChannelRecord>& recs, std::ostream& os) {
  os << "J,i,x_z,theta_i,us_discrepancy\n";
  for (const auto& r : recs) {
    std::ostringstream line;
    line.precision(16);
    line << r.J << ',' << r.i << ',' << r.z.x << ',' << r.theta << ',' << r.us_discrepancy
         << '\n';
    os << line.str();
  }
}

void write_bounds_csv(
    const std::vector<std::pair<HomoclinicChannelRecord, HomoclinicBounds>>& rows,
    std::ostream& os) {
  os << "J,i,max_L_dev,max_E11,max_E2\n";
  for (const auto& [r, b] : rows) {
    std::ostringstream line;
    line.precision(16);
    line << r.J << ',' << r.i << ',' << b.max_L_dev << ',' << b.max_E11 << ',' << b.max_E2
         << '\n';
    os << line.str();
  }
}

void write_tangencies_json(const std::vector<Tangency>& tangencies, std::ostream& os) {
  os << "[\n";
  for (std::size_t k = 0; k < tangencies.size(); ++k) {
    std::ostringstream line;
    line.precision(16);
    line << "  {\"channel\": " << tangencies[k].channel
         << ", \"J_tangency\": " << tangencies[k].J
         << ", \"bracket_width\": " << tangencies[k].bracket_width << "}"
         << (k + 1 < tangencies.size() ? ",\n" : "\n");
    os << line.str();
  }
  os << "]\n";
}

}  // namespace rtbp
