#include "rtbp/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <ostream>
#include <sstream>
#include <utility>

namespace rtbp {

namespace {

struct WorkSample {
  double xi;
  SectionPoint pt;
  bool tangency;
};

struct Grower {
  const PeriodicOrbit& po;
  ManifoldSide side;
  int dir;
  const Params& prm;
  const IntegratorConfig& cfg;

  double t_dir() const { return side == ManifoldSide::unstable ? +1.0 : -1.0; }

  Vec2 eigendir() const {
    Vec2 v = (side == ManifoldSide::unstable) ? po.v_u : po.v_s;
    return double(dir) * v;
  }

  SectionPoint local_point(double xi) const {
    Vec2 v = eigendir();
    SectionPoint p;
    p.x = po.x0 + xi * v(0);
    p.px = xi * v(1);
    p.J = po.J;
    p.sign = po.sign;
    return p;
  }

  // One application of P~ = P^{n_cross} in the branch time direction.
  void step(WorkSample& s) const {
    MapResult r = poincare(s.pt, po.n_cross, prm, cfg, t_dir());
    s.pt = r.point;
    s.tangency = s.tangency || r.tangency;
  }

  WorkSample make(double xi, int N) const {
    WorkSample s{xi, local_point(xi), false};
    for (int n = 0; n < N; ++n) step(s);
    return s;
  }
};

double image_gap(const WorkSample& a, const WorkSample& b) {
  return std::hypot(a.pt.x - b.pt.x, a.pt.px - b.pt.px);
}

// Does a sign change between adjacent mesh samples correspond to a genuine
// axis crossing of the curve? Bisect: a real crossing contracts to a short
// chord, a discontinuity (loop leaving the section) never does.
bool real_crossing_between(const Grower& g, int N, WorkSample lo, WorkSample hi,
                           double gap_tol, double xi_scale) {
  for (int it = 0; it < 60; ++it) {
    if (image_gap(lo, hi) < gap_tol) return true;
    if (hi.xi - lo.xi < 1e-13 * xi_scale) return false;
    WorkSample mid = g.make(0.5 * (lo.xi + hi.xi), N);
    if (mid.pt.px * lo.pt.px < 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return false;
}

bool mesh_has_real_crossing(const Grower& g, int N, const std::list<WorkSample>& mesh,
                            double gap_tol, double xi_scale) {
  for (auto it = mesh.begin(); std::next(it) != mesh.end(); ++it) {
    auto nx = std::next(it);
    if (it->pt.px * nx->pt.px < 0.0 &&
        real_crossing_between(g, N, *it, *nx, gap_tol, xi_scale))
      return true;
  }
  return false;
}

ManifoldCurve assemble(const Grower& g, int N, double xi_minus, double xi_plus,
                       const std::list<WorkSample>& mesh,
                       const std::vector<std::pair<double, double>>& breaks,
                       std::vector<std::string> warnings) {
  ManifoldCurve c;
  c.po = g.po;
  c.side = g.side;
  c.dir = g.dir;
  c.N = N;
  c.xi_minus = xi_minus;
  c.xi_plus = xi_plus;
  c.warnings = std::move(warnings);
  c.samples.reserve(mesh.size());
  int seg = 0;
  const WorkSample* prev = nullptr;
  for (const WorkSample& w : mesh) {
    if (prev) {
      bool broken = false;
      for (const auto& [a, b] : breaks)
        if (prev->xi == a && w.xi == b) broken = true;
      if (broken || prev->tangency != w.tangency) ++seg;
    }
    c.samples.push_back(ManifoldSample{w.xi, w.pt, seg, w.tangency});
    prev = &w;
  }
  c.n_segments = seg + 1;
  return c;
}

}  // namespace

bool ManifoldCurve::straddles_axis() const {
  if (samples.empty()) return false;
  double lo = samples.front().pt.px, hi = lo;
  for (const ManifoldSample& s : samples) {
    lo = std::min(lo, s.pt.px);
    hi = std::max(hi, s.pt.px);
  }
  return lo < 0.0 && hi > 0.0;
}

ManifoldCurve globalize(const PeriodicOrbit& po, ManifoldSide side, int dir,
                        const Params& prm, const IntegratorConfig& cfg,
                        const GlobalizeOptions& opt, const StopPredicate& stop) {
  if (std::abs(dir) != 1) throw NumericalError("globalize: dir must be +-1");
  if (!(po.lambda_u > 1.0)) throw NumericalError("globalize: orbit not hyperbolic");

  Grower g{po, side, dir, prm, cfg};
  const double xi_minus = opt.xi_minus;
  const double xi_plus = po.lambda_u * xi_minus;

  // Geometric initial mesh across the fundamental domain (the map stretches
  // parameters multiplicatively).
  std::list<WorkSample> mesh;
  const int m = std::max(opt.mesh_init, 3);
  for (int j = 0; j < m; ++j) {
    double xi = xi_minus * std::pow(po.lambda_u, double(j) / double(m - 1));
    mesh.push_back(g.make(xi, 0));
  }

  std::vector<std::string> warnings;
  int N = 0;
  auto snapshot = [&](const std::vector<std::pair<double, double>>& breaks) {
    return assemble(g, N, xi_minus, xi_plus, mesh, breaks, warnings);
  };

  while (true) {
    if (opt.force_N >= 0) {
      if (N >= opt.force_N) break;
    } else {
      // Default stop: the curve genuinely crosses the axis (sign changes
      // across discontinuities do not count).
      bool done = stop ? (N >= 1 && stop(snapshot({})))
                       : (N >= 1 && mesh_has_real_crossing(g, N, mesh, opt.gap_tol, xi_plus));
      if (done) break;
      if (N >= opt.iterate_cap)
        throw NumericalError("globalize: stop predicate unmet within iterate cap");
    }
    for (WorkSample& s : mesh) g.step(s);
    ++N;
  }
  if (N > opt.iterate_budget)
    warnings.push_back("iterate count " + std::to_string(N) +
                       " exceeded the default budget of " +
                       std::to_string(opt.iterate_budget));

  // Adaptive refinement: bisect (geometrically in xi) until adjacent images
  // are close; an unresolvable jump is a genuine discontinuity of the curve
  // (a loop of the orbit leaving the section) and becomes a segment break.
  std::vector<std::pair<double, double>> breaks;
  auto it = mesh.begin();
  while (std::next(it) != mesh.end()) {
    auto nx = std::next(it);
    if (image_gap(*it, *nx) < opt.gap_tol) {
      ++it;
      continue;
    }
    if (mesh.size() >= opt.max_points) {
      warnings.push_back("refinement point cap reached; curve left coarse");
      break;
    }
    double xi_mid = std::sqrt(it->xi * nx->xi);
    if (xi_mid <= it->xi || xi_mid >= nx->xi ||
        nx->xi - it->xi < 1e-13 * xi_plus) {
      breaks.emplace_back(it->xi, nx->xi);
      std::ostringstream msg;
      msg << "discontinuity between xi = " << it->xi << " and " << nx->xi;
      warnings.push_back(msg.str());
      ++it;
      continue;
    }
    mesh.insert(nx, g.make(xi_mid, N));
  }

  return assemble(g, N, xi_minus, xi_plus, mesh, breaks, warnings);
}

ManifoldCurve stable_from_unstable(const ManifoldCurve& c) {
  ManifoldCurve r = c;
  r.side = (c.side == ManifoldSide::unstable) ? ManifoldSide::stable
                                              : ManifoldSide::unstable;
  for (ManifoldSample& s : r.samples) s.pt.px = -s.pt.px;
  return r;
}

std::vector<double> axis_crossing_abscissas(const ManifoldCurve& c) {
  std::vector<double> xs;
  for (std::size_t i = 0; i + 1 < c.samples.size(); ++i) {
    const ManifoldSample& a = c.samples[i];
    const ManifoldSample& b = c.samples[i + 1];
    if (a.segment_id != b.segment_id) continue;
    if (a.pt.px == 0.0) {
      xs.push_back(a.pt.x);
      continue;
    }
    if (a.pt.px * b.pt.px < 0.0) {
      double t = -a.pt.px / (b.pt.px - a.pt.px);
      xs.push_back(a.pt.x + t * (b.pt.x - a.pt.x));
    }
  }
  if (!c.samples.empty() && c.samples.back().pt.px == 0.0)
    xs.push_back(c.samples.back().pt.x);
  return xs;
}

namespace {

// Iterate chains amplify roundoff along the unstable direction, so the
// evaluated px at nearby parameters jitters once the bracket is narrow;
// points still lie on the curve to the much tighter transverse accuracy.
// Bisect while the bracket chord keeps shrinking, then intersect the best
// chord with the axis.
std::optional<AxisCrossing> polish_impl(const Grower& g, int N, WorkSample wlo,
                                        WorkSample whi, double px_floor) {
  auto img_dist = [](const WorkSample& u, const WorkSample& v) {
    return std::hypot(u.pt.x - v.pt.x, u.pt.px - v.pt.px);
  };
  double lo = wlo.xi, hi = whi.xi;
  WorkSample blo = wlo, bhi = whi;
  double best = img_dist(blo, bhi);
  int no_improve = 0;
  for (int it = 0; it < 200 && best > 1e-9; ++it) {
    double xm = 0.5 * (lo + hi);
    if (xm <= lo || xm >= hi) break;
    WorkSample wm = g.make(xm, N);
    if (wm.pt.px * wlo.pt.px < 0.0) {
      hi = xm;
      whi = wm;
    } else {
      lo = xm;
      wlo = wm;
    }
    double gap = img_dist(wlo, whi);
    if (gap < best) {
      best = gap;
      blo = wlo;
      bhi = whi;
      no_improve = 0;
    } else if (++no_improve >= 4) {
      break;
    }
  }
  // A bracket whose chord never shrinks is a small discontinuity of the
  // curve, not a crossing. At deep iterates the evaluated px jitters above
  // px_floor even on a genuine crossing, while the x coordinate still
  // converges; accept those on the x chord instead.
  if (best > px_floor &&
      !(std::abs(blo.pt.x - bhi.pt.x) <= 1e-6 && best <= 1e-3))
    return std::nullopt;
  double t = -blo.pt.px / (bhi.pt.px - blo.pt.px);
  AxisCrossing z;
  z.xi = blo.xi + t * (bhi.xi - blo.xi);
  z.z = blo.pt;
  z.z.x = blo.pt.x + t * (bhi.pt.x - blo.pt.x);
  z.z.px = 0.0;
  z.tangency = blo.tangency || bhi.tangency;
  return z;
}

}  // namespace

SectionPoint manifold_seed(const PeriodicOrbit& po, ManifoldSide side, int dir, double xi) {
  Vec2 v = (side == ManifoldSide::unstable) ? po.v_u : po.v_s;
  v *= double(dir);
  SectionPoint p;
  p.x = po.x0 + xi * v(0);
  p.px = xi * v(1);
  p.J = po.J;
  p.sign = po.sign;
  return p;
}

IteratedPoint iterate_manifold_seed(const PeriodicOrbit& po, ManifoldSide side, int dir,
                                    double xi, int N, const Params& prm,
                                    const IntegratorConfig& cfg) {
  Grower g{po, side, dir, prm, cfg};
  WorkSample w = g.make(xi, N);
  return IteratedPoint{w.pt, w.tangency};
}

std::optional<AxisCrossing> polish_axis_bracket(const PeriodicOrbit& po, ManifoldSide side,
                                                int dir, int N, double xi_lo,
                                                const SectionPoint& plo, double xi_hi,
                                                const SectionPoint& phi, const Params& prm,
                                                const IntegratorConfig& cfg, double px_floor) {
  Grower g{po, side, dir, prm, cfg};
  return polish_impl(g, N, WorkSample{xi_lo, plo, false}, WorkSample{xi_hi, phi, false},
                     px_floor);
}

std::vector<AxisCrossing> axis_crossings(const ManifoldCurve& c, const Params& prm,
                                         const IntegratorConfig& cfg, double px_floor) {
  Grower g{c.po, c.side, c.dir, prm, cfg};
  std::vector<AxisCrossing> out;
  for (std::size_t i = 0; i + 1 < c.samples.size(); ++i) {
    const ManifoldSample& a = c.samples[i];
    const ManifoldSample& b = c.samples[i + 1];
    if (a.segment_id != b.segment_id) continue;
    if (!(a.pt.px * b.pt.px < 0.0)) continue;
    auto z = polish_impl(g, c.N, WorkSample{a.xi, a.pt, a.tangency},
                         WorkSample{b.xi, b.pt, b.tangency}, px_floor);
    if (z) out.push_back(*z);
  }
  // Parameter jitter can split one geometric crossing into a cluster of
  // sign changes; merge neighbors that coincide in phase space.
  std::vector<AxisCrossing> merged;
  std::size_t i = 0;
  while (i < out.size()) {
    std::size_t j = i + 1;
    double sx = out[i].z.x, sxi = out[i].xi;
    bool tang = out[i].tangency;
    while (j < out.size() && std::abs(out[j].z.x - out[j - 1].z.x) < 1e-5) {
      sx += out[j].z.x;
      sxi += out[j].xi;
      tang = tang || out[j].tangency;
      ++j;
    }
    AxisCrossing z = out[i];
    z.z.x = sx / double(j - i);
    z.xi = sxi / double(j - i);
    z.tangency = tang;
    merged.push_back(z);
    i = j;
  }
  return merged;
}

void write_csv(const ManifoldCurve& c, std::ostream& os) {
  const char* side = (c.side == ManifoldSide::unstable) ? "u" : "s";
  os << "branch,xi,x,p_x,segment_id\n";
  os.precision(16);
  for (const ManifoldSample& s : c.samples)
    os << side << (c.dir > 0 ? "+" : "-") << ',' << s.xi << ',' << s.pt.x << ','
       << s.pt.px << ',' << s.segment_id << '\n';
}

}  // namespace rtbp
