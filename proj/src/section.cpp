#include "rtbp/section.hpp"

#include <cmath>

#include "rtbp/coords.hpp"

namespace rtbp {

namespace {
// C(x, px) = px^2/2 - mu/r1 - (1-mu)/r2 - J on {y = 0}; py solves
// py^2/2 - x py + C = 0.
double section_c(double x, double px, double J, const Params& prm) {
  double r1 = std::abs(x - (1.0 - prm.mu));
  double r2 = std::abs(x + prm.mu);
  if (r1 < 1e-12 || r2 < 1e-12) throw CollisionError("section: on a primary");
  return 0.5 * px * px - prm.mu / r1 - (1.0 - prm.mu) / r2 - J;
}

double section_cx(double x, const Params& prm) {
  double d1 = x - (1.0 - prm.mu), d2 = x + prm.mu;
  double r1 = std::abs(d1), r2 = std::abs(d2);
  auto sgn = [](double v) { return v >= 0 ? 1.0 : -1.0; };
  return prm.mu * sgn(d1) / (r1 * r1) + (1.0 - prm.mu) * sgn(d2) / (r2 * r2);
}
}  // namespace

Vec4 section_lift(const SectionPoint& p, const Params& prm) {
  double C = section_c(p.x, p.px, p.J, prm);
  double disc = p.x * p.x - 2.0 * C;
  if (disc < 0)
    throw NumericalError("section_lift: negative discriminant " + std::to_string(disc));
  double py = p.x + p.sign * std::sqrt(disc);
  return Vec4(p.x, 0.0, p.px, py);
}

SectionPoint section_project(const Vec4& s, const Params& prm) {
  if (std::abs(s[1]) > 1e-9)
    throw NumericalError("section_project: point not on {y = 0}");
  SectionPoint p;
  p.x = s[0];
  p.px = s[2];
  p.J = jacobi_energy(s, prm);
  p.sign = (s[3] >= s[0]) ? +1 : -1;
  return p;
}

Eigen::Matrix<double, 4, 2> section_lift_differential(const SectionPoint& p,
                                                      const Params& prm) {
  Vec4 s = section_lift(p, prm);
  double py = s[3];
  double denom = py - p.x;
  if (std::abs(denom) < 1e-10)
    throw NumericalError("section_lift_differential: branch fold (py = x)");
  double dpy_dx = (py - section_cx(p.x, prm)) / denom;
  double dpy_dpx = -p.px / denom;
  Eigen::Matrix<double, 4, 2> B;
  B << 1, 0,
       0, 0,
       0, 1,
       dpy_dx, dpy_dpx;
  return B;
}

MapResult poincare(const SectionPoint& p, int k, const Params& prm,
                   const IntegratorConfig& cfg, double t_dir) {
  Vec4 s = section_lift(p, prm);
  Trajectory traj;
  CrossingSpec spec;  // y = 0, both directions
  auto hit = flow_to_crossing(s, spec, k, t_dir, prm, cfg, &traj);
  if (!hit)
    throw NumericalError("poincare: ran out of time before the requested crossing");
  bool tangency = false;
  for (const auto& c : approx_crossings(traj, spec))
    tangency = tangency || c.tangential;
  MapResult res;
  res.point = section_project(hit->y, prm);
  res.point.J = p.J;  // preserved exactly; avoid accumulating roundoff
  res.time = hit->t;
  res.tangency = tangency;
  return res;
}

namespace {
struct VarReturn {
  Vec4 z;        // state at the k-th crossing
  double t;      // crossing time
  Mat4 Phi;      // corrected monodromy: includes the section time shift
};

VarReturn variational_return(const SectionPoint& p, int k, const Params& prm,
                             const IntegratorConfig& cfg, double t_dir) {
  Vec4 s = section_lift(p, prm);
  auto hit = flow_to_crossing(s, CrossingSpec{}, k, t_dir, prm, cfg);
  if (!hit) throw NumericalError("dpoincare: crossing not reached");
  auto vs = flow_variational(s, hit->t, prm, cfg);
  // Time correction: project onto the section along the flow.
  Vec4 f = vector_field(vs.y, prm);
  double ydot = f[1];
  if (std::abs(ydot) < 1e-12)
    throw NumericalError("dpoincare: tangential crossing, map not differentiable");
  Mat4 P = Mat4::Identity() - (f * Eigen::RowVector4d::Unit(1)) / ydot;
  return VarReturn{vs.y, hit->t, P * vs.Phi};
}
}  // namespace

DMapResult dpoincare(const SectionPoint& p, int k, const Params& prm,
                     const IntegratorConfig& cfg, double t_dir) {
  auto vr = variational_return(p, k, prm, cfg, t_dir);
  Eigen::Matrix<double, 4, 2> B = section_lift_differential(p, prm);
  Eigen::Matrix<double, 2, 4> S;
  S << 1, 0, 0, 0,
       0, 0, 1, 0;
  DMapResult res;
  res.point = section_project(vr.z, prm);
  res.point.J = p.J;
  res.time = vr.t;
  res.D = S * vr.Phi * B;
  return res;
}

Vec2 transport_tangent(const SectionPoint& p, const Vec2& v, int k, const Params& prm,
                       const IntegratorConfig& cfg, double t_dir) {
  auto vr = variational_return(p, k, prm, cfg, t_dir);
  Eigen::Matrix<double, 4, 2> B = section_lift_differential(p, prm);
  Vec4 w = vr.Phi * (B * v);
  return Vec2(w[0], w[2]);
}

std::vector<DgSample> monitor_dgdt(const Trajectory& traj, const Params& prm,
                                   std::optional<double>* sign_change_t) {
  std::vector<DgSample> out;
  if (sign_change_t) *sign_change_t = std::nullopt;
  auto push = [&](double t, const Vec4& y) {
    try {
      Delaunay d = cart_to_delaunay(std::array<double, 4>{y[0], y[1], y[2], y[3]});
      double v = -1.0 + prm.mu * dG_delta_h_circ(d, prm);
      if (sign_change_t && !out.empty() && !(*sign_change_t) &&
          out.back().dgdt * v < 0)
        *sign_change_t = t;
      out.push_back({t, v});
    } catch (const NumericalError&) {
      // near-circular or near-parabolic osculating elements: skip sample
    }
  };
  for (std::size_t i = 0; i < traj.nodes.size(); ++i) {
    push(traj.nodes[i].t, traj.nodes[i].y);
    if (i + 1 < traj.nodes.size()) {
      double tm = 0.5 * (traj.nodes[i].t + traj.nodes[i + 1].t);
      push(tm, traj.eval(tm));
    }
  }
  return out;
}

}  // namespace rtbp
