#pragma once

#include <optional>
#include <vector>

#include "rtbp/integrate.hpp"

namespace rtbp {

// Point on the section {y = 0} restricted to the energy level {J = const}.
// (x, px) are coordinates; py is recovered from the energy, `sign` selecting
// the branch py = x + sign*sqrt(x^2 - 2C).
struct SectionPoint {
  double x = 0.0;
  double px = 0.0;
  double J = 0.0;
  int sign = +1;
};

// Recover the full phase-space point. Throws if the discriminant is negative
// (the (x, px, J) combination is not on the section).
Vec4 section_lift(const SectionPoint& p, const Params& prm);

// Project a phase point with y = 0 onto section coordinates.
SectionPoint section_project(const Vec4& s, const Params& prm);

// Differential of the lift: d(x,y,px,py)/d(x,px) at fixed J on {y=0}.
Eigen::Matrix<double, 4, 2> section_lift_differential(const SectionPoint& p,
                                                      const Params& prm);

struct MapResult {
  SectionPoint point;
  double time = 0.0;       // flight time to the k-th crossing
  bool tangency = false;   // some counted crossing was nearly tangential
};

// k-th return of the {y = 0} Poincare map (k >= 1; all transversal crossings
// count, both directions). t_dir = +-1 selects the time direction.
MapResult poincare(const SectionPoint& p, int k, const Params& prm,
                   const IntegratorConfig& cfg, double t_dir = +1.0);

struct DMapResult {
  SectionPoint point;
  double time = 0.0;
  Mat2 D;  // differential of the k-th return map in (x, px)
};

// Differential of the k-th return map: variational flow, section time
// correction and projection back to (x, px).
DMapResult dpoincare(const SectionPoint& p, int k, const Params& prm,
                     const IntegratorConfig& cfg, double t_dir = +1.0);

// Transport a section tangent vector along the trajectory from p to its k-th
// crossing; equals dpoincare(...).D * v but reuses a single variational run.
Vec2 transport_tangent(const SectionPoint& p, const Vec2& v, int k, const Params& prm,
                       const IntegratorConfig& cfg, double t_dir = +1.0);

struct DgSample {
  double t;
  double dgdt;  // -1 + mu * d(DeltaH_circ)/dG along the trajectory
};

// Sample dg/dt along a stored trajectory (at nodes and segment midpoints).
// If sign_change_t is non-null it receives the first time where dg/dt
// changes sign, if any.
std::vector<DgSample> monitor_dgdt(const Trajectory& traj, const Params& prm,
                                   std::optional<double>* sign_change_t = nullptr);

}  // namespace rtbp
