#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rtbp/porbit.hpp"

namespace rtbp {

enum class ManifoldSide { unstable, stable };

// One point of a globalized curve: the N-th iterate of the local
// parameterization w(xi) = fixedpoint + xi * v.
struct ManifoldSample {
  double xi = 0.0;
  SectionPoint pt;
  int segment_id = 0;
  bool tangency = false;  // a counted crossing along its orbit was nearly tangential
};

// Image of a fundamental domain [xi_-, lambda_u * xi_-] of the local
// (un)stable manifold under N applications of P~ = P^n_cross (backward for
// the stable side). Stored as ordered segments: segment_id increments across
// discontinuities, which are genuine where a loop of the orbit leaves the
// section.
struct ManifoldCurve {
  PeriodicOrbit po;
  ManifoldSide side = ManifoldSide::unstable;
  int dir = +1;  // half-branch: sign of the initial displacement along v
  int N = 0;
  double xi_minus = 0.0, xi_plus = 0.0;
  std::vector<ManifoldSample> samples;
  int n_segments = 1;
  std::vector<std::string> warnings;

  bool straddles_axis() const;
};

struct GlobalizeOptions {
  double xi_minus = 1e-7;
  int mesh_init = 17;            // initial samples across the fundamental domain
  double gap_tol = 1e-3;         // refine until adjacent image gap < gap_tol in (x, px)
  std::size_t max_points = 100000;
  int iterate_budget = 30;       // nominal budget; exceeding it records a warning
  int iterate_cap = 700;         // hard cap (multiplier ~1.12 at the lowest
                                 // energies needs hundreds of iterates)
  int force_N = -1;              // if >= 0, apply exactly N iterates, no predicate
};

using StopPredicate = std::function<bool(const ManifoldCurve&)>;

// Grow the half-branch `dir` of the chosen manifold: iterate a refined mesh
// of the fundamental domain by P~ until the stop predicate holds (default:
// the image straddles {px = 0}). Throws NumericalError if the predicate is
// never met within the iterate cap.
ManifoldCurve globalize(const PeriodicOrbit& po, ManifoldSide side, int dir,
                        const Params& prm, const IntegratorConfig& cfg,
                        const GlobalizeOptions& opt = {},
                        const StopPredicate& stop = {});

// The stable curve as the pointwise reflection (x, px) -> (x, -px) of an
// unstable one (time-reversal symmetry of the flow across {y = 0}).
ManifoldCurve stable_from_unstable(const ManifoldCurve& c);

// Abscissas x of the axis crossings {px = 0} of the curve, one per
// sign-change bracket inside a segment, ordered along the curve
// (polyline interpolation; cheap preview of axis_crossings).
std::vector<double> axis_crossing_abscissas(const ManifoldCurve& c);

// A root of px(P~^N(w(xi))) = 0: intersection of the globalized curve with
// the symmetry axis.
struct AxisCrossing {
  double xi = 0.0;
  SectionPoint z;
  bool tangency = false;
};

// Local linear parameterization w(xi) = fixedpoint + xi * dir * v of the
// chosen manifold on the section.
SectionPoint manifold_seed(const PeriodicOrbit& po, ManifoldSide side, int dir, double xi);

// N applications of P~ (backward in time for the stable side) to w(xi);
// tangency reports a near-tangential section crossing along the way.
struct IteratedPoint {
  SectionPoint pt;
  bool tangency = false;
};
IteratedPoint iterate_manifold_seed(const PeriodicOrbit& po, ManifoldSide side, int dir,
                                    double xi, int N, const Params& prm,
                                    const IntegratorConfig& cfg);

// Polish a sign-change bracket of px(P~^N(w(xi))) between xi_lo and xi_hi
// (images plo/phi). Returns nothing if the bracket chord never contracts
// below px_floor (a discontinuity of the curve rather than a crossing).
std::optional<AxisCrossing> polish_axis_bracket(const PeriodicOrbit& po, ManifoldSide side,
                                                int dir, int N, double xi_lo,
                                                const SectionPoint& plo, double xi_hi,
                                                const SectionPoint& phi, const Params& prm,
                                                const IntegratorConfig& cfg,
                                                double px_floor = 1e-5);

// Polish every sign-change bracket of the curve by bisection until the
// bracket chord stops shrinking, then intersect the chord with the axis.
// Brackets whose chord never contracts below px_floor are discontinuities
// of the curve and are dropped. Ordered along the curve.
std::vector<AxisCrossing> axis_crossings(const ManifoldCurve& c, const Params& prm,
                                         const IntegratorConfig& cfg,
                                         double px_floor = 1e-5);

// CSV: branch,xi,x,p_x,segment_id
void write_csv(const ManifoldCurve& c, std::ostream& os);

}  // namespace rtbp
