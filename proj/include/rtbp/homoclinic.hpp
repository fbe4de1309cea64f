#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rtbp/manifold.hpp"

namespace rtbp {

// Symmetric homoclinic point of the iterated section map: a crossing z of a
// manifold branch with the symmetry axis {px = 0}, with the tangent data
// needed for the splitting angle between W^u and W^s at z.
struct HomoclinicChannelRecord {
  int i = 0;  // channel label, 1..4
  double J = 0.0;
  SectionPoint z;               // on the axis; px = 0
  double xi_star = 0.0;         // manifold parameter of the unstable preimage
  int N = 0;                    // iterates of P~ from the local seed to z
  Vec2 v_u = Vec2::Zero();      // unstable tangent at z
  Vec2 v_s = Vec2::Zero();      // stable tangent at z
  double theta = 0.0;           // splitting angle, signed, in (-pi/2, pi/2]
  double us_discrepancy = 0.0;  // |x(z) from W^u - x(z) from W^s|
  double seed_lambda = 0.0;     // unstable multiplier of the seed fixed point
};

// Geometry of one channel, frozen at the reference energy J_ref = -1.55:
// which axis fixed point seeds the branch (the pericenter-side point of the
// orbit or its half-period partner), the branch sign, and the crossing
// abscissa there. Continuation identifies the same crossing at nearby
// energies by an x window around a linear prediction.
struct ChannelSpec {
  bool partner = false;  // seed at the half-period axis point instead of x0
  int dir = +1;          // half-branch sign of the unstable seed
  double x_ref = 0.0;    // crossing abscissa at J_ref
  double dxdJ = 0.0;     // local slope of x(J) at J_ref, for prediction
  double xi_ref = 0.0;   // manifold parameter of the crossing at J_ref
  int N_ref = 0;         // iterate count of the crossing at J_ref
};
constexpr double kChannelRefJ = -1.55;
constexpr double kChannelRefLambda = 2.106225234;  // unstable multiplier at J_ref
const std::array<ChannelSpec, 4>& channel_specs();

// The second axis fixed point of P~ on the orbit: the half-period image of
// (x0, 0), with its own eigen-data (same multipliers, different vectors).
PeriodicOrbit partner_axis_point(const PeriodicOrbit& po, const Params& prm,
                                 const IntegratorConfig& cfg);

// Channel i of the orbit's energy level. Scans mesh images of the unstable
// fundamental domain for sign changes of px near the predicted abscissa
// (prev sharpens the prediction; prev2 turns it into a two-point
// extrapolation of the seed amplitude xi* lambda^N), polishes the bracket,
// then repeats the search from the stable side to fill us_discrepancy and
// v_s. Throws NumericalError if no crossing appears in the window (channel
// absent at this energy).
HomoclinicChannelRecord find_symmetric_homoclinic(const PeriodicOrbit& po, int i,
                                                  const Params& prm,
                                                  const IntegratorConfig& cfg,
                                                  const HomoclinicChannelRecord* prev = nullptr,
                                                  const HomoclinicChannelRecord* prev2 = nullptr);
HomoclinicChannelRecord find_symmetric_homoclinic(double J, int i, const Params& prm,
                                                  const IntegratorConfig& cfg);

// Directed angle from v_u to v_s as line directions: the arctan difference
// wrapped modulo pi into (-pi/2, pi/2]. Zero flags a tangency. Throws on a
// degenerate tangent (norm below 1e-12).
double splitting_angle(const Vec2& v_u, const Vec2& v_s);

// Splitting angle from the curve itself: sample the branch through the
// polished crossing, fit x as a quadratic in px on both the unstable curve
// and its axis reflection, and take the angle between the fitted tangents.
// Insensitive to the along-curve parameter jitter that limits the
// variational tangents, so preferred where the sign of a small angle
// matters (tangency location).
double splitting_angle_fd(const PeriodicOrbit& seed, const ChannelSpec& spec,
                          const HomoclinicChannelRecord& rec, const Params& prm,
                          const IntegratorConfig& cfg, double h = 2e-4);

struct Tangency {
  int channel = 0;
  double J = 0.0;
  double bracket_width = 0.0;
};

// Zeros of theta_i(J) on [J_lo, J_hi]: the channel is continued across a
// uniform grid, sign changes of the fitted-curve angle are bracketed and
// refined by bisection in J until the bracket is narrower than J_tol.
std::vector<Tangency> tangency_scan(double J_lo, double J_hi, int n_grid, int i,
                                    const Params& prm, const IntegratorConfig& cfg,
                                    double J_tol = 2e-3);

struct ChannelInterval {
  double J_lo = 0.0, J_hi = 0.0;
  std::array<int, 2> channels{};  // the pair free of tangencies on the span
};

// Maximal spans free of tangencies for at least two channels: for each
// channel pair sharing a tangency set {t1 < t2 < ...}, the spans between
// consecutive tangencies and from the last one up to J_plus. Ordered by
// left endpoint. diffusion_intervals additionally caps the right endpoints
// at J_cut (the section-validity threshold of the reparameterized system).
std::vector<ChannelInterval> channel_intervals(const std::vector<Tangency>& tangencies,
                                               double J_plus);
std::vector<ChannelInterval> diffusion_intervals(const std::vector<ChannelInterval>& tilde,
                                                 double J_cut = -1.485);

struct HomoclinicBounds {
  double max_L_dev = 0.0;  // sup |L(t) - 3^{-1/3}|
  double max_E11 = 0.0;    // sup |E(J, L(t)) - E(J, 3^{-1/3})|
  double max_E2 = 0.0;     // sup |sqrt(1 - G^2/L^2) - E(J, L)|
  double M = 0.0;          // horizon at which the doubling rule converged
};

// Suprema of the Delaunay deviations along the homoclinic trajectory
// through z over t in [-M, M]. The orbit is R-symmetric and the integrands
// are R-invariant, so only the forward half is integrated. M doubles from
// M0 until all three suprema change by less than tol, capped at M_cap.
HomoclinicBounds homoclinic_bounds(const HomoclinicChannelRecord& rec, const Params& prm,
                                   const IntegratorConfig& cfg, double M0 = 25.0,
                                   double tol = 1e-6, double M_cap = 200.0);

// CSV: J,i,x_z,theta_i,us_discrepancy
void write_channels_csv(const std::vector<HomoclinicChannelRecord>& recs, std::ostream& os);
// CSV: J,i,max_L_dev,max_E11,max_E2
void write_bounds_csv(const std::vector<std::pair<HomoclinicChannelRecord, HomoclinicBounds>>& rows,
                      std::ostream& os);
// JSON: [{"channel":i,"J_tangency":J,"bracket_width":w}, ...]
void write_tangencies_json(const std::vector<Tangency>& tangencies, std::ostream& os);

}  // namespace rtbp
