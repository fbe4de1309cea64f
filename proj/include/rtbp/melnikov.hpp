#pragma once

#include <complex>
#include <iosfwd>
#include <utility>
#include <vector>

#include "rtbp/coords.hpp"
#include "rtbp/homoclinic.hpp"
#include "rtbp/integrate.hpp"
#include "rtbp/porbit.hpp"

namespace rtbp {

// The argument of pericenter g decreases monotonically (dg/dt = -1 + O(mu))
// along every orbit considered here, so sigma := g_unwrapped(0) - ... rather,
// sigma := unwrapped g minus its value at the anchor point serves as an
// orbit parameter; it increases backward in physical time. All improper
// integrals below are organized into sigma-blocks of length 2pi.

// dt/dsigma at a Delaunay point: 1 / (-1 + mu * d_G DeltaH_circ).
// Throws NumericalError when the denominator is below 0.1 in modulus.
double reparam_jacobian(const Delaunay& d, const Params& prm);

// An orbit arc indexed by sigma: dense Cartesian trajectory plus the
// monotone correspondence between physical time and unwrapped pericenter
// angle, grown on demand in either direction from the anchor state y0
// (which sits at t = 0, sigma = 0).
class SigmaArc {
 public:
  SigmaArc(const Vec4& y0, const Params& prm, const IntegratorConfig& cfg);

  // Time at which the unwrapped g has advanced by sigma; extends the arc.
  double t_of_sigma(double sigma);
  double sigma_of_t(double t);

  Vec4 state(double t) const;
  Delaunay elements(double t) const;
  double g0() const { return g0_; }

  double t_min() const;
  double t_max() const;

 private:
  void grow(int time_dir);
  void ensure_sigma(double sigma);
  double sigma_at_node(int time_dir, std::size_t k) const;

  Params prm_;
  IntegratorConfig cfg_;
  Vec4 y0_;
  double g0_;
  // One trajectory per time direction, nodes ordered away from t = 0,
  // with the unwrapped g carried along each node list.
  Trajectory fwd_, bwd_;
  std::vector<double> gfwd_, gbwd_;
};

struct MelnikovConfig {
  double quad_rel_tol = 1e-8;  // per-block quadrature, relative
  double quad_abs_tol = 1e-13;
  double tail_tol = 1e-6;      // Cauchy stopping rule for the block sums
  int min_blocks = 4;
  int max_blocks = 500;
};

// Frequency of the reparameterized angular dynamics: one plus mu times the
// per-block average that cancels the growth of the alpha partial sums,
//   nu = 1 - (mu/2pi) * Int_0^{2pi} [d_G DeltaH_circ / (-1 + mu d_G DeltaH_circ)] dsigma
// along the periodic orbit. Coincides with T_J / 2pi.
double nu(const PeriodicOrbit& po, const Params& prm, const IntegratorConfig& cfg,
          const MelnikovConfig& mcfg = {});

// One-sided alpha tail along a homoclinic orbit: the converged partial sum
// of per-block integrals mu * (I_k + 2pi * (nu-1)/mu), sigma -> +infinity
// for dir = +1 (alpha^+) and sigma -> -infinity for dir = -1 (alpha^-).
struct AlphaTail {
  double value = 0.0;
  int N_used = 0;
  double tail = 0.0;             // magnitude of the last increment
  std::vector<double> partial;   // partial sums by block
};
AlphaTail alpha_tail(SigmaArc& arc, double nu_val, int dir, const Params& prm,
                     const MelnikovConfig& mcfg = {});

struct MelnikovRecord {
  double J = 0.0;
  int i = 0;  // channel index
  double nu = 0.0;
  double alpha_plus = 0.0;
  double alpha = 0.0;  // = 2 * alpha_plus
  std::complex<double> B_in{0.0, 0.0};
  std::complex<double> B_out{0.0, 0.0};
  std::complex<double> B{0.0, 0.0};
  int N_used = 0;
  double tail_estimate = 0.0;
};

// Full record for one (energy, channel) cell: nu, the alpha phase shift and
// the complex first-order amplitude B = B_in + B_out. B_out is the
// two-sided block sum with the asymptotic periodic counter-terms removed;
// B_in is their closed-form geometric resummation with denominator
// 1 - e^{i 2 pi nu}.
MelnikovRecord melnikov_record(const PeriodicOrbit& po, const HomoclinicChannelRecord& hc,
                               const Params& prm, const IntegratorConfig& cfg,
                               const MelnikovConfig& mcfg = {});

// Cumulative time shifts lambda~(sigma) (periodic orbit, anchored at the
// point with the same pericenter phase as the homoclinic point) and
// gamma~(sigma) (homoclinic orbit, anchored at the symmetric point),
// tabulated on [-2pi n_blocks, 2pi n_blocks]. gamma~ - lambda~ tends to
// +alpha^+ as sigma -> +infinity and to -alpha^+ as sigma -> -infinity.
struct TimeShiftTable {
  std::vector<double> sigma;
  std::vector<double> lambda_tilde;
  std::vector<double> gamma_tilde;
};
TimeShiftTable time_shifts(const PeriodicOrbit& po, const HomoclinicChannelRecord& hc,
                           int n_blocks, const Params& prm, const IntegratorConfig& cfg,
                           int samples_per_block = 4);

// Leading-order variance of the action diffusion for one channel pair and
// one (theta = nu*gbar phase, energy) cell:
//   sigma0^2 = 2 E_w | B_w - (E B) (1 - e^{i beta_w}) / (1 - E e^{i beta}) |^2
// with beta_w = theta + alpha_w and E the mean over the two symbols.
double sigma0_sq(const std::complex<double>& B_a, double alpha_a,
                 const std::complex<double>& B_b, double alpha_b, double theta);

struct VarianceSurface {
  std::vector<double> J;      // grid axis (rows)
  std::vector<double> theta;  // grid axis (columns)
  Eigen::MatrixXd value;
  std::pair<int, int> pair{2, 3};
  std::vector<std::pair<int, int>> degenerate;  // nodes with |1 - E e^{i beta}| < 1e-8
};

// Surface over the common J grid of two aligned record sets (same J at
// matching indices) and a theta grid.
VarianceSurface sigma0_surface(const std::vector<MelnikovRecord>& rec_a,
                               const std::vector<MelnikovRecord>& rec_b,
                               const std::vector<double>& theta_grid);

// Per-node report of the three usability conditions for a channel pair:
// bounded phases, distinct phases, positive variance.
struct Ansatz2Node {
  double J = 0.0;
  bool alpha_bound_ok = false;  // |alpha_i| <= 100 mu, both channels
  bool alpha_gap_ok = false;    // alpha_a != alpha_b
  bool variance_ok = false;     // min over theta of sigma0^2 > 0
  double alpha_margin = 0.0;    // 100 mu - max |alpha_i|
  double alpha_gap = 0.0;       // |alpha_a - alpha_b|
  double min_sigma0_sq = 0.0;
};
std::vector<Ansatz2Node> ansatz2_check(const std::vector<MelnikovRecord>& rec_a,
                                       const std::vector<MelnikovRecord>& rec_b,
                                       const std::vector<double>& theta_grid,
                                       const Params& prm);

// CSV emission (header row + one line per record / grid node).
void write_melnikov_csv(std::ostream& os, const std::vector<MelnikovRecord>& recs);
void write_variance_csv(std::ostream& os, const VarianceSurface& surf);

}  // namespace rtbp
