#pragma once

#include <optional>
#include <vector>

#include "rtbp/section.hpp"

namespace rtbp {

// Hyperbolic periodic orbit of the interior 3:1 resonance, stored by its
// symmetric section point (y = 0, px = 0).
struct PeriodicOrbit {
  double J = 0.0;
  double x0 = 0.0;         // section coordinate; px = 0 by symmetry
  double py0 = 0.0;
  int sign = +1;           // branch of py on the section
  double period = 0.0;     // rotating-frame period T_J
  int n_cross = 0;         // {y=0} crossings per period (order of P~ = P^n)
  Mat2 monodromy;          // differential of the return map P~ at the fixed point
  double lambda_u = 0.0;   // unstable multiplier (> 1)
  Vec2 v_u, v_s;           // unit eigenvectors in (x, px)
  double residual = 0.0;   // |px| defect at the half-period symmetric return
  double max_L_dev = 0.0;  // sup |L(t) - 3^{-1/3}| over one period
};

// Shooting along the symmetry axis: Newton in x0 on the half-period return
// px = 0. Starts from the pericenter-side two-body seed unless a guess is
// given; falls back to the apocenter side if the first seed fails.
PeriodicOrbit find_resonant_po(double J, const Params& prm, const IntegratorConfig& cfg,
                               std::optional<double> x0_guess = std::nullopt);

// Eigen-structure of a 2x2 return-map differential with unit determinant.
struct Splitting {
  double lambda_u, lambda_s;
  Vec2 v_u, v_s;
};
Splitting hyperbolic_splitting(const Mat2& D);

// Family continuation over an inclusive uniform J grid (either direction),
// each orbit seeding the next.
std::vector<PeriodicOrbit> continue_family(double J_from, double J_to, int n_points,
                                           const Params& prm, const IntegratorConfig& cfg);

inline double resonant_L() { return std::pow(3.0, -1.0 / 3.0); }

}  // namespace rtbp
