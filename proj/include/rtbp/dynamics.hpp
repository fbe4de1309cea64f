#pragma once

#include <array>
#include <complex>
#include <vector>

#include "rtbp/coords.hpp"
#include "rtbp/types.hpp"

namespace rtbp {

// Rotating-frame Hamiltonian
//   J = |p|^2/2 + y px - x py - mu/r1 - (1-mu)/r2,
// r1 = distance to the small primary at (1-mu, 0), r2 = to the Sun at (-mu, 0).
template <typename T>
T jacobi_energy(const std::array<T, 4>& s, const Params& prm) {
  using std::sqrt;
  const T &x = s[0], &y = s[1], &px = s[2], &py = s[3];
  T dx1 = x - T(1.0 - prm.mu);
  T dx2 = x + T(prm.mu);
  T r2 = sqrt(dx2 * dx2 + y * y);
  if (value(r2) <= 0) throw CollisionError("jacobi_energy: collision with the Sun");
  T h = T(0.5) * (px * px + py * py) + y * px - x * py - T(1.0 - prm.mu) / r2;
  if (prm.mu != 0.0) {
    T r1 = sqrt(dx1 * dx1 + y * y);
    if (value(r1) <= 0)
      throw CollisionError("jacobi_energy: collision with the small primary");
    h -= T(prm.mu) / r1;
  }
  return h;
}

inline double jacobi_energy(const Vec4& s, const Params& prm) {
  return jacobi_energy(std::array<double, 4>{s[0], s[1], s[2], s[3]}, prm);
}

// Hamiltonian vector field of J.
Vec4 vector_field(const Vec4& s, const Params& prm);

// Jacobian of the vector field (for variational equations).
Mat4 field_jacobian(const Vec4& s, const Params& prm);

// d/dG of DeltaH_circ at fixed (L, ell, g, J-level structure), where
//   mu * DeltaH_circ = J(cart(L,ell,G,g)) + 1/(2L^2) + G.
// Exact derivative via a dual-number pass through the element map.
double dG_delta_h_circ(const Delaunay& d, const Params& prm);

// Central-difference cross check of the same quantity (step h in G).
double dG_delta_h_circ_fd(const Delaunay& d, const Params& prm, double h = 1e-6);

// Fourier coefficients c_k = (1/2pi) \int_0^{2pi} f(t) e^{-ikt} dt of
// t |-> (1/mu) d/de0 [H_ell,rot](point; e0)|_{e0=0}, the first-order
// (in primary eccentricity) perturbation evaluated at a frozen osculating
// element point. Returns c_k for k in [-kmax, kmax] (index k + kmax).
std::vector<std::complex<double>> ell_fourier_coeffs(const Delaunay& d, const Params& prm,
                                                     int kmax = 2, int n_nodes = 64);

// The k = +1 harmonic: the only one that survives to first order.
std::complex<double> delta_h_ell_harmonic(const Delaunay& d, const Params& prm);

// Rotating-frame Hamiltonian with the primaries on an ellipse of
// eccentricity e0 (epoch t; both primaries at pericenter at t = 0).
double elliptic_hamiltonian(const Vec4& s, double t, double e0, const Params& prm);

}  // namespace rtbp
