#pragma once

#include <array>
#include <cmath>

#include "rtbp/dual.hpp"
#include "rtbp/types.hpp"

namespace rtbp {

// Rotating Delaunay elements of the osculating two-body (Sun + massless)
// problem: L = sqrt(a), ell = mean anomaly, G = angular momentum,
// g = argument of pericenter measured in the rotating frame.
template <typename T>
struct DelaunayT {
  T L, ell, G, g;
};
using Delaunay = DelaunayT<double>;

// Solve u - e*sin(u) = ell for the eccentric anomaly. Newton with a
// bisection safeguard on the bracket [ell-e, ell+e]; quadratic convergence
// from the standard u0 = ell + 0.85 e sign(sin ell) seed.
template <typename T>
T solve_kepler(T ell_in, T e) {
  using std::sin;
  using std::cos;
  // e may be slightly negative (analytic continuation used when
  // differentiating in the eccentricity at e = 0).
  double ev = value(e);
  if (!(std::fabs(ev) < 1.0))
    throw NumericalError("solve_kepler: eccentricity outside (-1,1): e=" + std::to_string(ev));

  // Reduce to [0, 2pi), remember the branch offset so u stays continuous in ell.
  double lv = value(ell_in);
  double base = TWO_PI * std::floor(lv / TWO_PI);
  double l = lv - base;

  double ea = std::fabs(ev);
  double lo = l - ea, hi = l + ea;
  double u = l + 0.85 * ev * ((std::sin(l) >= 0.0) ? 1.0 : -1.0);
  double f = u - ev * std::sin(u) - l;
  for (int it = 0; it < 50 && std::fabs(f) > 1e-14; ++it) {
    if (f > 0) hi = u; else lo = u;
    double fp = 1.0 - ev * std::cos(u);
    double step = f / fp;
    double un = u - step;
    if (!(un > lo && un < hi)) un = 0.5 * (lo + hi);  // safeguard
    u = un;
    f = u - ev * std::sin(u) - l;
  }
  if (std::fabs(f) > 1e-13)
    throw NumericalError("solve_kepler: no convergence, residual=" + std::to_string(f));

  if constexpr (std::is_same_v<T, Dual>) {
    // Implicit function theorem: du = (dl + sin(u) de) / (1 - e cos u).
    double du = (deriv(ell_in) + std::sin(u) * deriv(e)) / (1.0 - ev * std::cos(u));
    return Dual(u + base, du);
  } else {
    return u + base;
  }
}

// Delaunay -> rotating Cartesian (x, y, px, py). The momenta are the
// inertial velocity expressed in the rotating basis; the rotating-frame
// angle g already accounts for the frame, so the two-body formulas apply.
template <typename T>
std::array<T, 4> delaunay_to_cart(const DelaunayT<T>& d) {
  using std::sin;
  using std::cos;
  using std::sqrt;
  T a = d.L * d.L;
  T e2 = T(1.0) - (d.G * d.G) / (d.L * d.L);
  if (value(e2) < 0) {
    if (value(e2) > -1e-12) e2 = T(0.0);
    else throw NumericalError("delaunay_to_cart: |G| > L");
  }
  T e = sqrt(e2);
  double sG = (value(d.G) >= 0.0) ? 1.0 : -1.0;  // prograde/retrograde
  T u = solve_kepler(d.ell, e);
  T cu = cos(u), su = sin(u);
  T r = a * (T(1.0) - e * cu);
  T rt = sqrt(e2 < T(1.0) ? T(1.0) - e2 : T(0.0));
  // Perifocal coordinates and velocities.
  T qx = a * (cu - e);
  T qy = T(sG) * a * rt * su;
  T vx = -(d.L / r) * su;
  T vy = T(sG) * (d.L / r) * rt * cu;
  T cg = cos(d.g), sg = sin(d.g);
  return {cg * qx - sg * qy, sg * qx + cg * qy,
          cg * vx - sg * vy, sg * vx + cg * vy};
}

// Rotating Cartesian -> Delaunay. Throws if the osculating two-body energy
// is non-negative (no ellipse) or the orbit is circular to machine level
// (pericenter angle undefined).
template <typename T>
DelaunayT<T> cart_to_delaunay(const std::array<T, 4>& s) {
  using std::sqrt;
  using std::atan2;
  using std::sin;
  using std::cos;
  const T &x = s[0], &y = s[1], &px = s[2], &py = s[3];
  T r = sqrt(x * x + y * y);
  if (value(r) <= 0) throw NumericalError("cart_to_delaunay: at the origin");
  T E2b = (px * px + py * py) * T(0.5) - T(1.0) / r;
  if (value(E2b) >= 0)
    throw NumericalError("cart_to_delaunay: non-negative two-body energy E=" +
                         std::to_string(value(E2b)));
  T L = T(1.0) / sqrt(T(-2.0) * E2b);
  T G = x * py - y * px;
  T a = L * L;
  T e2 = T(1.0) - (G * G) / (L * L);
  if (value(e2) < 0) {
    if (value(e2) > -1e-12) e2 = T(0.0);
    else throw NumericalError("cart_to_delaunay: |G| > L");
  }
  T e = sqrt(e2);
  if (value(e) < 1e-10)
    throw NumericalError("cart_to_delaunay: circular orbit, pericenter undefined");
  T esu = (x * px + y * py) / L;  // e sin u
  T ecu = T(1.0) - r / a;         // e cos u
  T u = atan2(esu, ecu);
  T ell = u - esu;
  double sG = (value(G) >= 0.0) ? 1.0 : -1.0;
  T rt = sqrt(T(1.0) - e2);
  // True anomaly v with tan(v/2) relation; angle from pericenter is sG*v.
  T v = atan2(rt * sin(u), cos(u) - e);
  T phi = atan2(y, x);
  T g = phi - T(sG) * v;
  if constexpr (std::is_same_v<T, double>) {
    ell = wrap_2pi(value(ell));
    g = wrap_2pi(value(g));
  }
  return {L, ell, G, g};
}

inline double osculating_L(const Vec4& s) {
  double r = std::hypot(s[0], s[1]);
  double E2b = 0.5 * (s[2] * s[2] + s[3] * s[3]) - 1.0 / r;
  if (E2b >= 0) throw NumericalError("osculating_L: non-negative two-body energy");
  return 1.0 / std::sqrt(-2.0 * E2b);
}

// Eccentricity on the energy level: E(J, L) = sqrt(1 - (J + 1/(2L^2))^2 / L^2).
inline double ecc_of_energy(double J, double L) {
  double G0 = -(J + 1.0 / (2.0 * L * L));
  double rad = 1.0 - G0 * G0 / (L * L);
  if (rad < 0)
    throw NumericalError("ecc_of_energy: negative radicand " + std::to_string(rad));
  return std::sqrt(rad);
}

}  // namespace rtbp
