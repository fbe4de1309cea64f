#include "rtbp/dynamics.hpp"

#include <cmath>

namespace rtbp {

Vec4 vector_field(const Vec4& s, const Params& prm) {
  const double x = s[0], y = s[1], px = s[2], py = s[3];
  const double mu = prm.mu;
  const double dx1 = x - (1.0 - mu), dx2 = x + mu;
  const double r1 = std::hypot(dx1, y), r2 = std::hypot(dx2, y);
  if ((mu != 0.0 && r1 < 1e-12) || r2 < 1e-12)
    throw CollisionError("vector_field: collision");
  const double ir13 = (mu != 0.0) ? 1.0 / (r1 * r1 * r1) : 0.0;
  const double ir23 = 1.0 / (r2 * r2 * r2);
  const double Ux = mu * dx1 * ir13 + (1.0 - mu) * dx2 * ir23;
  const double Uy = mu * y * ir13 + (1.0 - mu) * y * ir23;
  return Vec4(px + y, py - x, py - Ux, -px - Uy);
}

Mat4 field_jacobian(const Vec4& s, const Params& prm) {
  const double x = s[0], y = s[1];
  const double mu = prm.mu;
  const double dx1 = x - (1.0 - mu), dx2 = x + mu;
  const double r1 = std::hypot(dx1, y), r2 = std::hypot(dx2, y);
  const double ir13 = (mu != 0.0) ? 1.0 / (r1 * r1 * r1) : 0.0;
  const double ir23 = 1.0 / (r2 * r2 * r2);
  const double ir15 = (mu != 0.0) ? ir13 / (r1 * r1) : 0.0;
  const double ir25 = ir23 / (r2 * r2);
  const double Uxx = mu * (ir13 - 3.0 * dx1 * dx1 * ir15) +
                     (1.0 - mu) * (ir23 - 3.0 * dx2 * dx2 * ir25);
  const double Uyy = mu * (ir13 - 3.0 * y * y * ir15) +
                     (1.0 - mu) * (ir23 - 3.0 * y * y * ir25);
  const double Uxy = -3.0 * (mu * dx1 * y * ir15 + (1.0 - mu) * dx2 * y * ir25);
  Mat4 A;
  A << 0, 1, 1, 0,
      -1, 0, 0, 1,
      -Uxx, -Uxy, 0, 1,
      -Uxy, -Uyy, -1, 0;
  return A;
}

double dG_delta_h_circ(const Delaunay& d, const Params& prm) {
  DelaunayT<Dual> dd{Dual(d.L), Dual(d.ell), Dual(d.G, 1.0), Dual(d.g)};
  auto s = delaunay_to_cart(dd);
  Dual J = jacobi_energy(s, prm);
  // mu*DeltaH = J + 1/(2L^2) + G; d/dG at fixed (L, ell, g).
  return (J.d + 1.0) / prm.mu;
}

double dG_delta_h_circ_fd(const Delaunay& d, const Params& prm, double h) {
  auto eval = [&](double G) {
    Delaunay dg = d;
    dg.G = G;
    auto s = delaunay_to_cart(dg);
    return jacobi_energy(s, prm) + 1.0 / (2.0 * d.L * d.L) + G;
  };
  return (eval(d.G + h) - eval(d.G - h)) / (2.0 * h * prm.mu);
}

double elliptic_hamiltonian(const Vec4& s, double t, double e0, const Params& prm) {
  // Primaries on a two-body ellipse of eccentricity e0, unit semimajor axis,
  // pericenter passage at t = 0. The relative position in the inertial frame
  // is x0(t); the rotating chart subtracts the uniform rotation e^{it}, so in
  // the rotating frame the relative coordinate is x0rot = e^{-it} x0(t).
  double u0 = solve_kepler(t, e0);
  double cx = std::cos(u0) - e0;
  double cy = std::sqrt(1.0 - e0 * e0) * std::sin(u0);
  double ct = std::cos(t), st = std::sin(t);
  // e^{-it}*(cx+i cy)
  double rx = ct * cx + st * cy;
  double ry = -st * cx + ct * cy;
  const double mu = prm.mu;
  const double x = s[0], y = s[1], px = s[2], py = s[3];
  // Sun at -mu*x0rot, small primary at (1-mu)*x0rot.
  double d1x = x - (1.0 - mu) * rx, d1y = y - (1.0 - mu) * ry;
  double d2x = x + mu * rx, d2y = y + mu * ry;
  double r1 = std::hypot(d1x, d1y), r2 = std::hypot(d2x, d2y);
  if (r1 < 1e-12 || r2 < 1e-12) throw CollisionError("elliptic_hamiltonian: collision");
  return 0.5 * (px * px + py * py) + y * px - x * py - mu / r1 - (1.0 - mu) / r2;
}

std::vector<std::complex<double>> ell_fourier_coeffs(const Delaunay& d, const Params& prm,
                                                     int kmax, int n_nodes) {
  auto s4 = delaunay_to_cart(DelaunayT<double>{d.L, d.ell, d.G, d.g});
  Vec4 s(s4[0], s4[1], s4[2], s4[3]);
  // d/de0 at e0 = 0 by Richardson-extrapolated central differences.
  auto de0 = [&](double t) {
    const double h = 1e-5;
    double d1 = (elliptic_hamiltonian(s, t, h, prm) -
                 elliptic_hamiltonian(s, t, -h, prm)) / (2.0 * h);
    double d2 = (elliptic_hamiltonian(s, t, 2.0 * h, prm) -
                 elliptic_hamiltonian(s, t, -2.0 * h, prm)) / (4.0 * h);
    return (4.0 * d1 - d2) / (3.0 * prm.mu);
  };
  std::vector<std::complex<double>> out(2 * kmax + 1, 0.0);
  for (int n = 0; n < n_nodes; ++n) {
    double t = TWO_PI * n / n_nodes;
    double f = de0(t);
    for (int k = -kmax; k <= kmax; ++k)
      out[k + kmax] += f * std::exp(std::complex<double>(0.0, -k * t));
  }
  for (auto& c : out) c /= static_cast<double>(n_nodes);
  return out;
}

std::complex<double> delta_h_ell_harmonic(const Delaunay& d, const Params& prm) {
  auto c = ell_fourier_coeffs(d, prm, 1, 64);
  return c[2];  // k = +1
}

}  // namespace rtbp
