#pragma once

#include <cmath>

namespace rtbp {

// First-order forward-mode dual number: value + single derivative channel.
// Enough math ops to push through the Delaunay <-> Cartesian maps and the
// Hamiltonian, giving exact partial derivatives without finite differencing.
struct Dual {
  double v = 0.0;  // value
  double d = 0.0;  // derivative

  Dual() = default;
  Dual(double value) : v(value), d(0.0) {}
  Dual(double value, double deriv) : v(value), d(deriv) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) {
  double inv = 1.0 / b.v;
  return {a.v * inv, (a.d - a.v * b.d * inv) * inv};
}
inline Dual& operator+=(Dual& a, Dual b) { a = a + b; return a; }
inline Dual& operator-=(Dual& a, Dual b) { a = a - b; return a; }
inline Dual& operator*=(Dual& a, Dual b) { a = a * b; return a; }
inline Dual& operator/=(Dual& a, Dual b) { a = a / b; return a; }

inline bool operator<(Dual a, Dual b) { return a.v < b.v; }
inline bool operator>(Dual a, Dual b) { return a.v > b.v; }

inline Dual sqrt(Dual a) {
  double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
inline Dual sin(Dual a) { return {std::sin(a.v), a.d * std::cos(a.v)}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -a.d * std::sin(a.v)}; }
inline Dual atan2(Dual y, Dual x) {
  double r2 = x.v * x.v + y.v * y.v;
  return {std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / r2};
}
inline Dual hypot(Dual x, Dual y) {
  double h = std::hypot(x.v, y.v);
  return {h, (x.v * x.d + y.v * y.d) / h};
}
inline Dual fabs(Dual a) { return a.v < 0 ? -a : a; }

inline double value(double x) { return x; }
inline double value(Dual x) { return x.v; }
inline double deriv(double) { return 0.0; }
inline double deriv(Dual x) { return x.d; }

}  // namespace rtbp
