#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <queue>
#include <vector>

#include "rtbp/types.hpp"

namespace rtbp {

namespace detail {
// Gauss 7 / Kronrod 15 nodes and weights (positive half-axis).
inline constexpr double kGK_x[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
inline constexpr double kGK_wk[8] = {
    0.02293532201052922, 0.06309209262997855, 0.10479001032225018,
    0.14065325971552591, 0.16900472663926790, 0.19035057806478540,
    0.20443294007529889, 0.20948214108472782};
inline constexpr double kGK_wg[4] = {
    0.12948496616886969, 0.27970539148927664, 0.38183005050511894,
    0.41795918367346938};

template <typename R, typename F>
void gk15(const F& f, double a, double b, R& kronrod, double& err) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  R resk = kGK_wk[7] * f(c);
  R resg = kGK_wg[3] * f(c);
  for (int j = 0; j < 7; ++j) {
    double dx = h * kGK_x[j];
    R fsum = f(c - dx) + f(c + dx);
    resk += kGK_wk[j] * fsum;
    if (j % 2 == 1) resg += kGK_wg[j / 2] * fsum;
  }
  kronrod = resk * h;
  err = std::abs((resk - resg) * h);
}
}  // namespace detail

// Globally adaptive Gauss-Kronrod 7-15 with bisection of the interval of
// largest error estimate. R is double or std::complex<double>.
template <typename R, typename F>
R adaptive_gk(const F& f, double a, double b, double rel_tol = 1e-10,
              double abs_tol = 1e-14, int max_intervals = 2000,
              double* err_out = nullptr) {
  struct Piece {
    double a, b, err;
    R val;
    bool operator<(const Piece& o) const { return err < o.err; }
  };
  std::priority_queue<Piece> q;
  Piece p0{a, b, 0.0, R{}};
  detail::gk15(f, a, b, p0.val, p0.err);
  q.push(p0);
  R total = p0.val;
  double toterr = p0.err;
  int n = 1;
  while (toterr > std::max(abs_tol, rel_tol * std::abs(total)) && n < max_intervals) {
    Piece top = q.top();
    q.pop();
    double m = 0.5 * (top.a + top.b);
    Piece l{top.a, m, 0.0, R{}}, r{m, top.b, 0.0, R{}};
    detail::gk15(f, l.a, l.b, l.val, l.err);
    detail::gk15(f, r.a, r.b, r.val, r.err);
    total += l.val + r.val - top.val;
    toterr += l.err + r.err - top.err;
    q.push(l);
    q.push(r);
    ++n;
  }
  if (toterr > std::max(abs_tol, rel_tol * std::abs(total)) * 100.0)
    throw NumericalError("adaptive_gk: interval budget exhausted, err=" +
                         std::to_string(toterr));
  if (err_out) *err_out = toterr;
  return total;
}

}  // namespace rtbp
