#include "rtbp/melnikov.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include "rtbp/quadrature.hpp"
#include "rtbp/section.hpp"

namespace rtbp {

using Complex = std::complex<double>;

namespace {

Delaunay del(const Vec4& y) {
  return cart_to_delaunay(std::array<double, 4>{y[0], y[1], y[2], y[3]});
}

constexpr double kChunkSpan = 64.0;  // growth quantum of a SigmaArc, in time

// Extrapolated limit of a sequence with geometrically decaying increments.
Complex geometric_limit(const std::vector<Complex>& c) {
  std::size_t n = c.size();
  if (n < 3) return c.back();
  Complex d1 = c[n - 1] - c[n - 2], d0 = c[n - 2] - c[n - 3];
  if (std::abs(d0) < 1e-300) return c.back();
  Complex r = d1 / d0;
  if (std::abs(r) >= 0.95) return c.back();
  return c[n - 1] + d1 * r / (1.0 - r);
}

}  // namespace

double reparam_jacobian(const Delaunay& d, const Params& prm) {
  double den = -1.0 + prm.mu * dG_delta_h_circ(d, prm);
  if (std::fabs(den) < 0.1)
    throw NumericalError("reparam_jacobian: near-singular, dg/dt=" + std::to_string(den));
  return 1.0 / den;
}

SigmaArc::SigmaArc(const Vec4& y0, const Params& prm, const IntegratorConfig& cfg)
    : prm_(prm), cfg_(cfg), y0_(y0) {
  g0_ = del(y0).g;
}

double SigmaArc::t_min() const { return bwd_.nodes.empty() ? 0.0 : bwd_.nodes.back().t; }
double SigmaArc::t_max() const { return fwd_.nodes.empty() ? 0.0 : fwd_.nodes.back().t; }

void SigmaArc::grow(int time_dir) {
  Trajectory& tr = (time_dir > 0) ? fwd_ : bwd_;
  std::vector<double>& gs = (time_dir > 0) ? gfwd_ : gbwd_;
  Vec4 y_from = tr.nodes.empty() ? y0_ : tr.nodes.back().y;
  double t_off = tr.nodes.empty() ? 0.0 : tr.nodes.back().t;

  Trajectory chunk;
  flow(y_from, time_dir * kChunkSpan, prm_, cfg_, &chunk);

  std::size_t skip = tr.nodes.empty() ? 0 : 1;  // seam node duplicates the last one
  double g_prev = tr.nodes.empty() ? g0_ : gs.back();
  for (std::size_t k = skip; k < chunk.nodes.size(); ++k) {
    TrajNode nd = chunk.nodes[k];
    nd.t += t_off;
    double g_raw = del(nd.y).g;
    double g_unw = g_prev + std::remainder(g_raw - g_prev, TWO_PI);
    tr.nodes.push_back(nd);
    gs.push_back(g_unw);
    g_prev = g_unw;
  }
}

void SigmaArc::ensure_sigma(double sigma) {
  // sigma increases backward in time; keep one node of margin.
  if (sigma >= 0) {
    while (gbwd_.empty() || gbwd_.back() - g0_ < sigma + 0.1) grow(-1);
  } else {
    while (gfwd_.empty() || gfwd_.back() - g0_ > sigma - 0.1) grow(+1);
  }
}

double SigmaArc::t_of_sigma(double sigma) {
  if (sigma == 0.0) return 0.0;
  ensure_sigma(sigma);
  const Trajectory& tr = (sigma > 0) ? bwd_ : fwd_;
  const std::vector<double>& gs = (sigma > 0) ? gbwd_ : gfwd_;
  double target = g0_ + sigma;

  // Nodes are ordered away from t = 0 with monotone unwrapped g; locate the
  // bracketing pair (g is increasing along bwd_, decreasing along fwd_).
  auto above = [&](std::size_t k) { return (sigma > 0) ? gs[k] >= target : gs[k] <= target; };
  std::size_t lo = 0, hi = gs.size() - 1;
  if (above(0)) {
    hi = 0;
  } else {
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (above(mid)) hi = mid; else lo = mid;
    }
  }
  double ta = (hi == 0) ? 0.0 : tr.nodes[hi - 1].t;
  double tb = tr.nodes[hi].t;
  double ga = (hi == 0) ? g0_ : gs[hi - 1];

  auto g_at = [&](double t) {
    double raw = del(t == 0.0 ? y0_ : tr.eval(t)).g;
    return ga + std::remainder(raw - ga, TWO_PI);
  };
  // Bisection; g is monotone decreasing in t on both sides, so keep the
  // endpoint signs of g - target opposite.
  double fa = ga - target;
  for (int it = 0; it < 80 && std::fabs(tb - ta) > 1e-13; ++it) {
    double tm = 0.5 * (ta + tb);
    double fm = g_at(tm) - target;
    if ((fm > 0) == (fa > 0)) {
      ta = tm;
      fa = fm;
    } else {
      tb = tm;
    }
  }
  return 0.5 * (ta + tb);
}

double SigmaArc::sigma_of_t(double t) {
  if (t == 0.0) return 0.0;
  while (t < t_min()) grow(-1);
  while (t > t_max()) grow(+1);
  const Trajectory& tr = (t < 0) ? bwd_ : fwd_;
  const std::vector<double>& gs = (t < 0) ? gbwd_ : gfwd_;
  // Last node not beyond t (nodes ordered away from 0).
  std::size_t lo = 0, hi = gs.size() - 1;
  auto beyond = [&](std::size_t k) { return (t < 0) ? tr.nodes[k].t < t : tr.nodes[k].t > t; };
  if (!beyond(hi)) {
    lo = hi;
  } else {
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (beyond(mid)) hi = mid; else lo = mid;
    }
  }
  double raw = del(tr.eval(t)).g;
  return gs[lo] + std::remainder(raw - gs[lo], TWO_PI) - g0_;
}

Vec4 SigmaArc::state(double t) const {
  if (t == 0.0) return y0_;
  const Trajectory& tr = (t < 0) ? bwd_ : fwd_;
  return tr.eval(t);
}

Delaunay SigmaArc::elements(double t) const { return del(state(t)); }

namespace {

// Oriented time integral of d_G DeltaH_circ between two block boundaries;
// equals the sigma integral of the reparameterized alpha integrand.
double block_W(SigmaArc& arc, double t_a, double t_b, const MelnikovConfig& mcfg,
               const Params& prm) {
  auto f = [&](double t) { return dG_delta_h_circ(arc.elements(t), prm); };
  return adaptive_gk<double>(f, t_a, t_b, mcfg.quad_rel_tol, mcfg.quad_abs_tol);
}

// Oriented time integral of DeltaH_ell^+ e^{it} between block boundaries.
Complex block_H(SigmaArc& arc, double t_a, double t_b, const MelnikovConfig& mcfg,
                const Params& prm) {
  auto f = [&](double t) {
    return delta_h_ell_harmonic(arc.elements(t), prm) * std::polar(1.0, t);
  };
  return adaptive_gk<Complex>(f, t_a, t_b, mcfg.quad_rel_tol, mcfg.quad_abs_tol);
}

}  // namespace

double nu(const PeriodicOrbit& po, const Params& prm, const IntegratorConfig& cfg,
          const MelnikovConfig& mcfg) {
  Vec4 y0 = section_lift(SectionPoint{po.x0, 0.0, po.J, po.sign}, prm);
  SigmaArc arc(y0, prm, cfg);
  double t1 = arc.t_of_sigma(TWO_PI);
  return 1.0 - (prm.mu / TWO_PI) * block_W(arc, 0.0, t1, mcfg, prm);
}

AlphaTail alpha_tail(SigmaArc& arc, double nu_val, int dir, const Params& prm,
                     const MelnikovConfig& mcfg) {
  double delta = TWO_PI * (nu_val - 1.0);
  AlphaTail out;
  double sum = 0.0, best = 1e300;
  double t_a = 0.0;
  for (int k = 0; k < mcfg.max_blocks; ++k) {
    double t_b = arc.t_of_sigma(dir * TWO_PI * (k + 1));
    double inc = prm.mu * block_W(arc, t_a, t_b, mcfg, prm) + dir * delta;
    sum += inc;
    out.partial.push_back(sum);
    out.N_used = k + 1;
    out.tail = std::fabs(inc);
    best = std::min(best, out.tail);
    if (k + 1 >= mcfg.min_blocks && out.tail <= mcfg.tail_tol) {
      out.value = sum;
      return out;
    }
    if (k > 8 && out.tail > 100.0 * best + mcfg.tail_tol)
      throw NumericalError("alpha_tail: increments diverge before reaching tolerance");
    t_a = t_b;
  }
  throw NumericalError("alpha_tail: no convergence within the block budget");
}

MelnikovRecord melnikov_record(const PeriodicOrbit& po, const HomoclinicChannelRecord& hc,
                               const Params& prm, const IntegratorConfig& cfg,
                               const MelnikovConfig& mcfg) {
  MelnikovRecord rec;
  rec.J = hc.J;
  rec.i = hc.i;
  rec.nu = nu(po, prm, cfg, mcfg);

  double T = po.period;  // exact geometric ratio of the periodic counter-terms
  if (std::abs(1.0 - std::polar(1.0, T)) < 1e-6)
    throw NumericalError("melnikov_record: resonant denominator 1 - e^{i 2 pi nu}");

  Vec4 yz = section_lift(hc.z, prm);
  SigmaArc arc(yz, prm, cfg);

  double delta = TWO_PI * (rec.nu - 1.0);
  double tail_alpha = 0.0;

  // One sweep per sigma direction: alpha increments (forward side only) and
  // the c_k = G_k e^{ikT} sequences, whose limits are the periodic
  // counter-term amplitudes.
  std::array<std::vector<Complex>, 2> cseq;  // [0]: blocks k >= 0, [1]: k <= -1
  double tail_c = 0.0;
  for (int side = 0; side < 2; ++side) {
    double sum = 0.0, best = 1e300;
    double best_c = 1e300;
    int best_c_idx = -1;
    bool alpha_done = (side == 1), c_done = false;
    double t_near = 0.0;  // block boundary nearer sigma = 0
    for (int idx = 0; idx < mcfg.max_blocks; ++idx) {
      int kk = (side == 0) ? idx : -1 - idx;  // block [2 pi kk, 2 pi (kk+1)]
      double t_far = arc.t_of_sigma(TWO_PI * ((side == 0) ? kk + 1 : kk));
      double tb0 = (side == 0) ? t_near : t_far;  // t(2 pi kk)
      double tb1 = (side == 0) ? t_far : t_near;  // t(2 pi (kk+1))

      if (!alpha_done) {
        double inc = prm.mu * block_W(arc, tb0, tb1, mcfg, prm) + delta;
        sum += inc;
        double ai = std::fabs(inc);
        tail_alpha = ai;
        if (ai < best) {
          best = ai;
          best_a_idx = idx;
        }
        if (idx + 1 >= mcfg.min_blocks && ai <= mcfg.tail_tol) alpha_done = true;
        // Double-loop channels revisit the orbit's neighborhood mid-way, so
        // the increments may rise again for dozens of blocks before the
        // true tail; only a long stall means the floor is unreachable.
        if (idx - best_a_idx > kStallLeash)
          throw NumericalError("melnikov_record: alpha increments stalled above tolerance");
      }
      if (!c_done) {
        Complex ck = block_H(arc, tb0, tb1, mcfg, prm) * std::polar(1.0, kk * T);
        cseq[side].push_back(ck);
        std::size_t n = cseq[side].size();
        if (n >= 2) {
          // Increment of the B_out partial sum contributed by this block.
          double dc = prm.mu * std::abs(cseq[side][n - 1] - cseq[side][n - 2]);
          if (dc < best_c) {
            best_c = dc;
            best_c_idx = (int)n - 1;
          }
          if ((int)n >= mcfg.min_blocks && dc <= 0.1 * mcfg.tail_tol) {
            c_done = true;
          } else if ((int)n - 1 - best_c_idx > kStallLeash) {
            // Roundoff amplification along the orbit has overtaken the
            // geometric decay; salvage the sequence up to its best point
            // if that already sits near the tolerance.
            if (best_c > 10.0 * mcfg.tail_tol)
              throw NumericalError("melnikov_record: B tail floor above tolerance");
            cseq[side].resize(best_c_idx + 1);
            c_done = true;
          }
          if (c_done) tail_c = std::max(tail_c, best_c);
        }
      }
      if (alpha_done && c_done) break;
      t_near = t_far;
      if (idx + 1 == mcfg.max_blocks)
        throw NumericalError("melnikov_record: block budget exhausted");
    }
    if (side == 0) {
      rec.alpha_plus = sum;
      rec.alpha = 2.0 * sum;
    }
    rec.N_used = std::max(rec.N_used, (int)cseq[side].size());
  }

  Complex C_plus = geometric_limit(cseq[0]);
  Complex C_minus = geometric_limit(cseq[1]);

  Complex S(0.0, 0.0);
  for (std::size_t k = 0; k < cseq[0].size(); ++k)
    S += (cseq[0][k] - C_plus) * std::polar(1.0, -double(k) * T);
  for (std::size_t k = 0; k < cseq[1].size(); ++k)
    S += (cseq[1][k] - C_minus) * std::polar(1.0, (double(k) + 1.0) * T);

  Complex i_mu(0.0, prm.mu);
  Complex eiT = std::polar(1.0, T);
  rec.B_out = -i_mu * S;
  rec.B_in = -i_mu * eiT * (C_minus - C_plus) / (1.0 - eiT);
  rec.B = rec.B_in + rec.B_out;
  rec.tail_estimate = std::max(tail_alpha, tail_c);
  return rec;
}

TimeShiftTable time_shifts(const PeriodicOrbit& po, const HomoclinicChannelRecord& hc,
                           int n_blocks, const Params& prm, const IntegratorConfig& cfg,
                           int samples_per_block) {
  Vec4 y_po = section_lift(SectionPoint{po.x0, 0.0, po.J, po.sign}, prm);
  Vec4 y_z = section_lift(hc.z, prm);
  SigmaArc po_arc(y_po, prm, cfg);
  SigmaArc gamma_arc(y_z, prm, cfg);

  // Anchor the periodic orbit at its point with the pericenter phase of z.
  double dg = std::remainder(gamma_arc.g0() - po_arc.g0(), TWO_PI);
  Vec4 y_a = po_arc.state(po_arc.t_of_sigma(dg));
  SigmaArc lambda_arc(y_a, prm, cfg);

  TimeShiftTable tab;
  int m = n_blocks * samples_per_block;
  for (int j = -m; j <= m; ++j) {
    double sigma = TWO_PI * j / samples_per_block;
    tab.sigma.push_back(sigma);
    tab.lambda_tilde.push_back(lambda_arc.t_of_sigma(sigma));
    tab.gamma_tilde.push_back(gamma_arc.t_of_sigma(sigma));
  }
  return tab;
}

double sigma0_sq(const Complex& B_a, double alpha_a, const Complex& B_b, double alpha_b,
                 double theta) {
  Complex ea = std::polar(1.0, theta + alpha_a);
  Complex eb = std::polar(1.0, theta + alpha_b);
  Complex Ee = 0.5 * (ea + eb);
  Complex EM = 0.5 * (B_a + B_b);
  Complex den = 1.0 - Ee;
  if (std::abs(den) < 1e-8)
    throw NumericalError("sigma0_sq: degenerate phase mean, |1 - E e^{i beta}| < 1e-8");
  Complex ta = B_a - EM * (1.0 - ea) / den;
  Complex tb = B_b - EM * (1.0 - eb) / den;
  return 2.0 * 0.5 * (std::norm(ta) + std::norm(tb));
}

VarianceSurface sigma0_surface(const std::vector<MelnikovRecord>& rec_a,
                               const std::vector<MelnikovRecord>& rec_b,
                               const std::vector<double>& theta_grid) {
  if (rec_a.size() != rec_b.size())
    throw NumericalError("sigma0_surface: record sets differ in size");
  VarianceSurface surf;
  surf.pair = {rec_a.empty() ? 0 : rec_a.front().i, rec_b.empty() ? 0 : rec_b.front().i};
  surf.theta = theta_grid;
  surf.value.resize((Eigen::Index)rec_a.size(), (Eigen::Index)theta_grid.size());
  for (std::size_t r = 0; r < rec_a.size(); ++r) {
    if (rec_a[r].J != rec_b[r].J)
      throw NumericalError("sigma0_surface: J grids not aligned");
    surf.J.push_back(rec_a[r].J);
    for (std::size_t c = 0; c < theta_grid.size(); ++c) {
      double v;
      try {
        v = sigma0_sq(rec_a[r].B, rec_a[r].alpha, rec_b[r].B, rec_b[r].alpha, theta_grid[c]);
      } catch (const NumericalError&) {
        surf.degenerate.push_back({(int)r, (int)c});
        v = std::numeric_limits<double>::quiet_NaN();
      }
      surf.value((Eigen::Index)r, (Eigen::Index)c) = v;
    }
  }
  return surf;
}

std::vector<Ansatz2Node> ansatz2_check(const std::vector<MelnikovRecord>& rec_a,
                                       const std::vector<MelnikovRecord>& rec_b,
                                       const std::vector<double>& theta_grid,
                                       const Params& prm) {
  VarianceSurface surf = sigma0_surface(rec_a, rec_b, theta_grid);
  std::vector<Ansatz2Node> out;
  for (std::size_t r = 0; r < rec_a.size(); ++r) {
    Ansatz2Node nd;
    nd.J = rec_a[r].J;
    double amax = std::max(std::fabs(rec_a[r].alpha), std::fabs(rec_b[r].alpha));
    nd.alpha_margin = 100.0 * prm.mu - amax;
    nd.alpha_bound_ok = nd.alpha_margin >= 0.0;
    nd.alpha_gap = std::fabs(rec_a[r].alpha - rec_b[r].alpha);
    nd.alpha_gap_ok = nd.alpha_gap > 1e-9;
    nd.min_sigma0_sq = surf.value.row((Eigen::Index)r).minCoeff();
    nd.variance_ok = nd.min_sigma0_sq > 0.0 && std::isfinite(nd.min_sigma0_sq);
    out.push_back(nd);
  }
  return out;
}

void write_melnikov_csv(std::ostream& os, const std::vector<MelnikovRecord>& recs) {
  os << "J,i,nu,alpha,Re_Bin,Im_Bin,Re_Bout,Im_Bout,Re_B,Im_B,N_used\n";
  os.precision(16);
  for (const auto& r : recs) {
    os << r.J << ',' << r.i << ',' << r.nu << ',' << r.alpha << ',' << r.B_in.real() << ','
       << r.B_in.imag() << ',' << r.B_out.real() << ',' << r.B_out.imag() << ',' << r.B.real()
       << ',' << r.B.imag() << ',' << r.N_used << '\n';
  }
}

void write_variance_csv(std::ostream& os, const VarianceSurface& surf) {
  os << "J,theta,sigma0_sq\n";
  os.precision(16);
  for (std::size_t r = 0; r < surf.J.size(); ++r)
    for (std::size_t c = 0; c < surf.theta.size(); ++c)
      os << surf.J[r] << ',' << surf.theta[c] << ','
         << surf.value((Eigen::Index)r, (Eigen::Index)c) << '\n';
}

}  // namespace rtbp
