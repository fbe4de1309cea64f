#include "rtbp/integrate.hpp"

#include <boost/numeric/odeint/algebra/vector_space_algebra.hpp>
#include <boost/numeric/odeint/external/eigen/eigen_algebra.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include <algorithm>
#include <cmath>

namespace rtbp {

namespace {

// Quintic (two-point Taylor) Hermite interpolation from node values,
// first and second derivatives.
Vec4 hermite(const TrajNode& n0, const TrajNode& n1, double t, bool derivative) {
  const double h = n1.t - n0.t;
  const double s = (t - n0.t) / h;
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  if (!derivative) {
    const double H0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    const double H1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    const double H2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    const double H3 = 0.5 * (s3 - 2.0 * s4 + s5);
    const double H4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    const double H5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    return H0 * n0.y + (h * H1) * n0.f + (h * h * H2) * n0.df +
           (h * h * H3) * n1.df + (h * H4) * n1.f + H5 * n1.y;
  }
  const double d0 = (-30.0 * s2 + 60.0 * s3 - 30.0 * s4) / h;
  const double d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
  const double d2 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4) * h;
  const double d3 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4) * h;
  const double d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
  const double d5 = (30.0 * s2 - 60.0 * s3 + 30.0 * s4) / h;
  return d0 * n0.y + d1 * n0.f + d2 * n0.df + d3 * n1.df + d4 * n1.f + d5 * n1.y;
}

TrajNode make_node(double t, const Vec4& y, const Params& prm) {
  Vec4 f = vector_field(y, prm);
  return TrajNode{t, y, f, field_jacobian(y, prm) * f};
}

void check_guards(const Vec4& y, const IntegratorConfig& cfg, const Params& prm) {
  const double r1 = std::hypot(y[0] - (1.0 - prm.mu), y[1]);
  const double r2 = std::hypot(y[0] + prm.mu, y[1]);
  if (r1 < cfg.collision_radius || r2 < cfg.collision_radius)
    throw CollisionError("flow: trajectory within collision radius of a primary");
}

// Error-controlled RKF78 driver over an Eigen state of dimension N.
// step_cb(prev_t, prev_y, t, y) is invoked after each accepted step and may
// return false to stop early. Returns the final time actually reached.
template <int N, typename Sys, typename Cb>
double drive(const Sys& sys, Eigen::Matrix<double, N, 1>& x, double t0, double t1,
             const IntegratorConfig& cfg, const Cb& step_cb) {
  using State = Eigen::Matrix<double, N, 1>;
  namespace ode = boost::numeric::odeint;
  ode::runge_kutta_fehlberg78<State, double, State, double, ode::vector_space_algebra>
      stepper;
  if (std::abs(t1 - t0) > cfg.max_time)
    throw NumericalError("flow: requested span exceeds max_time");
  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  double t = t0;
  double dt = dir * std::min(cfg.init_step, cfg.max_step);
  long steps = 0;
  while ((t1 - t) * dir > 0.0) {
    if (std::abs(dt) > std::abs(t1 - t)) dt = t1 - t;
    State xerr, xold = x, xtry = x;
    stepper.do_step(sys, xtry, t, dt, xerr);
    double err = 0.0;
    for (int i = 0; i < N; ++i) {
      double sc = cfg.abs_tol +
                  cfg.rel_tol * std::max(std::abs(xold[i]), std::abs(xtry[i]));
      err = std::max(err, std::abs(xerr[i]) / sc);
    }
    if (err <= 1.0) {
      double tp = t;
      t += dt;
      x = xtry;
      if (!step_cb(tp, xold, t, x)) return t;
    }
    double fac = 0.9 * std::pow(std::max(err, 1e-30), -1.0 / 8.0);
    dt *= std::clamp(fac, 0.2, 5.0);
    if (std::abs(dt) > cfg.max_step) dt = dir * cfg.max_step;
    if (std::abs(dt) < 1e-14 * std::max(1.0, std::abs(t)))
      throw NumericalError("flow: step size underflow at t=" + std::to_string(t));
    if (++steps > cfg.max_steps)
      throw NumericalError("flow: step budget exhausted");
  }
  return t;
}

}  // namespace

std::size_t Trajectory::segment(double t) const {
  const bool fwd = forward();
  auto cmp = [fwd](const TrajNode& n, double tt) { return fwd ? n.t < tt : n.t > tt; };
  auto it = std::lower_bound(nodes.begin(), nodes.end(), t, cmp);
  std::size_t i = (it == nodes.begin()) ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
  return std::min(i, nodes.size() - 2);
}

Vec4 Trajectory::eval(double t) const {
  std::size_t i = segment(t);
  return hermite(nodes[i], nodes[i + 1], t, false);
}

Vec4 Trajectory::eval_derivative(double t) const {
  std::size_t i = segment(t);
  return hermite(nodes[i], nodes[i + 1], t, true);
}

Vec4 flow(const Vec4& y0, double t, const Params& prm, const IntegratorConfig& cfg,
          Trajectory* record, const StepObserver& obs) {
  auto sys = [&prm](const Vec4& y, Vec4& dydt, double) { dydt = vector_field(y, prm); };
  Vec4 x = y0;
  const bool track = record || obs;
  TrajNode prev;
  if (track) prev = make_node(0.0, y0, prm);
  if (record) {
    record->nodes.clear();
    record->nodes.push_back(prev);
  }
  drive<4>(sys, x, 0.0, t, cfg, [&](double, const Vec4&, double tc, const Vec4& yc) {
    check_guards(yc, cfg, prm);
    if (!track) return true;
    TrajNode cur = make_node(tc, yc, prm);
    bool keep = obs ? obs(prev, cur) : true;
    if (record) record->nodes.push_back(cur);
    prev = cur;
    return keep;
  });
  return x;
}

VariationalState flow_variational(const Vec4& y0, double t, const Params& prm,
                                  const IntegratorConfig& cfg, const Mat4* Phi0,
                                  Trajectory* record, const StepObserver& obs) {
  using State = Eigen::Matrix<double, 20, 1>;
  auto sys = [&prm](const State& s, State& ds, double) {
    Vec4 y = s.head<4>();
    Vec4 f = vector_field(y, prm);
    Mat4 A = field_jacobian(y, prm);
    Eigen::Map<const Mat4> Phi(s.data() + 4);
    ds.head<4>() = f;
    Eigen::Map<Mat4>(ds.data() + 4) = A * Phi;
  };
  State x;
  x.head<4>() = y0;
  Eigen::Map<Mat4>(x.data() + 4) = Phi0 ? *Phi0 : Mat4::Identity();
  if (record) {
    record->nodes.clear();
    record->nodes.push_back(make_node(0.0, y0, prm));
  }
  const bool track = record || obs;
  TrajNode prev;
  if (track) prev = make_node(0.0, y0, prm);
  drive<20>(sys, x, 0.0, t, cfg, [&](double, const State&, double tc, const State& sc) {
    Vec4 yc = sc.head<4>();
    check_guards(yc, cfg, prm);
    if (!track) return true;
    TrajNode cur = make_node(tc, yc, prm);
    bool keep = obs ? obs(prev, cur) : true;
    if (record) record->nodes.push_back(cur);
    prev = cur;
    return keep;
  });
  VariationalState out;
  out.y = x.head<4>();
  out.Phi = Eigen::Map<Mat4>(x.data() + 4);
  return out;
}

namespace {

// Root-polish a crossing located near t_est inside segment [n0, n1]:
// re-integrate from the segment's start node and Newton-correct in time.
Crossing polish_crossing(const TrajNode& n0, double t_est, const CrossingSpec& spec,
                         const Params& prm, const IntegratorConfig& cfg) {
  IntegratorConfig mini = cfg;
  mini.init_step = std::max(1e-6, std::abs(t_est - n0.t) * 0.5);
  Vec4 y = (std::abs(t_est - n0.t) > 0) ? flow(n0.y, t_est - n0.t, prm, mini) : n0.y;
  double tc = t_est;
  double phi = y[spec.coord] - spec.value;
  double fd = vector_field(y, prm)[spec.coord];
  for (int it = 0; it < 8 && std::abs(phi) > 1e-13; ++it) {
    double dt = -phi / fd;
    mini.init_step = std::max(1e-12, std::abs(dt));
    y = flow(y, dt, prm, mini);
    tc += dt;
    phi = y[spec.coord] - spec.value;
    fd = vector_field(y, prm)[spec.coord];
  }
  if (std::abs(phi) > 1e-12)
    throw NumericalError("crossing polish failed, residual=" + std::to_string(phi));
  return Crossing{tc, y, fd, std::abs(fd) < spec.tangency_threshold};
}

// Crossing candidates inside one segment of dense output (unrefined times).
void scan_segment(const TrajNode& n0, const TrajNode& n1, const CrossingSpec& spec,
                  std::vector<double>& t_out) {
  constexpr int kSamples = 6;
  double ts[kSamples], ph[kSamples];
  for (int i = 0; i < kSamples; ++i) {
    double s = static_cast<double>(i) / (kSamples - 1);
    ts[i] = n0.t + s * (n1.t - n0.t);
    Vec4 y = (i == 0) ? n0.y : (i == kSamples - 1 ? n1.y : hermite(n0, n1, ts[i], false));
    ph[i] = y[spec.coord] - spec.value;
  }
  for (int i = 0; i + 1 < kSamples; ++i) {
    double a = ph[i], b = ph[i + 1];
    if (a == 0.0) {
      if (i == 0) t_out.push_back(ts[0]);
      continue;
    }
    if (a * b < 0.0) {
      // Bisection on the dense output; cheap and robust, polished later.
      double lo = ts[i], hi = ts[i + 1];
      for (int k = 0; k < 60; ++k) {
        double m = 0.5 * (lo + hi);
        double pm = hermite(n0, n1, m, false)[spec.coord] - spec.value;
        if ((pm < 0) == (a < 0)) lo = m; else hi = m;
      }
      t_out.push_back(0.5 * (lo + hi));
    } else if (i + 1 == kSamples - 1 && b == 0.0) {
      // Root exactly at the segment end: attribute it to this segment.
      t_out.push_back(ts[kSamples - 1]);
    }
  }
}

}  // namespace

std::vector<Crossing> approx_crossings(const Trajectory& traj, const CrossingSpec& spec) {
  std::vector<Crossing> out;
  const bool fwd = traj.forward();
  for (std::size_t i = 0; i + 1 < traj.nodes.size(); ++i) {
    std::vector<double> cand;
    scan_segment(traj.nodes[i], traj.nodes[i + 1], spec, cand);
    for (double tc : cand) {
      if (std::abs(tc - traj.t_begin()) < 1e-12) continue;
      Vec4 y = hermite(traj.nodes[i], traj.nodes[i + 1], tc, false);
      double speed = hermite(traj.nodes[i], traj.nodes[i + 1], tc, true)[spec.coord];
      double dir_speed = fwd ? speed : -speed;
      bool tang = std::abs(speed) < spec.tangency_threshold;
      if (spec.direction != 0 && !tang && dir_speed * spec.direction <= 0.0) continue;
      if (!out.empty() && std::abs(out.back().t - tc) < 1e-9) continue;
      out.push_back(Crossing{tc, y, speed, tang});
    }
  }
  return out;
}

std::vector<Crossing> find_crossings(const Trajectory& traj, const CrossingSpec& spec,
                                     const Params& prm, const IntegratorConfig& cfg,
                                     int max_count) {
  std::vector<Crossing> out;
  const bool fwd = traj.forward();
  for (std::size_t i = 0; i + 1 < traj.nodes.size(); ++i) {
    std::vector<double> cand;
    scan_segment(traj.nodes[i], traj.nodes[i + 1], spec, cand);
    for (double tc : cand) {
      if (std::abs(tc - traj.t_begin()) < 1e-12) continue;  // initial condition
      Crossing c = polish_crossing(traj.nodes[i], tc, spec, prm, cfg);
      double dir_speed = fwd ? c.speed : -c.speed;  // sign of d(event)/d(arc time)
      if (spec.direction != 0 && !c.tangential &&
          dir_speed * spec.direction <= 0.0)
        continue;
      if (!out.empty() && std::abs(out.back().t - c.t) < 1e-9) continue;
      out.push_back(c);
      if (max_count > 0 && static_cast<int>(out.size()) >= max_count) return out;
    }
  }
  return out;
}

std::optional<Crossing> flow_to_crossing(const Vec4& y0, const CrossingSpec& spec, int k,
                                         double t_dir, const Params& prm,
                                         const IntegratorConfig& cfg, Trajectory* record) {
  Trajectory local;
  Trajectory& traj = record ? *record : local;
  int found = 0;
  std::optional<Crossing> hit;
  auto obs = [&](const TrajNode& prev, const TrajNode& cur) {
    std::vector<double> cand;
    scan_segment(prev, cur, spec, cand);
    for (double tc : cand) {
      if (std::abs(tc) < 1e-12) continue;  // don't count the initial condition
      Crossing c = polish_crossing(prev, tc, spec, prm, cfg);
      double dir_speed = (t_dir >= 0) ? c.speed : -c.speed;
      if (spec.direction != 0 && !c.tangential && dir_speed * spec.direction <= 0.0)
        continue;
      if (hit && std::abs(hit->t - c.t) < 1e-9) continue;
      hit = c;
      if (++found >= k) return false;
    }
    return true;
  };
  flow(y0, (t_dir >= 0 ? 1.0 : -1.0) * cfg.max_time, prm, cfg, &traj, obs);
  if (found >= k) return hit;
  return std::nullopt;
}

}  // namespace rtbp
