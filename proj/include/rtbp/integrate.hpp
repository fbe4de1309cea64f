#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rtbp/dynamics.hpp"
#include "rtbp/types.hpp"

namespace rtbp {

struct IntegratorConfig {
  double abs_tol = 1e-14;
  double rel_tol = 1e-14;
  double max_step = 0.05;          // also bounds the dense-output error
  double init_step = 1e-3;
  double collision_radius = 1e-3;  // abort if a primary gets this close
  double max_time = 2.0e4;         // per-call time-span guard
  long max_steps = 20000000;
};

struct TrajNode {
  double t;
  Vec4 y;   // state
  Vec4 f;   // y'
  Vec4 df;  // y'' = A(y) y'
};

// Dense trajectory: accepted RKF78 nodes with first and second derivatives,
// evaluated in between by two-point quintic Hermite (O(h^6) local error).
class Trajectory {
 public:
  std::vector<TrajNode> nodes;

  double t_begin() const { return nodes.front().t; }
  double t_end() const { return nodes.back().t; }
  bool forward() const { return nodes.back().t >= nodes.front().t; }

  // Index of the segment [i, i+1] containing t.
  std::size_t segment(double t) const;
  Vec4 eval(double t) const;
  Vec4 eval_derivative(double t) const;
};

// Called after each accepted step; return false to stop the integration.
using StepObserver = std::function<bool(const TrajNode& prev, const TrajNode& cur)>;

// Flow of the rotating-frame vector field from time 0 to time t (t may be
// negative). Adaptive RKF78 with per-component abs/rel error control and a
// step-size cap; throws CollisionError / NumericalError on guard violations.
Vec4 flow(const Vec4& y0, double t, const Params& prm, const IntegratorConfig& cfg,
          Trajectory* record = nullptr, const StepObserver& obs = {});

struct VariationalState {
  Vec4 y;
  Mat4 Phi;  // d(flow)/d(y0)
};

// Flow together with the fundamental matrix solution of the variational
// equations, Phi(0) = I (or Phi0 if given).
VariationalState flow_variational(const Vec4& y0, double t, const Params& prm,
                                  const IntegratorConfig& cfg,
                                  const Mat4* Phi0 = nullptr,
                                  Trajectory* record = nullptr,
                                  const StepObserver& obs = {});

// Event: crossing of a coordinate level y[coord] = value.
// direction +1: increasing crossings only, -1 decreasing, 0 both.
struct CrossingSpec {
  int coord = 1;        // default: the section {y = 0}
  double value = 0.0;
  int direction = 0;
  double tangency_threshold = 1e-8;  // |d/dt| below this flags a near-tangency
};

struct Crossing {
  double t;
  Vec4 y;
  double speed;      // d/dt of the event function at the crossing
  bool tangential;   // |speed| below the tangency threshold
};

// Crossing candidates from the dense output only (no re-integration):
// cheap scan used for counting and tangency screening.
std::vector<Crossing> approx_crossings(const Trajectory& traj, const CrossingSpec& spec);

// All crossings inside the recorded trajectory, in time order. Roots are
// bracketed on the dense output (with interior sampling against grazing
// pairs), then polished by re-integration + Newton to |event| <= 1e-12.
std::vector<Crossing> find_crossings(const Trajectory& traj, const CrossingSpec& spec,
                                     const Params& prm, const IntegratorConfig& cfg,
                                     int max_count = -1);

// Integrate from y0 until the k-th crossing (k >= 1) of the given spec in
// the given time direction (sign of t_dir). Returns the crossing and, if
// record != nullptr, the trajectory up to it.
std::optional<Crossing> flow_to_crossing(const Vec4& y0, const CrossingSpec& spec, int k,
                                         double t_dir, const Params& prm,
                                         const IntegratorConfig& cfg,
                                         Trajectory* record = nullptr);

}  // namespace rtbp
