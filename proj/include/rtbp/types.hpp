#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rtbp {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

// State layout: (x, y, px, py) in the rotating synodic frame.
// Sun (mass 1-mu) sits at (-mu, 0); the small primary (mass mu) at (1-mu, 0).
struct Params {
  double mu = 0.95387536e-3;
};

// Reversal symmetry R(x,y,px,py) = (x,-y,-px,py); conjugates the flow with t -> -t.
inline Vec4 reflect(const Vec4& s) { return Vec4(s[0], -s[1], -s[2], s[3]); }

struct CollisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double wrap_2pi(double a) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double w = std::fmod(a, two_pi);
  if (w < 0) w += two_pi;
  return w;
}

inline constexpr double PI = 3.141592653589793238462643383279;
inline constexpr double TWO_PI = 6.283185307179586476925286766559;

}  // namespace rtbp
