#pragma once

// Geometry core for the manifold of nonzero complex numbers, identified with
// R+ x SO(2) through the polar form. Points are stored as (log magnitude,
// wrapped phase), which makes the metric Euclidean and the radial geodesic
// exactly linear.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace surreal {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Floor applied to zero magnitudes; the manifold excludes r = 0.
inline constexpr double kMagnitudeFloor = 1e-12;

/// Wraps an angle to the half-open interval (-pi, pi]; wrap_angle(-pi) == pi.
inline double wrap_angle(double x) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("wrap_angle: non-finite input");
  }
  double r = std::remainder(x, kTwoPi);  // exact, lands in [-pi, pi]
  if (r <= -kPi) {
    r = kPi;
  }
  return r;
}

template <class T>
struct BasicPolar {
  T log_r{};
  T theta{};
};

/// A point of R+ x SO(2): log_r is finite, theta is wrapped to (-pi, pi].
using PolarComplex = BasicPolar<double>;

inline PolarComplex make_polar(double log_r, double theta) {
  if (!std::isfinite(log_r)) {
    throw std::invalid_argument("make_polar: non-finite log_r");
  }
  return {log_r, wrap_angle(theta)};
}

/// An element of the group (R \ {0}) x SO(2) acting on the manifold.
/// log_scale is the log of the *effective* scale (the square of the raw
/// scalar), the quantity that adds under composition and under the action.
struct GroupElement {
  double log_scale{};
  double rot{};
};

inline GroupElement identity_element() { return {0.0, 0.0}; }

inline GroupElement compose(const GroupElement& g, const GroupElement& h) {
  return {g.log_scale + h.log_scale, wrap_angle(g.rot + h.rot)};
}

inline GroupElement inverse(const GroupElement& g) {
  return {-g.log_scale, wrap_angle(-g.rot)};
}

/// Polar form of a + ib. Magnitudes below eps are floored at eps, and the
/// origin gets theta = 0, so the map is total.
inline PolarComplex from_cartesian(double a, double b,
                                   double eps = kMagnitudeFloor) {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("from_cartesian: non-finite input");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("from_cartesian: eps must be positive");
  }
  const double r = std::hypot(a, b);
  const double theta = (a == 0.0 && b == 0.0) ? 0.0 : std::atan2(b, a);
  return {std::log(std::max(r, eps)), wrap_angle(theta)};
}

inline std::pair<double, double> to_cartesian(const PolarComplex& z) {
  const double r = std::exp(z.log_r);
  return {r * std::cos(z.theta), r * std::sin(z.theta)};
}

/// Geodesic distance sqrt(dlog_r^2 + 2 dtheta^2). The factor 2 is the squared
/// Frobenius norm of the skew generator behind a unit angle step on SO(2).
inline double distance(const PolarComplex& z1, const PolarComplex& z2) {
  const double dl = z2.log_r - z1.log_r;
  const double dt = wrap_angle(z2.theta - z1.theta);
  return std::sqrt(dl * dl + 2.0 * (dt * dt));
}

/// Left action: scales the magnitude by the effective scale and rotates the
/// phase. Isometric for every g.
inline PolarComplex act(const GroupElement& g, const PolarComplex& z) {
  return {z.log_r + g.log_scale, wrap_angle(z.theta + g.rot)};
}

/// The unique group element with act(g, z1) == z2 (transitivity).
inline GroupElement group_between(const PolarComplex& z1,
                                  const PolarComplex& z2) {
  return {z2.log_r - z1.log_r, wrap_angle(z2.theta - z1.theta)};
}

/// Point at parameter t on the geodesic from z1 to z2; the angular leg takes
/// the shortest arc. Endpoints are exact.
inline PolarComplex geodesic(const PolarComplex& z1, const PolarComplex& z2,
                             double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("geodesic: t must lie in [0, 1]");
  }
  if (t == 0.0) return z1;
  if (t == 1.0) return z2;
  const double lr = (1.0 - t) * z1.log_r + t * z2.log_r;
  const double th = wrap_angle(z1.theta + t * wrap_angle(z2.theta - z1.theta));
  return {lr, th};
}

}  // namespace surreal
