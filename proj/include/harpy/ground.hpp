// Compliant flat ground at z = 0: spring-damper normal force with undamped
// rebound and Stribeck friction, gated by foot penetration.
#pragma once

#include "harpy/model.hpp"

#include <cmath>
#include <stdexcept>

namespace harpy {

struct GroundParams {
  double k_gp = 8000.0;  // N/m
  double k_gd = 268.0;   // N s/m
  double mu_s = 0.8;
  double mu_c = 0.64;
  double mu_v = 0.8;     // N s/m
  double v_s = 0.01;     // m/s, Stribeck velocity
  // Sliding speed below which sgn() is replaced by the linear ramp v / v_eps.
  // Zero keeps the exact sign function.
  double v_eps = 0.04;

  void validate() const {
    if (!(k_gp > 0.0)) throw std::invalid_argument("ground: k_gp must be positive");
    if (!(k_gd >= 0.0)) throw std::invalid_argument("ground: k_gd must be non-negative");
    if (!(mu_c > 0.0 && mu_c <= mu_s)) {
      throw std::invalid_argument("ground: require 0 < mu_c <= mu_s");
    }
    if (!(mu_v >= 0.0)) throw std::invalid_argument("ground: mu_v must be non-negative");
    if (!(v_s > 0.0)) throw std::invalid_argument("ground: v_s must be positive");
    if (!(v_eps >= 0.0)) throw std::invalid_argument("ground: v_eps must be non-negative");
  }
};

struct ContactForce {
  Vec6 u_g = Vec6::Zero();  // [left; right], world frame, N
  std::array<bool, 2> contact{false, false};

  Vec3 foot(Side s) const { return u_g.segment<3>(3 * index(s)); }
};

namespace detail {

/// sgn with sgn(0) = 0; optionally ramped inside |v| < eps.
inline double friction_sign(double v, double eps) {
  if (eps > 0.0 && std::abs(v) < eps) return v / eps;
  return static_cast<double>((v > 0.0) - (v < 0.0));
}

inline double stribeck(double v, double f_z, const GroundParams& g) {
  const double coeff = g.mu_c + (g.mu_s - g.mu_c) * std::exp(-(v * v) / (g.v_s * g.v_s));
  return -coeff * f_z * friction_sign(v, g.v_eps) - g.mu_v * v;
}

}  // namespace detail

/// Ground reaction on one point foot. Zero above the ground; the normal force
/// is never attractive.
inline Vec3 grf(const Vec3& foot_pos, const Vec3& foot_vel, const GroundParams& g) {
  if (foot_pos.z() > 0.0) return Vec3::Zero();
  const double damping = foot_vel.z() > 0.0 ? 0.0 : g.k_gd;
  const double f_z = std::max(0.0, -g.k_gp * foot_pos.z() - damping * foot_vel.z());
  return {detail::stribeck(foot_vel.x(), f_z, g), detail::stribeck(foot_vel.y(), f_z, g), f_z};
}

inline ContactForce both_feet_grf(const FramePositions& fk, const GroundParams& g) {
  ContactForce out;
  for (Side s : {Side::Left, Side::Right}) {
    const int i = index(s);
    out.contact[i] = fk.foot[i].z() <= 0.0;
    out.u_g.segment<3>(3 * i) = grf(fk.foot[i], fk.foot_vel[i], g);
  }
  return out;
}

inline ContactForce both_feet_grf(const RobotState& x, const ModelParams& p,
                                  const GroundParams& g) {
  return both_feet_grf(forward_kinematics(x, p), g);
}

}  // namespace harpy
