// Built-in fixtures shared by the property checks, the tests and `harpy verify`.
#pragma once

#include "harpy/ground.hpp"
#include "harpy/model.hpp"
#include "harpy/observer.hpp"

#include <random>

namespace harpy {

/// Random configuration and velocity. Joint angles within +-0.6 rad, body
/// attitude uniform-ish, velocities standard normal.
inline RobotState random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> a(-0.6, 0.6);
  RobotState x;
  x.p_B = Vec3(n(rng), n(rng), 1.0 + 0.1 * n(rng));
  x.R_B = so3_exp(Vec3(n(rng), n(rng), n(rng)));
  for (int i = 0; i < 2; ++i) {
    x.gamma_h[i] = a(rng);
    x.phi_h[i] = a(rng);
    x.phi_k[i] = a(rng);
    x.phi_k_dot[i] = n(rng);
  }
  for (int i = 0; i < kDof; ++i) x.v[i] = n(rng);
  return x;
}

// ---------------------------------------------------------------------------
// Frozen dynamics: constant M, no bias, fixed input maps. The momentum is
// exactly p(t) = p(0) + integral of the applied generalized force.

struct FrozenState {
  Vec10 v = Vec10::Zero();
};

class FrozenModel {
 public:
  using State = FrozenState;

  FrozenModel(Mat10 M, Mat10x4 B_j, Mat10x6 B_g) : M_(std::move(M)), B_j_(std::move(B_j)), B_g_(std::move(B_g)) {}

  /// Frozen at the given robot pose.
  static FrozenModel at(const RobotState& x, const ModelParams& p) {
    return FrozenModel(harpy::mass_matrix(x, p), harpy::joint_map(), contact_jacobian(x, p).transpose());
  }

  Mat10 mass_matrix(const State&) const { return M_; }
  Vec10 bias_forces(const State&) const { return Vec10::Zero(); }
  Vec10 velocity(const State& x) const { return x.v; }
  Mat10x4 joint_map(const State&) const { return B_j_; }
  Mat10x6 grf_map(const State&) const { return B_g_; }

  /// Velocity after time t under constant generalized force `tau` from rest.
  State after(const Vec10& tau, double t) const { return {M_.ldlt().solve(tau) * t}; }

 private:
  Mat10 M_;
  Mat10x4 B_j_;
  Mat10x6 B_g_;
};

// ---------------------------------------------------------------------------
// Static single support: left foot pressed into the ground at rest, right
// foot in the air, thrust and hip torques chosen so that the compliant-ground
// force holds the robot in exact equilibrium. Every point stays in the x = 0
// plane; the two thrusters cannot make a pure pitch moment.

struct StaticSupport {
  RobotState state;
  Vec6 u_t = Vec6::Zero();  // world frame
  Vec4 u_j = Vec4::Zero();
  Vec6 u_g = Vec6::Zero();  // ground model force at the snapshot
  Vec10 r_true = Vec10::Zero();  // B_t u_t
  double residual = 0.0;         // |M v_dot| left by the inputs, N
};

inline StaticSupport static_single_support(const ModelParams& p, const GroundParams& g,
                                           double depth = 2e-3, double swing_gamma = -0.25) {
  StaticSupport s;
  RobotState& x = s.state;
  x.gamma_h = Vec2(0.0, swing_gamma);
  const LegFrames f = leg_frames(x, p, Side::Left);
  x.p_B = Vec3(0.0, 0.0, -depth) - f.foot;
  s.u_g = both_feet_grf(x, p, g).u_g;

  // Solve [B_t B_j] [u_t; u_j] = G - B_g u_g for zero acceleration.
  const InputMaps maps = input_mappings(x, p);
  Mat10 B;
  B << maps.B_t, maps.B_j;
  const Vec10 need = gravity_forces(x, p) - maps.B_g * s.u_g;
  const Vec10 u = B.completeOrthogonalDecomposition().solve(need);
  s.u_t = u.head<6>();
  s.u_j = u.tail<4>();
  s.r_true = maps.B_t * s.u_t;
  s.residual = (B * u - need).norm();
  return s;
}

// ---------------------------------------------------------------------------
// Flight: high above the ground, spinning, legs swinging, constant inputs.

struct FlightCase {
  RobotState state;
  Vec6 u_t = Vec6::Zero();
  Vec4 u_j = Vec4::Zero();
  Vec2 u_k = Vec2::Zero();
};

inline FlightCase flight_case() {
  FlightCase c;
  RobotState& x = c.state;
  x.p_B = Vec3(0.0, 0.0, 50.0);
  x.R_B = so3_exp(Vec3(0.1, -0.2, 0.3));
  x.gamma_h = Vec2(0.1, -0.2);
  x.phi_h = Vec2(0.3, -0.1);
  x.phi_k = Vec2(0.2, 0.4);
  x.v << 0.4, -0.2, 1.0, 0.8, -0.5, 0.6, 0.7, -0.9, 1.1, -0.6;
  x.phi_k_dot = Vec2(0.3, -0.2);
  c.u_t << 1.0, 0.5, 20.0, -0.5, 0.2, 19.0;
  c.u_j << 0.02, -0.01, 0.03, 0.01;
  c.u_k << 0.5, -0.5;
  return c;
}

}  // namespace harpy
