// Kinematics and Lagrangian dynamics of the simplified thruster-assisted biped.
//
// Generalized velocity v = [p_dot_B (world, 3); omega_B (body frame, 3);
// gamma_dot_L; gamma_dot_R; phi_dot_L; phi_dot_R]. Knees are kinematic: their
// angles and rates live in RobotState but outside v, and their motion is
// prescribed through a knee acceleration input. Shins and feet are massless.
//
// Leg chain (left side, body frame):
//   body --l1--> pelvis [Rx(gamma_h)] --l2--> hip [Ry(phi_h)] --l3--> knee
//   [Ry(phi_k)] --l4--> point foot
// The right leg uses the same chain with link y components negated.
#pragma once

#include "harpy/types.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace harpy {

inline Vec3 mirror_y(const Vec3& a) { return {a.x(), -a.y(), a.z()}; }

struct ModelParams {
  // Left-leg link offsets, m.
  Vec3 l1{0.0, 0.1, -0.1};
  Vec3 l2{0.0, 0.5, 0.0};
  Vec3 l3{0.0, 0.0, -0.3};
  Vec3 l4{0.0, 0.1, 0.0};
  double m_B = 2.0;
  double m_H = 0.5;
  double m_K = 0.5;
  double I_B = 1e-3;
  double I_H = 1e-4;
  double I_K = 1e-4;
  // Left thruster mount in the body frame; the right one mirrors y.
  Vec3 thruster_offset{0.0, 0.15, 0.2};
  Vec3 gravity{0.0, 0.0, -9.81};

  double total_mass() const { return m_B + 2.0 * (m_H + m_K); }

  /// Link offset i in 1..4 for the given side.
  Vec3 link(int i, Side s) const {
    const Vec3* table[4] = {&l1, &l2, &l3, &l4};
    const Vec3& l = *table[i - 1];
    return s == Side::Left ? l : mirror_y(l);
  }

  Vec3 thruster(Side s) const {
    return s == Side::Left ? thruster_offset : mirror_y(thruster_offset);
  }

  void validate() const {
    if (!(m_B > 0.0 && m_H > 0.0 && m_K > 0.0)) {
      throw std::invalid_argument("model: masses must be positive");
    }
    if (!(I_B > 0.0 && I_H > 0.0 && I_K > 0.0)) {
      throw std::invalid_argument("model: inertias must be positive");
    }
    for (const Vec3* v : {&l1, &l2, &l3, &l4, &thruster_offset, &gravity}) {
      if (!v->allFinite()) throw std::invalid_argument("model: non-finite vector parameter");
    }
  }
};

struct RobotState {
  Vec3 p_B = Vec3::Zero();
  Mat3 R_B = Mat3::Identity();
  Vec2 gamma_h = Vec2::Zero();  // hip frontal [L, R], rad
  Vec2 phi_h = Vec2::Zero();    // hip sagittal [L, R], rad
  Vec2 phi_k = Vec2::Zero();    // knee sagittal [L, R], rad
  Vec10 v = Vec10::Zero();
  Vec2 phi_k_dot = Vec2::Zero();

  Vec3 linear_velocity() const { return v.segment<3>(dof::kLinear); }
  Vec3 angular_velocity() const { return v.segment<3>(dof::kAngular); }

  bool finite() const {
    return p_B.allFinite() && R_B.allFinite() && gamma_h.allFinite() && phi_h.allFinite() &&
           phi_k.allFinite() && v.allFinite() && phi_k_dot.allFinite();
  }
};

/// Leg frame origins and axes, body frame, relative to the body origin.
struct LegFrames {
  Vec3 pelvis, hip, knee, foot;
  Mat3 R_pelvis, R_thigh, R_shank;
  Vec3 frontal_axis, hip_axis, knee_axis;
};

inline LegFrames leg_frames(const ModelParams& p, Side s, double gamma, double phi_h,
                            double phi_k) {
  LegFrames f;
  f.frontal_axis = Vec3::UnitX();
  f.pelvis = p.link(1, s);
  f.R_pelvis = rot_x(gamma);
  f.hip = f.pelvis + f.R_pelvis * p.link(2, s);
  f.hip_axis = f.R_pelvis * Vec3::UnitY();
  f.R_thigh = f.R_pelvis * rot_y(phi_h);
  f.knee = f.hip + f.R_thigh * p.link(3, s);
  f.knee_axis = f.R_thigh * Vec3::UnitY();
  f.R_shank = f.R_thigh * rot_y(phi_k);
  f.foot = f.knee + f.R_shank * p.link(4, s);
  return f;
}

inline LegFrames leg_frames(const RobotState& x, const ModelParams& p, Side s) {
  const int i = index(s);
  return leg_frames(p, s, x.gamma_h[i], x.phi_h[i], x.phi_k[i]);
}

/// World positions and velocities of the named points.
struct FramePositions {
  std::array<Vec3, 2> hip, knee, foot, thruster;
  std::array<Vec3, 2> hip_vel, knee_vel, foot_vel, thruster_vel;
  Vec3 com, com_vel;
};

/// Positions by chain composition, velocities by recursive propagation of
/// angular and linear velocity down each leg (knee rates included).
inline FramePositions forward_kinematics(const RobotState& x, const ModelParams& p) {
  FramePositions out;
  const Mat3& R = x.R_B;
  const Vec3 w_body = R * x.angular_velocity();
  const Vec3 v_body = x.linear_velocity();
  const double m = p.total_mass();
  out.com = p.m_B * x.p_B;
  out.com_vel = p.m_B * v_body;
  for (Side s : {Side::Left, Side::Right}) {
    const int i = index(s);
    const LegFrames f = leg_frames(x, p, s);
    const Vec3 pelvis = x.p_B + R * f.pelvis;
    const Vec3 v_pelvis = v_body + w_body.cross(R * f.pelvis);
    const Vec3 w_pelvis = w_body + R * f.frontal_axis * x.v[dof::hip_frontal(s)];
    out.hip[i] = x.p_B + R * f.hip;
    out.hip_vel[i] = v_pelvis + w_pelvis.cross(out.hip[i] - pelvis);
    const Vec3 w_thigh = w_pelvis + R * f.hip_axis * x.v[dof::hip_sagittal(s)];
    out.knee[i] = x.p_B + R * f.knee;
    out.knee_vel[i] = out.hip_vel[i] + w_thigh.cross(out.knee[i] - out.hip[i]);
    const Vec3 w_shank = w_thigh + R * f.knee_axis * x.phi_k_dot[i];
    out.foot[i] = x.p_B + R * f.foot;
    out.foot_vel[i] = out.knee_vel[i] + w_shank.cross(out.foot[i] - out.knee[i]);
    const Vec3 t = p.thruster(s);
    out.thruster[i] = x.p_B + R * t;
    out.thruster_vel[i] = v_body + w_body.cross(R * t);
    out.com += p.m_H * out.hip[i] + p.m_K * out.knee[i];
    out.com_vel += p.m_H * out.hip_vel[i] + p.m_K * out.knee_vel[i];
  }
  out.com /= m;
  out.com_vel /= m;
  return out;
}

/// Which leg joints move a point attached to the leg.
enum class LegSegment { Body, Pelvis, Thigh, Shank };

/// World-frame linear Jacobian d(p_dot)/dv of a point given in the body frame
/// relative to the body origin, rigidly attached to `segment` of leg `s`.
inline Mat3x10 point_jacobian(const RobotState& x, const LegFrames& f, Side s, LegSegment segment,
                              const Vec3& r) {
  Mat3x10 J = Mat3x10::Zero();
  const Mat3& R = x.R_B;
  J.block<3, 3>(0, dof::kLinear).setIdentity();
  J.block<3, 3>(0, dof::kAngular) = -R * hat(r);
  if (segment == LegSegment::Thigh || segment == LegSegment::Shank) {
    J.col(dof::hip_frontal(s)) = R * f.frontal_axis.cross(r - f.pelvis);
    J.col(dof::hip_sagittal(s)) = R * f.hip_axis.cross(r - f.hip);
  } else if (segment == LegSegment::Pelvis) {
    J.col(dof::hip_frontal(s)) = R * f.frontal_axis.cross(r - f.pelvis);
  }
  return J;
}

/// Body-frame angular-velocity Jacobian of a leg segment.
inline Mat3x10 angular_jacobian(const LegFrames& f, Side s, LegSegment segment) {
  Mat3x10 J = Mat3x10::Zero();
  J.block<3, 3>(0, dof::kAngular).setIdentity();
  if (segment != LegSegment::Body) J.col(dof::hip_frontal(s)) = f.frontal_axis;
  if (segment == LegSegment::Thigh || segment == LegSegment::Shank) {
    J.col(dof::hip_sagittal(s)) = f.hip_axis;
  }
  return J;
}

inline Mat3x10 foot_jacobian(const RobotState& x, const ModelParams& p, Side s) {
  const LegFrames f = leg_frames(x, p, s);
  return point_jacobian(x, f, s, LegSegment::Shank, f.foot);
}

/// Foot velocity contributed by the (kinematic) knee rate, per rad/s.
inline Vec3 foot_knee_column(const RobotState& x, const ModelParams& p, Side s) {
  const LegFrames f = leg_frames(x, p, s);
  return x.R_B * f.knee_axis.cross(f.foot - f.knee);
}

inline Mat3x10 thruster_jacobian(const RobotState& x, const ModelParams& p, Side s) {
  Mat3x10 J = Mat3x10::Zero();
  J.block<3, 3>(0, dof::kLinear).setIdentity();
  J.block<3, 3>(0, dof::kAngular) = -x.R_B * hat(p.thruster(s));
  return J;
}

/// Stacked [J_F_L; J_F_R].
inline Mat6x10 contact_jacobian(const RobotState& x, const ModelParams& p) {
  Mat6x10 J;
  J.topRows<3>() = foot_jacobian(x, p, Side::Left);
  J.bottomRows<3>() = foot_jacobian(x, p, Side::Right);
  return J;
}

/// Point masses: body, hip motors (at the hip sagittal joint), knee motors
/// (at the knee). Rotors: hip motor housing turns with the pelvis link, knee
/// motor housing with the thigh. All inertias isotropic.
inline Mat10 mass_matrix(const RobotState& x, const ModelParams& p) {
  Mat10 M = Mat10::Zero();
  M.block<3, 3>(dof::kLinear, dof::kLinear) = p.m_B * Mat3::Identity();
  M.block<3, 3>(dof::kAngular, dof::kAngular) = p.I_B * Mat3::Identity();
  for (Side s : {Side::Left, Side::Right}) {
    const LegFrames f = leg_frames(x, p, s);
    const Mat3x10 Jh = point_jacobian(x, f, s, LegSegment::Pelvis, f.hip);
    const Mat3x10 Jk = point_jacobian(x, f, s, LegSegment::Thigh, f.knee);
    const Mat3x10 Wp = angular_jacobian(f, s, LegSegment::Pelvis);
    const Mat3x10 Wt = angular_jacobian(f, s, LegSegment::Thigh);
    M.noalias() += p.m_H * Jh.transpose() * Jh;
    M.noalias() += p.m_K * Jk.transpose() * Jk;
    M.noalias() += p.I_H * Wp.transpose() * Wp;
    M.noalias() += p.I_K * Wt.transpose() * Wt;
  }
  return 0.5 * (M + M.transpose());
}

/// Gravity generalized force G = dV/dq (so that M a + C v + G = tau).
inline Vec10 gravity_forces(const RobotState& x, const ModelParams& p) {
  Vec10 G = Vec10::Zero();
  G.segment<3>(dof::kLinear) = -p.m_B * p.gravity;
  for (Side s : {Side::Left, Side::Right}) {
    const LegFrames f = leg_frames(x, p, s);
    G.noalias() -= p.m_H * point_jacobian(x, f, s, LegSegment::Pelvis, f.hip).transpose() * p.gravity;
    G.noalias() -= p.m_K * point_jacobian(x, f, s, LegSegment::Thigh, f.knee).transpose() * p.gravity;
  }
  return G;
}

inline double kinetic_energy(const RobotState& x, const ModelParams& p) {
  return 0.5 * x.v.dot(mass_matrix(x, p) * x.v);
}

inline double potential_energy(const RobotState& x, const ModelParams& p) {
  double V = -p.m_B * p.gravity.dot(x.p_B);
  for (Side s : {Side::Left, Side::Right}) {
    const LegFrames f = leg_frames(x, p, s);
    V -= p.m_H * p.gravity.dot(x.p_B + x.R_B * f.hip);
    V -= p.m_K * p.gravity.dot(x.p_B + x.R_B * f.knee);
  }
  return V;
}

/// Configuration displaced along local coordinates: translation, right
/// exponential perturbation of R_B, and hip angle offsets.
inline RobotState displace(const RobotState& x, const Vec10& xi) {
  RobotState y = x;
  y.p_B += xi.segment<3>(dof::kLinear);
  y.R_B = x.R_B * so3_exp(xi.segment<3>(dof::kAngular));
  y.gamma_h += xi.segment<2>(dof::kHipFrontal);
  y.phi_h += xi.segment<2>(dof::kHipSagittal);
  return y;
}

/// Mass matrix in local coordinates xi around x. Body angular velocity is
/// Jr(xi_ang) * xi_ang_dot, so M_local = W^T M W with W = diag(I, Jr, I).
inline Mat10 mass_matrix_local(const RobotState& x, const ModelParams& p, const Vec10& xi) {
  Mat10 W = Mat10::Identity();
  W.block<3, 3>(dof::kAngular, dof::kAngular) = so3_right_jacobian(xi.segment<3>(dof::kAngular));
  return W.transpose() * mass_matrix(displace(x, xi), p) * W;
}

inline constexpr double kChristoffelStep = 1e-3;

/// dM/dxi_k at xi = 0 by the 5-point stencil. M does not depend on the body
/// position, so the translational partials are exactly zero.
inline std::array<Mat10, kDof> mass_matrix_partials(const RobotState& x, const ModelParams& p) {
  std::array<Mat10, kDof> dM;
  const double h = kChristoffelStep;
  for (int k = 0; k < kDof; ++k) {
    if (k < dof::kAngular) {
      dM[k].setZero();
      continue;
    }
    Vec10 e = Vec10::Zero();
    e[k] = h;
    dM[k] = (-mass_matrix_local(x, p, 2.0 * e) + 8.0 * mass_matrix_local(x, p, e) -
             8.0 * mass_matrix_local(x, p, -e) + mass_matrix_local(x, p, -2.0 * e)) /
            (12.0 * h);
  }
  return dM;
}

/// Coriolis matrix from Christoffel symbols of the first kind:
/// C_ij = 1/2 sum_k (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) v_k.
inline Mat10 coriolis_matrix(const RobotState& x, const ModelParams& p) {
  const auto dM = mass_matrix_partials(x, p);
  Mat10 Mdot = Mat10::Zero();
  for (int k = 0; k < kDof; ++k) Mdot += dM[k] * x.v[k];
  Mat10 C = Mat10::Zero();
  for (int i = 0; i < kDof; ++i) {
    for (int j = 0; j < kDof; ++j) {
      double s = Mdot(i, j);
      for (int k = 0; k < kDof; ++k) s += (dM[j](i, k) - dM[i](j, k)) * x.v[k];
      C(i, j) = 0.5 * s;
    }
  }
  return C;
}

/// C(q, v) v without forming C: (M_dot v)_i - 1/2 v^T (dM/dq_i) v.
inline Vec10 coriolis_forces(const RobotState& x, const ModelParams& p) {
  const auto dM = mass_matrix_partials(x, p);
  Vec10 Mdot_v = Vec10::Zero();
  Vec10 out;
  for (int k = 0; k < kDof; ++k) Mdot_v.noalias() += (dM[k] * x.v) * x.v[k];
  for (int i = 0; i < kDof; ++i) out[i] = Mdot_v[i] - 0.5 * x.v.dot(dM[i] * x.v);
  return out;
}

/// h = C(q, v) v + G(q).
inline Vec10 bias_forces(const RobotState& x, const ModelParams& p) {
  return coriolis_forces(x, p) + gravity_forces(x, p);
}

struct InputMaps {
  Mat10x6 B_t;  // [left thruster force; right thruster force], world frame
  Mat10x6 B_g;  // [left foot force; right foot force], world frame
  Mat10x4 B_j;  // hip torques [gamma_L, gamma_R, phi_L, phi_R]
};

inline Mat10x4 joint_map() {
  Mat10x4 B = Mat10x4::Zero();
  B.bottomRows<4>().setIdentity();
  return B;
}

inline Mat10x6 thruster_map(const RobotState& x, const ModelParams& p) {
  Mat10x6 B;
  B.leftCols<3>() = thruster_jacobian(x, p, Side::Left).transpose();
  B.rightCols<3>() = thruster_jacobian(x, p, Side::Right).transpose();
  return B;
}

inline InputMaps input_mappings(const RobotState& x, const ModelParams& p) {
  InputMaps maps;
  maps.B_t = thruster_map(x, p);
  maps.B_g = contact_jacobian(x, p).transpose();
  maps.B_j = joint_map();
  return maps;
}

struct Accelerations {
  Vec10 v_dot = Vec10::Zero();
  Vec2 knee = Vec2::Zero();
};

/// v_dot = M^-1 (B_j u_j + B_t u_t + B_g u_g - h); knee accelerations pass through.
inline Accelerations forward_dynamics(const RobotState& x, const Vec4& u_j, const Vec6& u_t,
                                      const Vec6& u_g, const Vec2& u_k, const ModelParams& p) {
  const InputMaps maps = input_mappings(x, p);
  const Vec10 rhs = maps.B_j * u_j + maps.B_t * u_t + maps.B_g * u_g - bias_forces(x, p);
  Accelerations a;
  a.v_dot = mass_matrix(x, p).ldlt().solve(rhs);
  a.knee = u_k;
  return a;
}

/// Convenience wrapper exposing the model through the interface the observer
/// is written against.
class HarpyModel {
 public:
  using State = RobotState;

  HarpyModel() = default;
  explicit HarpyModel(ModelParams params) : params_(std::move(params)) { params_.validate(); }

  const ModelParams& params() const { return params_; }

  Mat10 mass_matrix(const State& x) const { return harpy::mass_matrix(x, params_); }
  Vec10 bias_forces(const State& x) const { return harpy::bias_forces(x, params_); }
  Vec10 velocity(const State& x) const { return x.v; }
  Mat10x4 joint_map(const State&) const { return harpy::joint_map(); }
  Mat10x6 grf_map(const State& x) const { return contact_jacobian(x, params_).transpose(); }
  Mat10x6 thruster_map(const State& x) const { return harpy::thruster_map(x, params_); }

 private:
  ModelParams params_{};
};

}  // namespace harpy
