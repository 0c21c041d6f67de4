// Fixed-step RK4 on the robot state. Rotation is handled in exponential
// coordinates around the pose at the start of the step (RKMK), so every stage
// stays on SO(3) and the scheme keeps classical order.
#pragma once

#include "harpy/model.hpp"

#include <stdexcept>
#include <string>

namespace harpy {

/// Right-hand side returned by the dynamics closure at one stage.
struct Flow {
  Vec10 v_dot = Vec10::Zero();
  Vec2 knee_ddot = Vec2::Zero();
  // Power [thrust, joint, ground, gravity] delivered to the generalized
  // coordinates; integrated alongside the state.
  Vec4 power = Vec4::Zero();
  // Inputs seen at this stage, kept for diagnostics.
  Vec6 u_t = Vec6::Zero();
  Vec6 u_g = Vec6::Zero();
  Vec4 u_j = Vec4::Zero();
};

struct StepResult {
  RobotState state;
  Vec4 work = Vec4::Zero();  // work over the step, same order as Flow::power
};

namespace detail {

// Increment coordinates: [dp 3 | theta 3 | dgamma 2 | dphi_h 2 | dphi_k 2 | dv 10 | dknee_rate 2 | work 4]
inline constexpr int kIncP = 0, kIncTheta = 3, kIncGamma = 6, kIncPhi = 8, kIncKnee = 10,
                     kIncV = 12, kIncKneeRate = 22, kIncWork = 24, kIncSize = 28;
using Increment = Eigen::Matrix<double, kIncSize, 1>;

inline RobotState apply_increment(const RobotState& x0, const Increment& y) {
  RobotState x = x0;
  x.p_B += y.segment<3>(kIncP);
  x.R_B = x0.R_B * so3_exp(y.segment<3>(kIncTheta));
  x.gamma_h += y.segment<2>(kIncGamma);
  x.phi_h += y.segment<2>(kIncPhi);
  x.phi_k += y.segment<2>(kIncKnee);
  x.v += y.segment<kDof>(kIncV);
  x.phi_k_dot += y.segment<2>(kIncKneeRate);
  return x;
}

inline void check_flow(const Flow& f, double t) {
  const char* source = nullptr;
  if (!f.u_t.allFinite()) {
    source = "thrust";
  } else if (!f.u_g.allFinite()) {
    source = "ground contact";
  } else if (!f.u_j.allFinite()) {
    source = "joint controller";
  } else if (!f.knee_ddot.allFinite()) {
    source = "knee command";
  } else if (!f.v_dot.allFinite() || !f.power.allFinite()) {
    source = "forward dynamics";
  }
  if (source) {
    throw std::domain_error("rk4_step: non-finite derivative from " + std::string(source) +
                            " at t = " + std::to_string(t));
  }
}

}  // namespace detail

/// One RK4 step of size dt. `flow(x, t)` returns the stage derivative; inputs
/// it closes over are expected to be held constant across the step.
template <typename FlowFn>
StepResult rk4_step(const RobotState& x0, double t, double dt, FlowFn&& flow) {
  using detail::Increment;
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  if (!x0.finite()) throw std::domain_error("rk4_step: non-finite state at t = " + std::to_string(t));

  auto rhs = [&](const Increment& y, double ts) {
    const RobotState x = detail::apply_increment(x0, y);
    const Flow f = flow(x, ts);
    detail::check_flow(f, ts);
    Increment d;
    d.segment<3>(detail::kIncP) = x.linear_velocity();
    d.segment<3>(detail::kIncTheta) =
        so3_right_jacobian_inv(y.segment<3>(detail::kIncTheta)) * x.angular_velocity();
    d.segment<2>(detail::kIncGamma) = x.v.segment<2>(dof::kHipFrontal);
    d.segment<2>(detail::kIncPhi) = x.v.segment<2>(dof::kHipSagittal);
    d.segment<2>(detail::kIncKnee) = x.phi_k_dot;
    d.segment<kDof>(detail::kIncV) = f.v_dot;
    d.segment<2>(detail::kIncKneeRate) = f.knee_ddot;
    d.segment<4>(detail::kIncWork) = f.power;
    return d;
  };

  const Increment y0 = Increment::Zero();
  const Increment k1 = rhs(y0, t);
  const Increment k2 = rhs(y0 + 0.5 * dt * k1, t + 0.5 * dt);
  const Increment k3 = rhs(y0 + 0.5 * dt * k2, t + 0.5 * dt);
  const Increment k4 = rhs(y0 + dt * k3, t + dt);
  const Increment y1 = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  StepResult out;
  out.state = detail::apply_increment(x0, y1);
  out.state.R_B = orthonormalize(out.state.R_B);
  out.work = y1.segment<4>(detail::kIncWork);
  return out;
}

/// Standard closure for the robot: held joint torque, thrust and knee
/// command; ground force re-evaluated from the stage state.
template <typename GroundFn>
auto robot_flow(const ModelParams& p, const Vec4& u_j, const Vec6& u_t, const Vec2& u_k,
                GroundFn&& ground) {
  return [&p, u_j, u_t, u_k, ground](const RobotState& x, double) {
    Flow f;
    f.u_j = u_j;
    f.u_t = u_t;
    f.u_g = ground(x);
    f.knee_ddot = u_k;
    const InputMaps maps = input_mappings(x, p);
    const Vec10 gen_t = maps.B_t * u_t;
    const Vec10 gen_j = maps.B_j * u_j;
    const Vec10 gen_g = maps.B_g * f.u_g;
    const Vec10 grav = gravity_forces(x, p);
    const Vec10 rhs = gen_t + gen_j + gen_g - bias_forces(x, p);
    f.v_dot = mass_matrix(x, p).ldlt().solve(rhs);
    f.power << x.v.dot(gen_t), x.v.dot(gen_j), x.v.dot(gen_g), -x.v.dot(grav);
    return f;
  };
}

}  // namespace harpy
