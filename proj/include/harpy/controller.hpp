// Thruster-assisted walking controller.
//
// Pipeline per control tick: gait targets -> leg inverse kinematics -> joint
// PID (hip torques, knee acceleration) -> VLIP thrust about the CoM plus
// antisymmetric roll/yaw thrust -> combined per-thruster forces.
#pragma once

#include "harpy/ground.hpp"
#include "harpy/model.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace harpy {

// ---------------------------------------------------------------------------
// Configuration

struct GaitConfig {
  double step_length = 0.16;     // forward travel per gait cycle, m
  double step_height = 0.02;     // swing apex above ground, m
  double step_period = 1.6;      // duration of one full cycle (left + right swing), s
  double body_height_ref = 0.62; // body origin height, m
  double duty_factor = 0.6;      // stance fraction of the cycle, per foot
  double stance_width = 0.0;     // lateral foot offset from the centerline; 0 derives it from the leg
  double raibert_gain = 0.05;    // foot placement per unit velocity error, s

  double speed() const { return step_length / step_period; }

  void validate() const {
    if (!(step_length > 0.0 && step_height > 0.0 && step_period > 0.0 && body_height_ref > 0.0)) {
      throw std::invalid_argument("gait: lengths, height and period must be positive");
    }
    if (!(duty_factor > 0.0 && duty_factor < 1.0)) {
      throw std::invalid_argument("gait: duty_factor must lie in (0, 1)");
    }
    if (!(stance_width >= 0.0 && raibert_gain >= 0.0)) {
      throw std::invalid_argument("gait: stance_width and raibert_gain must be non-negative");
    }
  }
};

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double i_limit = 0.0;  // bound on |integral of error|, rad s
};

struct PdGains {
  double kp = 0.0;
  double kd = 0.0;
};

struct ControllerGains {
  PidGains hip_frontal{120.0, 200.0, 1.0, 0.05};
  PidGains hip_sagittal{60.0, 100.0, 0.8, 0.05};
  PdGains knee{400.0, 40.0};
  PdGains roll{60.0, 3.0};
  PdGains yaw{30.0, 3.0};
  Vec3 body_kp{60.0, 60.0, 80.0};
  Vec3 body_kd{14.0, 14.0, 16.0};
  PdGains leg_length{80.0, 16.0};
  double swing_gravity_ff = 1.0;  // fraction of the swing leg's gravity torque fed forward

  void validate() const {
    auto nonneg = [](double v) { return v >= 0.0; };
    for (const PidGains* g : {&hip_frontal, &hip_sagittal}) {
      if (!(nonneg(g->kp) && nonneg(g->ki) && nonneg(g->kd) && nonneg(g->i_limit))) {
        throw std::invalid_argument("gains: joint PID gains must be non-negative");
      }
    }
    for (const PdGains* g : {&knee, &roll, &yaw, &leg_length}) {
      if (!(nonneg(g->kp) && nonneg(g->kd))) {
        throw std::invalid_argument("gains: PD gains must be non-negative");
      }
    }
    if (!(swing_gravity_ff >= 0.0)) throw std::invalid_argument("gains: swing_gravity_ff must be non-negative");
    if (!((body_kp.array() >= 0.0).all() && (body_kd.array() >= 0.0).all())) {
      throw std::invalid_argument("gains: body tracking gains must be non-negative");
    }
  }
};

// ---------------------------------------------------------------------------
// Inverse kinematics

struct LegAngles {
  double gamma_h = 0.0;
  double phi_h = 0.0;
  double phi_k = 0.0;
};

struct IkResult {
  LegAngles angles;
  bool reachable = true;  // false: `angles` is the clamped nearest solution
};

namespace detail {

inline double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// Angle of the planar vector (x, z) as rotated by Ry: Ry(phi) maps angle a to a - phi.
inline double xz_angle(double x, double z) { return std::atan2(z, x); }

}  // namespace detail

/// Closed-form leg IK for a target foot position in the body frame (relative
/// to the body origin). Requires l2 to be purely lateral. When the knee has
/// no effect on the foot (l3 or l4 parallel to the knee axis) it is returned
/// as 0. The knee branch with phi_k measured positive from the aligned-link
/// angle is always selected.
inline IkResult inverse_kinematics(const Vec3& target, Side s, const ModelParams& p) {
  const Vec3 l2 = p.link(2, s), l3 = p.link(3, s), l4 = p.link(4, s);
  if (std::abs(l2.x()) > 1e-12 || std::abs(l2.z()) > 1e-12) {
    throw std::invalid_argument("inverse_kinematics: l2 must be purely lateral");
  }
  IkResult out;
  const Vec3 d = target - p.link(1, s);
  const double Y = l2.y() + l3.y() + l4.y();
  const Vec2 a(l3.x(), l3.z()), b(l4.x(), l4.z());
  const double ab = a.norm() * b.norm();

  double rho2_needed = d.squaredNorm() - Y * Y;
  double phi_k = 0.0;
  double rho2;
  if (ab < 1e-12) {
    rho2 = a.squaredNorm() + b.squaredNorm() + 2.0 * a.dot(b);
    if (std::abs(rho2_needed - rho2) > 1e-12 * std::max(1.0, rho2)) out.reachable = false;
  } else {
    // a . Ry(phi) b = A cos(phi) + B sin(phi) = |a||b| cos(phi - psi)
    const double A = a.x() * b.x() + a.y() * b.y();
    const double B = a.x() * b.y() - a.y() * b.x();
    const double psi = std::atan2(B, A);
    double kappa = (rho2_needed - a.squaredNorm() - b.squaredNorm()) / (2.0 * ab);
    if (kappa > 1.0 || kappa < -1.0) {
      out.reachable = false;
      kappa = std::clamp(kappa, -1.0, 1.0);
    }
    phi_k = detail::wrap_angle(psi + std::acos(kappa));
    rho2 = a.squaredNorm() + b.squaredNorm() + 2.0 * ab * kappa;
  }
  const double rho = std::sqrt(std::max(rho2, 0.0));

  // Sagittal plane: the rotated shank+thigh vector must have x = d.x, z below the hip.
  double x = d.x();
  if (std::abs(x) > rho) {
    out.reachable = false;
    x = std::copysign(rho, x);
  }
  const double z = -std::sqrt(std::max(rho * rho - x * x, 0.0));
  const Vec3 w = l3 + rot_y(phi_k) * l4;
  const double phi_h = detail::wrap_angle(detail::xz_angle(w.x(), w.z()) - detail::xz_angle(x, z));

  // Frontal plane: rotate (Y, z) onto the direction of (d.y, d.z).
  const double gamma = detail::wrap_angle(std::atan2(d.z(), d.y()) - std::atan2(z, Y));
  if (out.reachable) {
    const double r_needed = std::hypot(d.y(), d.z());
    const double r_have = std::hypot(Y, z);
    if (std::abs(r_needed - r_have) > 1e-9 * std::max(1.0, r_have)) out.reachable = false;
  }
  out.angles = {gamma, phi_h, phi_k};
  return out;
}

/// Moves a body-frame foot target laterally (keeping x and z) onto the set
/// the leg can reach. Targets whose x, z alone are out of reach come back
/// unchanged and are left to the IK projection.
inline Vec3 resolve_lateral(const Vec3& target, Side s, const ModelParams& p) {
  const Vec3 l3 = p.link(3, s), l4 = p.link(4, s);
  const Vec3 pelvis = p.link(1, s);
  const double Y = p.link(2, s).y() + l3.y() + l4.y();
  const Vec2 a(l3.x(), l3.z()), b(l4.x(), l4.z());
  const double rho_max = a.norm() + b.norm();
  const double rho_min = std::abs(a.norm() - b.norm());
  const Vec3 d = target - pelvis;
  const double rho = std::clamp(std::sqrt(std::max(d.squaredNorm() - Y * Y, 0.0)), rho_min, rho_max);
  const double yz2 = Y * Y + rho * rho - d.x() * d.x();
  const double dy2 = yz2 - d.z() * d.z();
  if (d.x() * d.x() > rho * rho || dy2 < 0.0) return target;
  Vec3 out = target;
  out.y() = pelvis.y() + std::copysign(std::sqrt(dy2), d.y() != 0.0 ? d.y() : side_sign(s));
  return out;
}

/// Foot position in the body frame produced by the given leg angles.
inline Vec3 leg_foot_position(const LegAngles& q, Side s, const ModelParams& p) {
  return leg_frames(p, s, q.gamma_h, q.phi_h, q.phi_k).foot;
}

// ---------------------------------------------------------------------------
// Gait generation

struct FootTarget {
  Vec3 world = Vec3::Zero();      // desired foot position, world frame
  Vec3 world_vel = Vec3::Zero();
  Vec3 relative = Vec3::Zero();   // world - p_B, in the level (upright, zero-yaw) frame
  bool swing = false;
  double swing_progress = 0.0;    // in [0, 1) during swing
};

struct BodyReference {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

struct GaitTargets {
  std::array<FootTarget, 2> feet;
  BodyReference body;
  double body_height = 0.0;
};

/// Nominal lateral foot offset: the foot position the leg reaches straight
/// below the pelvis line at the reference height with zero sagittal angle.
inline double nominal_stance_width(const GaitConfig& cfg, const ModelParams& p) {
  if (cfg.stance_width > 0.0) return cfg.stance_width;
  const Vec3 pelvis = p.link(1, Side::Left);
  const Vec3 straight = p.link(2, Side::Left) + p.link(3, Side::Left) + p.link(4, Side::Left);
  const double reach = straight.norm();
  const double dz = -cfg.body_height_ref - pelvis.z();
  if (reach <= std::abs(dz)) {
    throw std::invalid_argument("gait: body_height_ref is beyond the leg reach");
  }
  return pelvis.y() + std::sqrt(reach * reach - dz * dz - straight.x() * straight.x());
}

/// Forward body reference: speed ramps from zero to step_length / step_period
/// over the first cycle (smoothstep), then stays constant.
inline BodyReference body_reference(double t, const GaitConfig& cfg) {
  BodyReference ref;
  const double T = cfg.step_period;
  const double V = cfg.speed();
  ref.position.z() = cfg.body_height_ref;
  if (t <= 0.0) return ref;
  if (t < T) {
    const double s = t / T;
    ref.position.x() = V * T * (s * s * s - 0.5 * s * s * s * s);
    ref.velocity.x() = V * (3.0 * s * s - 2.0 * s * s * s);
    ref.acceleration.x() = V / T * (6.0 * s - 6.0 * s * s);
  } else {
    ref.position.x() = V * T * 0.5 + V * (t - T);
    ref.velocity.x() = V;
  }
  return ref;
}

/// Alternating-foot gait. Left swings in [kT, kT + (1-D)T), right half a
/// cycle later. Swing feet follow a cycloid from the lift-off point to a
/// foothold under the mid-stance body reference (plus a Raibert correction
/// from the velocity error at lift-off). Stance feet stay fixed in the world.
class GaitGenerator {
 public:
  GaitGenerator() = default;
  GaitGenerator(GaitConfig cfg, const ModelParams& p) : cfg_(cfg), model_(p) {
    cfg_.validate();
    width_ = nominal_stance_width(cfg_, p);
    reset();
  }

  const GaitConfig& config() const { return cfg_; }
  double stance_width() const { return width_; }

  void reset() {
    for (Side s : {Side::Left, Side::Right}) {
      const int i = index(s);
      anchor_[i] = Vec3(0.0, side_sign(s) * width_, 0.0);
      landing_[i] = anchor_[i];
      swing_index_[i] = -1;
    }
  }

  /// Swing window start offset within the cycle.
  double swing_offset(Side s) const { return s == Side::Left ? 0.0 : 0.5 * cfg_.step_period; }
  double swing_duration() const { return (1.0 - cfg_.duty_factor) * cfg_.step_period; }

  /// Index of the swing window containing t, or -1 if the foot is in stance.
  long swing_window(double t, Side s) const {
    const double T = cfg_.step_period;
    const double local = t - swing_offset(s);
    if (local < 0.0) return -1;
    const double k = std::floor(local / T);
    return (local - k * T) < swing_duration() ? static_cast<long>(k) : -1;
  }

  /// Planned foothold for the landing that ends swing window k of foot s.
  Vec3 planned_foothold(long k, Side s) const {
    const double land = swing_offset(s) + k * cfg_.step_period + swing_duration();
    const double mid_stance = land + 0.5 * cfg_.duty_factor * cfg_.step_period;
    return {body_reference(mid_stance, cfg_).position.x(), side_sign(s) * width_, 0.0};
  }

  GaitTargets targets(double t, const RobotState& x) {
    GaitTargets out;
    out.body = body_reference(t, cfg_);
    out.body_height = cfg_.body_height_ref;
    for (Side s : {Side::Left, Side::Right}) {
      const int i = index(s);
      const long k = swing_window(t, s);
      if (k != swing_index_[i]) {
        if (swing_index_[i] >= 0) anchor_[i] = landing_[i];  // touchdown
        if (k >= 0) {                                          // lift-off
          landing_[i] = planned_foothold(k, s);
          const Vec3 vel_err = x.linear_velocity() - out.body.velocity;
          landing_[i].x() += cfg_.raibert_gain * vel_err.x();
          landing_[i].y() += cfg_.raibert_gain * vel_err.y();
        }
        swing_index_[i] = k;
      }
      FootTarget& ft = out.feet[i];
      if (k < 0) {
        ft.world = anchor_[i];
        ft.world_vel.setZero();
      } else {
        const double D = swing_duration();
        const double tau = (t - swing_offset(s) - k * cfg_.step_period) / D;
        const double two_pi = 2.0 * std::numbers::pi;
        const double blend = tau - std::sin(two_pi * tau) / two_pi;
        const double blend_dot = (1.0 - std::cos(two_pi * tau)) / D;
        const Vec3 delta = landing_[i] - anchor_[i];
        ft.world = anchor_[i] + blend * delta;
        ft.world.z() = anchor_[i].z() + cfg_.step_height * 0.5 * (1.0 - std::cos(two_pi * tau));
        ft.world_vel = blend_dot * delta;
        ft.world_vel.z() = cfg_.step_height * 0.5 * two_pi * std::sin(two_pi * tau) / D;
        ft.swing = true;
        ft.swing_progress = tau;
      }
      ft.relative = resolve_lateral(ft.world - x.p_B, s, model_);
    }
    return out;
  }

 private:
  GaitConfig cfg_{};
  ModelParams model_{};
  double width_ = 0.0;
  std::array<Vec3, 2> anchor_{Vec3::Zero(), Vec3::Zero()};
  std::array<Vec3, 2> landing_{Vec3::Zero(), Vec3::Zero()};
  std::array<long, 2> swing_index_{-1, -1};
};

// ---------------------------------------------------------------------------
// Joint PID

struct JointCommand {
  Vec4 u_j = Vec4::Zero();  // [gamma_L, gamma_R, phi_L, phi_R], N m
  Vec2 u_k = Vec2::Zero();  // knee accelerations, rad/s^2
};

/// PID on hip angles (torque out), PD on knee angles (acceleration out).
/// Target rates come from differencing successive targets.
class JointPid {
 public:
  JointPid() = default;
  explicit JointPid(ControllerGains gains) : gains_(gains) {}

  void reset() {
    integral_.setZero();
    have_prev_ = false;
  }

  JointCommand update(const std::array<LegAngles, 2>& target, const RobotState& x, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("joint_pid: dt must be positive");
    Vec4 q_ref, q, qd;
    Vec2 k_ref;
    for (Side s : {Side::Left, Side::Right}) {
      const int i = index(s);
      q_ref[i] = target[i].gamma_h;
      q_ref[2 + i] = target[i].phi_h;
      k_ref[i] = target[i].phi_k;
      q[i] = x.gamma_h[i];
      q[2 + i] = x.phi_h[i];
      qd[i] = x.v[dof::hip_frontal(s)];
      qd[2 + i] = x.v[dof::hip_sagittal(s)];
    }
    Vec4 qd_ref = Vec4::Zero();
    Vec2 kd_ref = Vec2::Zero();
    if (have_prev_) {
      qd_ref = (q_ref - prev_q_ref_) / dt;
      kd_ref = (k_ref - prev_k_ref_) / dt;
    }
    prev_q_ref_ = q_ref;
    prev_k_ref_ = k_ref;
    have_prev_ = true;

    JointCommand cmd;
    for (int j = 0; j < 4; ++j) {
      const PidGains& g = j < 2 ? gains_.hip_frontal : gains_.hip_sagittal;
      const double e = q_ref[j] - q[j];
      integral_[j] = std::clamp(integral_[j] + e * dt, -g.i_limit, g.i_limit);
      cmd.u_j[j] = g.kp * e + g.ki * integral_[j] + g.kd * (qd_ref[j] - qd[j]);
    }
    for (int i = 0; i < 2; ++i) {
      cmd.u_k[i] = gains_.knee.kp * (k_ref[i] - x.phi_k[i]) +
                   gains_.knee.kd * (kd_ref[i] - x.phi_k_dot[i]);
    }
    return cmd;
  }

  const Vec4& integral() const { return integral_; }

 private:
  ControllerGains gains_{};
  Vec4 integral_ = Vec4::Zero();
  Vec4 prev_q_ref_ = Vec4::Zero();
  Vec2 prev_k_ref_ = Vec2::Zero();
  bool have_prev_ = false;
};

// ---------------------------------------------------------------------------
// Reduced-order (VLIP) thrust

/// Center of pressure as the normal-force weighted foot average. Returns false
/// when neither foot carries load.
inline bool center_of_pressure(const FramePositions& fk, const ContactForce& grf, Vec3* cop) {
  const double fl = std::max(0.0, grf.u_g[2]);
  const double fr = std::max(0.0, grf.u_g[5]);
  const double total = fl + fr;
  if (total <= 0.0) return false;
  *cop = (fl / total) * fk.foot[0] + (fr / total) * fk.foot[1];
  return true;
}

struct VlipOutput {
  Vec3 u_tc = Vec3::Zero();  // thrust about the CoM, world frame, N
  double u_r = 0.0;          // commanded (p_B - c)^T p_B_ddot, m^2/s^2
  double lambda = 0.0;       // leg constraint multiplier, N/m
};

/// m p_ddot = m g + u_tc + J_s^T lambda with J_s = (p_B - c)^T and
/// J_s p_ddot = u_r (no-slip c_ddot = 0). The leg-length PD sets u_r; thrust
/// supplies the component of the desired body acceleration orthogonal to the
/// leg. With `in_contact` false the leg force vanishes and thrust tracks alone.
inline VlipOutput vlip_thruster(const RobotState& x, const Vec3& cop, const BodyReference& ref,
                                const ControllerGains& gains, double total_mass, bool in_contact,
                                const Vec3& gravity) {
  VlipOutput out;
  const Vec3 p = x.p_B;
  const Vec3 pd = x.linear_velocity();
  const Vec3 a_des = ref.acceleration +
                     (gains.body_kp.array() * (ref.position - p).array()).matrix() +
                     (gains.body_kd.array() * (ref.velocity - pd).array()).matrix();
  if (!in_contact) {
    out.u_tc = total_mass * (a_des - gravity);
    return out;
  }
  const Vec3 leg = p - cop;
  const double r = leg.norm();
  if (!(r > 1e-6)) throw std::domain_error("vlip_thruster: body coincides with the CoP");
  const Vec3 n = leg / r;
  const double r_dot = n.dot(pd);
  const double r_ref = (ref.position - cop).norm();
  const double r_ref_dot = r_ref > 1e-9 ? (ref.position - cop).dot(ref.velocity) / r_ref : 0.0;
  const double r_ddot = gains.leg_length.kp * (r_ref - r) + gains.leg_length.kd * (r_ref_dot - r_dot);
  // leg . p_ddot = r r_ddot - |p_dot|^2 + r_dot^2 with c fixed.
  out.u_r = r * r_ddot - pd.squaredNorm() + r_dot * r_dot;
  out.lambda = total_mass * (out.u_r - leg.dot(gravity)) / (r * r);
  const Mat3 perp = Mat3::Identity() - n * n.transpose();
  out.u_tc = total_mass * perp * (a_des - gravity);
  return out;
}

// ---------------------------------------------------------------------------
// Roll / yaw stabilization and thrust combination

/// u_tL = [u_yaw, 0, u_roll], u_tR = -u_tL, body frame. The left thruster sits
/// at +y, so +x force on it yaws the body negatively: u_yaw enters with a
/// positive sign to restore yaw, while u_roll = -kp roll - kd omega_x.
inline std::array<Vec3, 2> stabilizing_thrust(const RobotState& x, const ControllerGains& g) {
  const EulerZYX e = euler_zyx(x.R_B);
  const Vec3 w = x.angular_velocity();
  const double u_roll = -g.roll.kp * e.roll - g.roll.kd * w.x();
  const double u_yaw = g.yaw.kp * e.yaw + g.yaw.kd * w.z();
  const Vec3 left(u_yaw, 0.0, u_roll);
  return {left, -left};
}

inline Vec6 combine_thrust(const Vec3& u_tc, const Vec3& u_tL, const Vec3& u_tR) {
  Vec6 u;
  u.head<3>() = 0.5 * u_tc + u_tL;
  u.tail<3>() = 0.5 * u_tc + u_tR;
  return u;
}

// ---------------------------------------------------------------------------
// Full controller

struct ControlOutput {
  JointCommand joints;
  Vec6 u_t = Vec6::Zero();  // per-thruster force, world frame
  Vec3 u_tc = Vec3::Zero();
  std::array<Vec3, 2> u_stab{Vec3::Zero(), Vec3::Zero()};  // body frame
  Vec3 cop = Vec3::Zero();
  double u_r = 0.0;
  bool in_contact = false;
  std::array<bool, 2> ik_reachable{true, true};
  GaitTargets gait;
};

class Controller {
 public:
  Controller() = default;
  Controller(const ModelParams& model, GaitConfig gait, ControllerGains gains)
      : model_(model), gains_(gains), gait_(gait, model), pid_(gains) {
    gains_.validate();
    cop_ = Vec3::Zero();
  }

  const GaitGenerator& gait() const { return gait_; }
  const ControllerGains& gains() const { return gains_; }

  /// `grf` is the measured ground force at the current state.
  ControlOutput update(double t, const RobotState& x, const FramePositions& fk,
                       const ContactForce& grf, double dt) {
    ControlOutput out;
    out.gait = gait_.targets(t, x);
    std::array<LegAngles, 2> q_ref;
    for (Side s : {Side::Left, Side::Right}) {
      const int i = index(s);
      const IkResult ik = inverse_kinematics(out.gait.feet[i].relative, s, model_);
      q_ref[i] = ik.angles;
      out.ik_reachable[i] = ik.reachable;
    }
    out.joints = pid_.update(q_ref, x, dt);
    if (gains_.swing_gravity_ff > 0.0) {
      const Vec10 G = gravity_forces(x, model_);
      for (Side s : {Side::Left, Side::Right}) {
        if (!out.gait.feet[index(s)].swing) continue;
        out.joints.u_j[index(s)] += gains_.swing_gravity_ff * G[dof::hip_frontal(s)];
        out.joints.u_j[2 + index(s)] += gains_.swing_gravity_ff * G[dof::hip_sagittal(s)];
      }
    }

    Vec3 cop;
    out.in_contact = center_of_pressure(fk, grf, &cop);
    if (out.in_contact) {
      cop_ = cop;
    } else if (!have_cop_) {
      cop_ = 0.5 * (fk.foot[0] + fk.foot[1]);
    }
    have_cop_ = true;
    out.cop = cop_;

    const VlipOutput vlip = vlip_thruster(x, cop_, out.gait.body, gains_, model_.total_mass(),
                                          out.in_contact, model_.gravity);
    out.u_tc = vlip.u_tc;
    out.u_r = vlip.u_r;
    out.u_stab = stabilizing_thrust(x, gains_);
    out.u_t = combine_thrust(out.u_tc, x.R_B * out.u_stab[0], x.R_B * out.u_stab[1]);
    return out;
  }

 private:
  ModelParams model_{};
  ControllerGains gains_{};
  GaitGenerator gait_{};
  JointPid pid_{};
  Vec3 cop_ = Vec3::Zero();
  bool have_cop_ = false;
};

}  // namespace harpy
