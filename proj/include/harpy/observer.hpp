// Conjugate-momentum observer for the generalized thruster force.
//
// With p = M(q) v and beta = -h + M_dot v, the plant obeys
//   p_dot = beta + B_g lambda + B_j u_j + B_t u_t.
// The residual
//   r(t) = K0 (p(t) - integral_0^t (beta + r + B_g lambda + B_j u_j) ds - p(0))
// satisfies r_dot = K0 (B_t u_t - r): a first-order low-pass of the
// generalized thruster force. The ground force lambda is either supplied
// (force sensing or a ground model) or reconstructed from a rigid contact
// constraint using the previous residual.
#pragma once

#include "harpy/linalg.hpp"
#include "harpy/model.hpp"

#include <concepts>
#include <stdexcept>
#include <string>
#include <variant>

namespace harpy {

// ---------------------------------------------------------------------------
// Contact-constraint ground force estimate

/// Time derivative of the stacked foot Jacobian along v (knee motion excluded).
inline Mat6x10 j_c_dot(const RobotState& x, const ModelParams& p) {
  Mat6x10 Jd = Mat6x10::Zero();
  const Mat3& R = x.R_B;
  const Mat3 Rw = R * hat(x.angular_velocity());  // R_dot
  for (Side s : {Side::Left, Side::Right}) {
    const LegFrames f = leg_frames(x, p, s);
    const double gd = x.v[dof::hip_frontal(s)];
    const double pd = x.v[dof::hip_sagittal(s)];
    const Vec3 ex = f.frontal_axis;
    const Vec3 r = f.foot;
    const Vec3 r_dot = ex.cross(r - f.pelvis) * gd + f.hip_axis.cross(r - f.hip) * pd;
    const Vec3 hip_dot = ex.cross(f.hip - f.pelvis) * gd;
    const Vec3 axis_dot = ex.cross(f.hip_axis) * gd;

    auto block = Jd.middleRows<3>(3 * index(s));
    block.middleCols<3>(dof::kAngular) = -Rw * hat(r) - R * hat(r_dot);
    const Vec3 c_front = ex.cross(r - f.pelvis);
    block.col(dof::hip_frontal(s)) = Rw * c_front + R * ex.cross(r_dot);
    const Vec3 c_sag = f.hip_axis.cross(r - f.hip);
    block.col(dof::hip_sagittal(s)) =
        Rw * c_sag + R * (axis_dot.cross(r - f.hip) + f.hip_axis.cross(r_dot - hip_dot));
  }
  return Jd;
}

struct ContactRank {
  int stance_feet = 0;
  int constraint_rank = 0;      // rank of J_c M^-1 J_c^T (cutoff 1e-8 sigma_max)
  double constraint_cond = 0.0; // sigma_max / sigma_min of J_c M^-1 J_c^T
  int wrench_rank = 0;          // rank of the contact-force -> body-wrench map
  bool deficient = false;       // either rank below 3 * stance_feet
};

struct ConstraintGrf {
  Vec6 lambda = Vec6::Zero();  // [left; right], world frame; zero for swing feet
  std::array<bool, 2> stance{false, false};
  bool no_contact = true;
  ContactRank rank;
};

/// lambda = (J_c M^-1 J_c^T)^+ (J_c M^-1 (-r - B_j u_j + h) - J_c_dot v)
/// over the feet at or below the ground in the measured state.
inline ConstraintGrf constraint_grf(const RobotState& x, const Vec10& r, const Vec4& u_j,
                                    const ModelParams& p) {
  ConstraintGrf out;
  const FramePositions fk = forward_kinematics(x, p);
  for (Side s : {Side::Left, Side::Right}) {
    out.stance[index(s)] = fk.foot[index(s)].z() <= 0.0;
  }
  const int n = int(out.stance[0]) + int(out.stance[1]);
  out.rank.stance_feet = n;
  if (n == 0) return out;
  out.no_contact = false;

  const Mat6x10 J_all = contact_jacobian(x, p);
  const Mat6x10 Jd_all = j_c_dot(x, p);
  Eigen::MatrixXd Jc(3 * n, kDof), Jd(3 * n, kDof), W(6, 3 * n);
  int row = 0;
  for (Side s : {Side::Left, Side::Right}) {
    if (!out.stance[index(s)]) continue;
    Jc.middleRows(row, 3) = J_all.middleRows<3>(3 * index(s));
    Jd.middleRows(row, 3) = Jd_all.middleRows<3>(3 * index(s));
    // Body wrench (world force, body-frame moment about the body origin).
    W.block(0, row, 3, 3).setIdentity();
    W.block(3, row, 3, 3) = hat(x.R_B.transpose() * (fk.foot[index(s)] - x.p_B)) *
                            x.R_B.transpose();
    row += 3;
  }
  const auto ldlt = mass_matrix(x, p).ldlt();
  const Eigen::MatrixXd MinvJt = ldlt.solve(Jc.transpose());
  const Eigen::MatrixXd A = Jc * MinvJt;
  const Vec10 rhs_gen = -r - joint_map() * u_j + bias_forces(x, p);
  const Eigen::VectorXd b = MinvJt.transpose() * rhs_gen - Jd * x.v;
  const PseudoInverse pi = pseudo_inverse(A);
  const Eigen::VectorXd lam = pi.pinv * b;

  out.rank.constraint_rank = pi.rank;
  out.rank.constraint_cond = pi.sigma_min > 0.0 ? pi.sigma_max / pi.sigma_min : INFINITY;
  out.rank.wrench_rank = pseudo_inverse(W).rank;
  out.rank.deficient = out.rank.constraint_rank < 3 * n || out.rank.wrench_rank < 3 * n;
  row = 0;
  for (Side s : {Side::Left, Side::Right}) {
    if (!out.stance[index(s)]) continue;
    out.lambda.segment<3>(3 * index(s)) = lam.segment<3>(row);
    row += 3;
  }
  return out;
}

inline ConstraintGrf constraint_grf(const RobotState& x, const Vec10& r, const Vec4& u_j,
                                    const HarpyModel& model) {
  return constraint_grf(x, r, u_j, model.params());
}

// ---------------------------------------------------------------------------
// Thruster force recovery

/// Least-squares thruster forces from a generalized estimate,
/// u = (B_t^T B_t)^+ B_t^T r, returned per thruster in the body frame.
inline Vec6 body_frame_thrust(const Vec10& r, const RobotState& x, const ModelParams& p) {
  const Mat10x6 Bt = thruster_map(x, p);
  const Mat6 normal = Bt.transpose() * Bt;
  const Vec6 world = pseudo_inverse(normal).pinv * (Bt.transpose() * r);
  Vec6 body;
  body.head<3>() = x.R_B.transpose() * world.head<3>();
  body.tail<3>() = x.R_B.transpose() * world.tail<3>();
  return body;
}

// ---------------------------------------------------------------------------
// Observer

/// Minimal model interface the observer needs.
template <typename Model>
concept MomentumModel = requires(const Model& m, const typename Model::State& x) {
  { m.mass_matrix(x) } -> std::convertible_to<Mat10>;
  { m.bias_forces(x) } -> std::convertible_to<Vec10>;
  { m.velocity(x) } -> std::convertible_to<Vec10>;
  { m.joint_map(x) } -> std::convertible_to<Mat10x4>;
  { m.grf_map(x) } -> std::convertible_to<Mat10x6>;
};

struct SuppliedGrf {
  Vec6 lambda = Vec6::Zero();
};
struct ConstraintModelGrf {};
using GrfSource = std::variant<SuppliedGrf, ConstraintModelGrf>;

enum class ObserverMode { Supplied, Constraint };

inline const char* to_string(ObserverMode m) {
  return m == ObserverMode::Supplied ? "supplied" : "constraint";
}

inline ObserverMode parse_observer_mode(const std::string& s) {
  if (s == "supplied") return ObserverMode::Supplied;
  if (s == "constraint") return ObserverMode::Constraint;
  throw std::invalid_argument("unknown observer mode '" + s + "' (expected supplied or constraint)");
}

/// Gain presets, in generalized-velocity order [p_dot_B; omega_B; hips].
inline Vec10 preset_gains(ObserverMode m) {
  Vec10 k;
  if (m == ObserverMode::Supplied) {
    k << 25, 25, 25, 25, 25, 25, 1, 1, 1, 1;
  } else {
    k << 800, 1200, 60, 3000, 800, 500, 1, 1, 1, 1;
  }
  return k;
}

template <typename State>
struct ObserverInputs {
  State state;
  Vec4 u_j = Vec4::Zero();  // joint torque held over the step ending at this sample
  GrfSource grf = ConstraintModelGrf{};
};

struct ObserverState {
  Vec10 r = Vec10::Zero();
  Vec10 p_hat0 = Vec10::Zero();
  Vec10 integral = Vec10::Zero();
  Vec10 k0 = Vec10::Ones();  // diagonal of K0, 1/s
  Mat10 M_prev = Mat10::Identity();
  Vec10 known_prev = Vec10::Zero();  // beta + B_g lambda at the previous sample
  Vec6 lambda_hat = Vec6::Zero();
  ContactRank rank;
  bool initialized = false;
  long steps = 0;
};

namespace detail {

template <typename Model>
Vec6 resolve_grf(const Model& model, const typename Model::State& x, const GrfSource& src,
                 const Vec10& r, const Vec4& u_j, ContactRank* rank) {
  if (const auto* s = std::get_if<SuppliedGrf>(&src)) return s->lambda;
  if constexpr (requires { constraint_grf(x, r, u_j, model); }) {
    const ConstraintGrf c = constraint_grf(x, r, u_j, model);
    if (rank) *rank = c.rank;
    return c.lambda;
  } else {
    throw std::invalid_argument("observer: model has no contact-constraint ground force");
  }
}

inline void require_finite(const Vec10& v, const char* what) {
  if (!v.allFinite()) throw std::domain_error(std::string("observer: non-finite ") + what);
}

}  // namespace detail

template <MomentumModel Model>
ObserverState observer_init(const Vec10& k0, const ObserverInputs<typename Model::State>& in,
                            const Model& model) {
  if (!((k0.array() > 0.0).all() && k0.allFinite())) {
    throw std::invalid_argument("observer: K0 diagonal entries must be positive");
  }
  const Vec10 v = model.velocity(in.state);
  detail::require_finite(v, "velocity");
  ObserverState obs;
  obs.k0 = k0;
  obs.M_prev = model.mass_matrix(in.state);
  obs.p_hat0 = obs.M_prev * v;
  const Vec6 lam = detail::resolve_grf(model, in.state, in.grf, obs.r, in.u_j, &obs.rank);
  // M_dot is taken as zero on the first sample.
  obs.known_prev = -model.bias_forces(in.state) + model.grf_map(in.state) * lam;
  obs.lambda_hat = lam;
  obs.initialized = true;
  return obs;
}

/// Advance the observer by one sample. The integral uses the trapezoidal rule
/// for beta, B_g lambda and r (solved implicitly in r) and the exact integral
/// of the held joint torque. Throws on non-finite measurements; `obs` is not
/// modified in that case.
template <MomentumModel Model>
ObserverState observer_step(const ObserverState& obs,
                            const ObserverInputs<typename Model::State>& in, double dt,
                            const Model& model) {
  if (!(dt > 0.0)) throw std::invalid_argument("observer: dt must be positive");
  if (!obs.initialized) throw std::logic_error("observer: not initialized");
  const Vec10 v = model.velocity(in.state);
  detail::require_finite(v, "velocity");
  if (!in.u_j.allFinite()) throw std::domain_error("observer: non-finite joint torque");

  ObserverState next = obs;
  const Mat10 M = model.mass_matrix(in.state);
  const Mat10 M_dot = (M - obs.M_prev) / dt;
  const Vec10 beta = -model.bias_forces(in.state) + M_dot * v;
  const Vec6 lam = detail::resolve_grf(model, in.state, in.grf, obs.r, in.u_j, &next.rank);
  const Vec10 known = beta + model.grf_map(in.state) * lam;
  detail::require_finite(known, "model terms");

  const Vec10 p = M * v;
  const Vec10 partial = obs.integral + 0.5 * dt * (obs.known_prev + known + obs.r) +
                        dt * (model.joint_map(in.state) * in.u_j);
  const Vec10 k = obs.k0;
  const Vec10 target = p - partial - obs.p_hat0;
  // r = K0 (target - dt/2 r)  =>  r = K0 target / (1 + K0 dt / 2)
  next.r = (k.array() * target.array() / (1.0 + 0.5 * dt * k.array())).matrix();
  next.integral = partial + 0.5 * dt * next.r;
  next.M_prev = M;
  next.known_prev = known;
  next.lambda_hat = lam;
  ++next.steps;
  return next;
}

}  // namespace harpy
