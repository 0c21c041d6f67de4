#include "harpy/fixtures.hpp"
#include "harpy/model.hpp"
#include "harpy/observer.hpp"
#include "harpy/verification.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace harpy;

namespace {

// Foot position rebuilt with Eigen's angle-axis rotations, link by link.
Vec3 foot_by_angle_axis(const RobotState& x, const ModelParams& p, Side s) {
  const double m = s == Side::Left ? 1.0 : -1.0;
  auto lat = [m](const Vec3& l) { return Vec3(l.x(), m * l.y(), l.z()); };
  const int i = index(s);
  const Eigen::AngleAxisd frontal(x.gamma_h[i], Vec3::UnitX());
  const Eigen::AngleAxisd hip(x.phi_h[i], Vec3::UnitY());
  const Eigen::AngleAxisd knee(x.phi_k[i], Vec3::UnitY());
  const Vec3 local = lat(p.l1) + frontal * (lat(p.l2) + hip * (lat(p.l3) + knee * lat(p.l4)));
  return x.p_B + x.R_B * local;
}

RobotState mirrored(const RobotState& x) {
  const Mat3 S = Vec3(1.0, -1.0, 1.0).asDiagonal();
  RobotState y = x;
  y.p_B = S * x.p_B;
  y.R_B = S * x.R_B * S;
  y.gamma_h = Vec2(-x.gamma_h[1], -x.gamma_h[0]);
  y.phi_h = Vec2(x.phi_h[1], x.phi_h[0]);
  y.phi_k = Vec2(x.phi_k[1], x.phi_k[0]);
  y.phi_k_dot = Vec2(x.phi_k_dot[1], x.phi_k_dot[0]);
  y.v.segment<3>(0) = S * x.v.segment<3>(0);
  y.v.segment<3>(3) = Vec3(-x.v[3], x.v[4], -x.v[5]);
  y.v[6] = -x.v[7];
  y.v[7] = -x.v[6];
  y.v[8] = x.v[9];
  y.v[9] = x.v[8];
  return y;
}

}  // namespace

TEST(ForwardKinematics, ZeroPoseLeftFoot) {
  const ModelParams p;
  const FramePositions fk = forward_kinematics(RobotState{}, p);
  EXPECT_NEAR((fk.foot[0] - Vec3(0.0, 0.7, -0.4)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((fk.foot[1] - Vec3(0.0, -0.7, -0.4)).norm(), 0.0, 1e-15);
}

TEST(ForwardKinematics, MatchesAngleAxisChain) {
  const ModelParams p;
  std::mt19937_64 rng(11);
  for (int n = 0; n < 200; ++n) {
    const RobotState x = random_state(rng);
    const FramePositions fk = forward_kinematics(x, p);
    for (Side s : {Side::Left, Side::Right}) {
      EXPECT_LT((fk.foot[index(s)] - foot_by_angle_axis(x, p, s)).norm(), 1e-12);
    }
  }
}

TEST(ForwardKinematics, RigidTranslation) {
  const ModelParams p;
  std::mt19937_64 rng(12);
  const RobotState x = random_state(rng);
  RobotState y = x;
  const Vec3 d(0.3, -1.2, 0.7);
  y.p_B += d;
  const FramePositions a = forward_kinematics(x, p), b = forward_kinematics(y, p);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR((b.hip[i] - a.hip[i] - d).norm(), 0.0, 1e-14);
    EXPECT_NEAR((b.knee[i] - a.knee[i] - d).norm(), 0.0, 1e-14);
    EXPECT_NEAR((b.foot[i] - a.foot[i] - d).norm(), 0.0, 1e-14);
    EXPECT_NEAR((b.thruster[i] - a.thruster[i] - d).norm(), 0.0, 1e-14);
  }
  EXPECT_NEAR((b.com - a.com - d).norm(), 0.0, 1e-14);
}

TEST(ForwardKinematics, VelocityMatchesFiniteDifference) {
  const ModelParams p;
  std::mt19937_64 rng(13);
  const double h = 1e-6;
  for (int n = 0; n < 50; ++n) {
    RobotState x = random_state(rng);
    x.phi_k_dot.setZero();
    const FramePositions fk = forward_kinematics(x, p);
    const FramePositions fp = forward_kinematics(displace(x, h * x.v), p);
    const FramePositions fm = forward_kinematics(displace(x, -h * x.v), p);
    for (int i = 0; i < 2; ++i) {
      const Vec3 fd = (fp.foot[i] - fm.foot[i]) / (2.0 * h);
      EXPECT_LT((fd - fk.foot_vel[i]).norm(), 1e-6 * std::max(1.0, fd.norm()));
      const Vec3 fdk = (fp.knee[i] - fm.knee[i]) / (2.0 * h);
      EXPECT_LT((fdk - fk.knee_vel[i]).norm(), 1e-6 * std::max(1.0, fdk.norm()));
    }
  }
}

TEST(ForwardKinematics, KneeRateMovesFootAlongKneeColumn) {
  const ModelParams p;
  std::mt19937_64 rng(14);
  const double h = 1e-6;
  RobotState x = random_state(rng);
  x.v.setZero();
  x.phi_k_dot = Vec2(0.7, -0.4);
  const FramePositions fk = forward_kinematics(x, p);
  for (Side s : {Side::Left, Side::Right}) {
    const int i = index(s);
    RobotState a = x, b = x;
    a.phi_k[i] += h * x.phi_k_dot[i];
    b.phi_k[i] -= h * x.phi_k_dot[i];
    const Vec3 fd = (forward_kinematics(a, p).foot[i] - forward_kinematics(b, p).foot[i]) / (2.0 * h);
    EXPECT_LT((fd - fk.foot_vel[i]).norm(), 1e-8);
  }
}

TEST(ForwardKinematics, MirrorSymmetry) {
  const ModelParams p;
  const Mat3 S = Vec3(1.0, -1.0, 1.0).asDiagonal();
  std::mt19937_64 rng(15);
  for (int n = 0; n < 100; ++n) {
    const RobotState x = random_state(rng);
    const FramePositions a = forward_kinematics(x, p);
    const FramePositions b = forward_kinematics(mirrored(x), p);
    for (int i = 0; i < 2; ++i) {
      EXPECT_LT((b.foot[i] - S * a.foot[1 - i]).norm(), 1e-12);
      EXPECT_LT((b.knee[i] - S * a.knee[1 - i]).norm(), 1e-12);
      EXPECT_LT((b.thruster[i] - S * a.thruster[1 - i]).norm(), 1e-12);
      EXPECT_LT((b.foot_vel[i] - S * a.foot_vel[1 - i]).norm(), 1e-11);
    }
    EXPECT_LT((b.com - S * a.com).norm(), 1e-12);
  }
}

TEST(MassMatrix, TranslationBlockIsTotalMass) {
  const ModelParams p;
  std::mt19937_64 rng(21);
  for (int n = 0; n < 20; ++n) {
    const Mat10 M = mass_matrix(random_state(rng), p);
    EXPECT_LT((M.topLeftCorner<3, 3>() - 4.0 * Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(MassMatrix, SymmetricPositiveDefiniteAndKineticEnergy) {
  const CheckResult r = check_mass_matrix(1000);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(MassMatrix, ExactlySymmetric) {
  const ModelParams p;
  std::mt19937_64 rng(22);
  for (int n = 0; n < 100; ++n) {
    const Mat10 M = mass_matrix(random_state(rng), p);
    EXPECT_EQ((M - M.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(BiasForces, GravityOnlyAtRest) {
  const ModelParams p;
  std::mt19937_64 rng(31);
  for (int n = 0; n < 20; ++n) {
    RobotState x = random_state(rng);
    x.v.setZero();
    x.R_B = Mat3::Identity();
    const Vec10 h = bias_forces(x, p);
    EXPECT_LT((h - gravity_forces(x, p)).norm(), 1e-12);
    EXPECT_NEAR(h[0], 0.0, 1e-12);
    EXPECT_NEAR(h[1], 0.0, 1e-12);
    EXPECT_NEAR(h[2], 39.24, 1e-12);
  }
}

TEST(BiasForces, GravityIsPotentialGradient) {
  const ModelParams p;
  std::mt19937_64 rng(32);
  const double h = 1e-6;
  const RobotState x = random_state(rng);
  const Vec10 G = gravity_forces(x, p);
  for (int k = 0; k < kDof; ++k) {
    Vec10 e = Vec10::Zero();
    e[k] = h;
    const double fd = (potential_energy(displace(x, e), p) - potential_energy(displace(x, -e), p)) / (2.0 * h);
    EXPECT_NEAR(G[k], fd, 1e-7) << "coordinate " << k;
  }
}

TEST(BiasForces, SkewSymmetry) {
  const CheckResult r = check_skew_symmetry(100);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(InputMappings, ThrusterTranslationBlocksAreIdentity) {
  const ModelParams p;
  std::mt19937_64 rng(41);
  const InputMaps maps = input_mappings(random_state(rng), p);
  EXPECT_TRUE((maps.B_t.topLeftCorner<3, 3>() - Mat3::Identity()).isZero(0.0));
  EXPECT_TRUE((maps.B_t.topRightCorner<3, 3>() - Mat3::Identity()).isZero(0.0));
}

TEST(InputMappings, JacobiansMatchFiniteDifferences) {
  const CheckResult r = check_jacobians(100);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(InputMappings, JointSelectorExtractsHipRows) {
  Vec10 f;
  f << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  EXPECT_EQ(Vec4(joint_map().transpose() * f), Vec4(7, 8, 9, 10));
}

TEST(ForwardDynamics, FreeFall) {
  ModelParams p;
  std::mt19937_64 rng(51);
  RobotState x = random_state(rng);
  x.v.setZero();
  x.p_B.z() = 50.0;
  const Accelerations a = forward_dynamics(x, Vec4::Zero(), Vec6::Zero(), Vec6::Zero(), Vec2::Zero(), p);
  EXPECT_LT((a.v_dot.head<3>() - p.gravity).norm(), 1e-10);
  EXPECT_LT(a.v_dot.tail<7>().norm(), 1e-10);
}

TEST(ForwardDynamics, HoverThrustCancelsWeight) {
  const ModelParams p;
  RobotState x;
  x.p_B.z() = 5.0;
  Vec6 u_t = Vec6::Zero();
  u_t[2] = u_t[5] = 0.5 * 39.24;
  const Vec4 u_j = gravity_forces(x, p).tail<4>();
  const Accelerations a = forward_dynamics(x, u_j, u_t, Vec6::Zero(), Vec2::Zero(), p);
  EXPECT_LT(a.v_dot.head<3>().norm(), 1e-9);
  EXPECT_LT(a.v_dot.norm(), 1e-9);
}

TEST(ForwardDynamics, DefiningResidual) {
  const ModelParams p;
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int k = 0; k < 50; ++k) {
    const RobotState x = random_state(rng);
    Vec4 u_j;
    Vec6 u_t, u_g;
    for (auto& e : u_j) e = n(rng);
    for (auto& e : u_t) e = n(rng);
    for (auto& e : u_g) e = n(rng);
    const Vec2 u_k(n(rng), n(rng));
    const Accelerations a = forward_dynamics(x, u_j, u_t, u_g, u_k, p);
    const InputMaps m = input_mappings(x, p);
    const Vec10 res = mass_matrix(x, p) * a.v_dot + bias_forces(x, p) - (m.B_j * u_j + m.B_t * u_t + m.B_g * u_g);
    EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(a.knee, u_k);
  }
}
