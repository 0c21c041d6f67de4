#include "harpy/evaluation.hpp"
#include "harpy/fixtures.hpp"
#include "harpy/integrator.hpp"
#include "harpy/observer.hpp"
#include "harpy/simulator.hpp"
#include "harpy/verification.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

using namespace harpy;

namespace {

RobotState frozen_pose() {
  RobotState x;
  x.gamma_h = Vec2(0.1, -0.1);
  x.phi_h = Vec2(0.2, -0.3);
  return x;
}

// Frozen plant driven by a generalized force whose time integral is W(t):
// v(t) = M^-1 W(t). Returns r at every sample.
std::vector<Vec10> run_frozen(const FrozenModel& model, const Vec10& k0, double dt, double T,
                              const std::function<Vec10(double)>& W, const Vec4& u_j = Vec4::Zero(),
                              const Vec6& lambda = Vec6::Zero()) {
  const Mat10 M = model.mass_matrix(FrozenState{});
  const auto ldlt = M.ldlt();
  ObserverInputs<FrozenState> in;
  in.u_j = u_j;
  in.grf = SuppliedGrf{lambda};
  in.state.v = ldlt.solve(W(0.0));
  ObserverState obs = observer_init(k0, in, model);
  std::vector<Vec10> out{obs.r};
  const long n = std::lround(T / dt);
  for (long i = 1; i <= n; ++i) {
    in.state.v = ldlt.solve(W(i * dt));
    obs = observer_step(obs, in, dt, model);
    out.push_back(obs.r);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Observer on frozen dynamics

TEST(Observer, ZeroThrustStaysZero) {
  const ModelParams p;
  const FrozenModel model = FrozenModel::at(frozen_pose(), p);
  const Vec4 u_j(0.3, -0.2, 0.5, 0.1);
  Vec6 lambda;
  lambda << 1.0, -2.0, 20.0, -0.5, 1.5, 18.0;
  const Vec10 tau = model.joint_map(FrozenState{}) * u_j + model.grf_map(FrozenState{}) * lambda;
  const auto r = run_frozen(model, Vec10::Constant(25.0), 1e-3, 2.0, [&](double t) { return (tau * t).eval(); },
                            u_j, lambda);
  double worst = 0.0;
  for (const Vec10& v : r) worst = std::max(worst, v.cwiseAbs().maxCoeff());
  EXPECT_LE(worst, 1e-9);
}

TEST(Observer, StepResponseAtThreeTimeConstants) {
  const double target = 1.0 - std::exp(-3.0);
  for (double k : {1.0, 25.0, 100.0}) {
    const auto [lo, hi] = filter_step_ratio(k);
    EXPECT_NEAR(lo / target, 1.0, tol::kFilterStep) << "k = " << k;
    EXPECT_NEAR(hi / target, 1.0, tol::kFilterStep) << "k = " << k;
  }
}

TEST(Observer, FirstOrderLagIsSecondOrderAccurate) {
  const ModelParams p;
  const FrozenModel model = FrozenModel::at(frozen_pose(), p);
  Vec10 w;
  w << 3.0, -2.0, 40.0, 0.5, -0.8, 0.3, 0.2, -0.1, 0.4, 0.3;
  const double k = 25.0, T = 0.2;
  auto error = [&](double dt) {
    const auto r = run_frozen(model, Vec10::Constant(k), dt, T, [&](double t) { return (w * t).eval(); });
    double worst = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const Vec10 exact = (1.0 - std::exp(-k * i * dt)) * w;
      worst = std::max(worst, (r[i] - exact).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  const double e1 = error(2e-3), e2 = error(1e-3);
  EXPECT_GT(std::log2(e1 / e2), 1.9);
  EXPECT_LT(e2, 1e-3);
}

TEST(Observer, DoublingGainNeverWorsensTracking) {
  const ModelParams p;
  const FrozenModel model = FrozenModel::at(frozen_pose(), p);
  Vec10 a;
  a << 5.0, -3.0, 12.0, 0.6, -0.4, 0.9, 0.0, 0.0, 0.0, 0.0;
  const double omega = 2.0 * std::numbers::pi * 1.3, dt = 1e-3;
  auto W = [&](double t) { return (a * (1.0 - std::cos(omega * t)) / omega).eval(); };
  std::array<double, 6> prev;
  prev.fill(INFINITY);
  for (double k : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
    const auto r = run_frozen(model, Vec10::Constant(k), dt, 5.0, W);
    for (int c = 0; c < 6; ++c) {
      std::vector<double> truth, est;
      for (std::size_t i = 2000; i < r.size(); ++i) {
        truth.push_back(a[c] * std::sin(omega * i * dt));
        est.push_back(r[i][c]);
      }
      const double e = nrmse(truth, est);
      EXPECT_LE(e, prev[c]) << "k = " << k << ", channel " << c;
      prev[c] = e;
    }
  }
}

TEST(Observer, NonFiniteMeasurementThrows) {
  const ModelParams p;
  const FrozenModel model = FrozenModel::at(frozen_pose(), p);
  ObserverInputs<FrozenState> in;
  in.grf = SuppliedGrf{};
  const ObserverState obs = observer_init(Vec10::Constant(10.0), in, model);
  ObserverInputs<FrozenState> bad = in;
  bad.state.v[3] = NAN;
  EXPECT_THROW(observer_step(obs, bad, 1e-3, model), std::domain_error);
  bad = in;
  bad.u_j[1] = INFINITY;
  EXPECT_THROW(observer_step(obs, bad, 1e-3, model), std::domain_error);
  EXPECT_EQ(obs.steps, 0);
  EXPECT_NO_THROW(observer_step(obs, in, 1e-3, model));
}

TEST(Observer, RejectsBadGainsAndStep) {
  const FrozenModel model = FrozenModel::at(frozen_pose(), ModelParams{});
  ObserverInputs<FrozenState> in;
  in.grf = SuppliedGrf{};
  Vec10 k = Vec10::Ones();
  k[4] = 0.0;
  EXPECT_THROW(observer_init(k, in, model), std::invalid_argument);
  const ObserverState obs = observer_init(Vec10::Ones(), in, model);
  EXPECT_THROW(observer_step(obs, in, 0.0, model), std::invalid_argument);
  EXPECT_THROW(observer_step(ObserverState{}, in, 1e-3, model), std::logic_error);
}

TEST(Observer, FrozenModelHasNoConstraintSource) {
  const FrozenModel model = FrozenModel::at(frozen_pose(), ModelParams{});
  ObserverInputs<FrozenState> in;
  in.grf = ConstraintModelGrf{};
  EXPECT_THROW(observer_init(Vec10::Ones(), in, model), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Observer on the full model

TEST(Observer, ConvergesToFilteredThrustInFlight) {
  // Against the same truth pushed through an exact discrete first-order
  // filter, the observer error shrinks linearly with dt.
  const ModelParams p;
  const HarpyModel model(p);
  const FlightCase c = flight_case();
  auto no_contact = [](const RobotState&) { return Vec6::Zero().eval(); };
  auto error = [&](double dt) {
    const double k = 25.0;
    RobotState x = c.state;
    ObserverInputs<RobotState> in;
    in.state = x;
    in.grf = SuppliedGrf{};
    ObserverState obs = observer_init(Vec10::Constant(k), in, model);
    Vec10 ref = Vec10::Zero(), prev = thruster_map(x, p) * c.u_t;
    double worst = 0.0;
    const long n = std::lround(1.0 / dt);
    for (long i = 0; i < n; ++i) {
      x = rk4_step(x, i * dt, dt, robot_flow(p, c.u_j, c.u_t, c.u_k, no_contact)).state;
      in.state = x;
      in.u_j = c.u_j;
      obs = observer_step(obs, in, dt, model);
      const Vec10 cur = thruster_map(x, p) * c.u_t;
      ref = (ref * (1.0 - 0.5 * k * dt) + 0.5 * k * dt * (prev + cur)) / (1.0 + 0.5 * k * dt);
      prev = cur;
      worst = std::max(worst, (obs.r - ref).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  const double e1 = error(2e-3), e2 = error(1e-3), e3 = error(5e-4);
  EXPECT_GT(std::log2(e1 / e2), 0.9);
  EXPECT_GT(std::log2(e2 / e3), 0.9);
}

TEST(Observer, MomentumRateConsistency) {
  const ModelParams p;
  const FlightCase c = flight_case();
  auto no_contact = [](const RobotState&) { return Vec6::Zero().eval(); };
  auto residual = [&](double dt) {
    const RobotState x0 = c.state;
    const RobotState x1 = rk4_step(x0, 0.0, dt, robot_flow(p, c.u_j, c.u_t, c.u_k, no_contact)).state;
    const Mat10 M0 = mass_matrix(x0, p), M1 = mass_matrix(x1, p);
    const Vec10 beta = -bias_forces(x0, p) + (M1 - M0) / dt * x0.v;
    const InputMaps m = input_mappings(x0, p);
    const Vec10 rate = (M1 * x1.v - M0 * x0.v) / dt;
    return (rate - (beta + m.B_j * c.u_j + m.B_t * c.u_t)).norm();
  };
  const double e1 = residual(1e-3), e2 = residual(5e-4), e3 = residual(2.5e-4);
  EXPECT_LT(e2, 0.6 * e1);
  EXPECT_LT(e3, 0.6 * e2);
}

// ---------------------------------------------------------------------------
// Thruster force recovery

TEST(BodyFrameThrust, ZeroIn) {
  std::mt19937_64 rng(3);
  EXPECT_EQ(body_frame_thrust(Vec10::Zero(), random_state(rng), ModelParams{}), Vec6::Zero());
}

TEST(BodyFrameThrust, MatchesMinimumNormLeastSquares) {
  const ModelParams p;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int k = 0; k < 100; ++k) {
    const RobotState x = random_state(rng);
    Vec6 u;
    for (auto& e : u) e = n(rng);
    const Mat10x6 Bt = thruster_map(x, p);
    const Vec10 r = Bt * u;
    const Eigen::MatrixXd B = Bt;
    const Vec6 world = B.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(Eigen::VectorXd(r));
    Vec6 expect;
    expect << x.R_B.transpose() * world.head<3>(), x.R_B.transpose() * world.tail<3>();
    EXPECT_LT((body_frame_thrust(r, x, p) - expect).norm(), 1e-9);
  }
}

TEST(BodyFrameThrust, RecoversForcesOutsideTheSharedLine) {
  // Equal and opposite pulls along the line through both thrusters are
  // invisible; everything else comes back exactly.
  const ModelParams p;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int k = 0; k < 100; ++k) {
    const RobotState x = random_state(rng);
    Vec6 u_body;
    for (auto& e : u_body) e = n(rng);
    const double pull = 0.5 * (u_body[1] - u_body[4]);
    u_body[1] -= pull;
    u_body[4] += pull;
    Vec6 u_world;
    u_world << x.R_B * u_body.head<3>(), x.R_B * u_body.tail<3>();
    const Vec10 r = thruster_map(x, p) * u_world;
    EXPECT_LT((body_frame_thrust(r, x, p) - u_body).norm(), 1e-9);
  }
}

TEST(BodyFrameThrust, SymmetricVerticalSplit) {
  Vec10 r = Vec10::Zero();
  r[2] = 40.0;
  const Vec6 u = body_frame_thrust(r, RobotState{}, ModelParams{});
  EXPECT_LT((u.head<3>() - Vec3(0, 0, 20)).norm(), 1e-9);
  EXPECT_LT((u.tail<3>() - Vec3(0, 0, 20)).norm(), 1e-9);
}

// ---------------------------------------------------------------------------
// Contact-constraint ground force

TEST(ConstraintGrf, NoContact) {
  RobotState x;
  x.p_B.z() = 2.0;
  const ConstraintGrf c = constraint_grf(x, Vec10::Zero(), Vec4::Zero(), ModelParams{});
  EXPECT_TRUE(c.no_contact);
  EXPECT_EQ(c.lambda, Vec6::Zero());
  EXPECT_EQ(c.rank.stance_feet, 0);
}

TEST(ConstraintGrf, StaticSingleSupportMatchesGroundModel) {
  const ModelParams p;
  const GroundParams g;
  const StaticSupport s = static_single_support(p, g);
  ASSERT_LT(s.residual, 1e-9);
  const ConstraintGrf c = constraint_grf(s.state, s.r_true, s.u_j, p);
  ASSERT_TRUE(c.stance[0]);
  ASSERT_FALSE(c.stance[1]);
  EXPECT_FALSE(c.rank.deficient);
  const double scale = s.u_g.head<3>().norm();
  ASSERT_GT(scale, 1.0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LE(std::abs(c.lambda[i] - s.u_g[i]), tol::kConstraintGrf * scale) << "component " << i;
  }
  EXPECT_EQ(c.lambda.tail<3>(), Vec3::Zero());
}

TEST(ConstraintGrf, StaticSupportAcrossDepthsAndSwingPoses) {
  const ModelParams p;
  const GroundParams g;
  for (double depth : {1e-3, 2e-3, 4e-3}) {
    for (double swing : {-0.4, -0.25, -0.1}) {
      const StaticSupport s = static_single_support(p, g, depth, swing);
      const ConstraintGrf c = constraint_grf(s.state, s.r_true, s.u_j, p);
      EXPECT_LE((c.lambda.head<3>() - s.u_g.head<3>()).cwiseAbs().maxCoeff(),
                tol::kConstraintGrf * s.u_g.head<3>().norm());
    }
  }
}

TEST(ConstraintGrf, DoubleSupportIsRankDeficient) {
  const ModelParams p;
  const GroundParams g;
  const RobotState x = standing_state(p, g, GaitConfig{});
  const ConstraintGrf c = constraint_grf(x, Vec10::Zero(), Vec4::Zero(), p);
  EXPECT_EQ(c.rank.stance_feet, 2);
  EXPECT_TRUE(c.rank.deficient);
  EXPECT_LT(c.rank.wrench_rank, 6);
}

TEST(JcDot, ZeroAtRest) {
  std::mt19937_64 rng(6);
  RobotState x = random_state(rng);
  x.v.setZero();
  EXPECT_EQ(j_c_dot(x, ModelParams{}), Mat6x10::Zero());
}

TEST(JcDot, PureTranslationIsZero) {
  std::mt19937_64 rng(7);
  RobotState x = random_state(rng);
  x.v.tail<7>().setZero();
  EXPECT_LT(j_c_dot(x, ModelParams{}).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(JcDot, MatchesFiniteDifference) {
  const ModelParams p;
  std::mt19937_64 rng(8);
  const double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    RobotState x = random_state(rng);
    x.phi_k_dot.setZero();
    const Mat6x10 fd =
        (contact_jacobian(displace(x, h * x.v), p) - contact_jacobian(displace(x, -h * x.v), p)) / (2.0 * h);
    EXPECT_LT((j_c_dot(x, p) - fd).cwiseAbs().maxCoeff(), 1e-5);
  }
}
