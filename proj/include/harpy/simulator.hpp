// Closed-loop walking simulation: controller, compliant ground, RK4 and the
// (passive) momentum observer, with one log row per step.
#pragma once

#include "harpy/controller.hpp"
#include "harpy/ground.hpp"
#include "harpy/integrator.hpp"
#include "harpy/model.hpp"
#include "harpy/observer.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace harpy {

// ---------------------------------------------------------------------------
// Scenario

struct ObserverConfig {
  bool enabled = true;
  ObserverMode mode = ObserverMode::Supplied;
  std::optional<Vec10> k0;  // generalized-velocity order; preset for `mode` when unset

  Vec10 gains() const { return k0 ? *k0 : preset_gains(mode); }
};

struct FallConfig {
  double min_height = 0.1;  // m
  double max_tilt = 1.0;    // rad, on |roll| and |pitch|
};

struct PerturbationConfig {
  double thrust_noise = 0.0;  // std dev of white noise added to each thrust axis, N
};

struct Scenario {
  std::string name = "default";
  ModelParams model;
  GroundParams ground;
  GaitConfig gait;
  ControllerGains gains;
  ObserverConfig observer;
  FallConfig fall;
  PerturbationConfig perturbation;
  std::optional<RobotState> initial;  // standing pose when unset
  double dt = 1e-3;
  double duration = 5.0;
  std::uint64_t seed = 0;
  std::string log_path = "harpy_log.csv";

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("scenario: dt must be positive");
    if (!(duration >= dt)) throw std::invalid_argument("scenario: duration must be at least dt");
    model.validate();
    ground.validate();
    gait.validate();
    gains.validate();
    const Vec10 k = observer.gains();
    if (!((k.array() > 0.0).all() && k.allFinite())) {
      throw std::invalid_argument("scenario: observer K0 entries must be positive");
    }
    if (!(fall.min_height >= 0.0 && fall.max_tilt > 0.0)) {
      throw std::invalid_argument("scenario: invalid fall thresholds");
    }
    if (!(perturbation.thrust_noise >= 0.0)) {
      throw std::invalid_argument("scenario: thrust_noise must be non-negative");
    }
    if (initial && !initial->finite()) throw std::invalid_argument("scenario: non-finite initial state");
  }
};

/// Double support at zero velocity, feet sunk to the static penetration depth
/// under the full weight; the body sits the reference height above the feet.
inline RobotState standing_state(const ModelParams& p, const GroundParams& g, const GaitConfig& gait) {
  const double sink = p.total_mass() * std::abs(p.gravity.z()) / (2.0 * g.k_gp);
  RobotState x;
  x.p_B = Vec3(0.0, 0.0, gait.body_height_ref - sink);
  const double w = nominal_stance_width(gait, p);
  for (Side s : {Side::Left, Side::Right}) {
    const int i = index(s);
    const Vec3 foot(0.0, side_sign(s) * w, -sink);
    const IkResult ik = inverse_kinematics(foot - x.p_B, s, p);
    x.gamma_h[i] = ik.angles.gamma_h;
    x.phi_h[i] = ik.angles.phi_h;
    x.phi_k[i] = ik.angles.phi_k;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Phases

enum class Phase { SingleLeft, SingleRight, Double, Flight };

inline const char* to_string(Phase ph) {
  switch (ph) {
    case Phase::SingleLeft: return "SS-L";
    case Phase::SingleRight: return "SS-R";
    case Phase::Double: return "DS";
    case Phase::Flight: return "flight";
  }
  return "?";
}

/// A foot counts as loaded when its ground normal force is positive.
inline Phase detect_phase(const RobotState& /*x*/, const Vec6& u_g) {
  const bool left = u_g[2] > 0.0;
  const bool right = u_g[5] > 0.0;
  if (left && right) return Phase::Double;
  if (left) return Phase::SingleLeft;
  if (right) return Phase::SingleRight;
  return Phase::Flight;
}

// ---------------------------------------------------------------------------
// Log

struct LogRow {
  double t = 0.0;
  bool warmup = false;
  Phase phase = Phase::Flight;
  RobotState state;
  Vec4 u_j = Vec4::Zero();
  Vec2 u_k = Vec2::Zero();
  Vec6 u_t = Vec6::Zero();          // thrust applied from t on, world frame
  Vec6 u_g = Vec6::Zero();
  Vec3 cop = Vec3::Zero();
  Vec10 gen_thrust = Vec10::Zero(); // B_t u_t over the step ending at t
  Vec6 u_t_body = Vec6::Zero();     // that thrust in the body frame
  Vec10 r = Vec10::Zero();
  Vec6 u_t_hat = Vec6::Zero();      // body frame
  Vec6 lambda_hat = Vec6::Zero();   // ground force the observer used
  Vec6 lambda_c = Vec6::Zero();     // constraint-model ground force with the current r
  ContactRank rank;
  double energy = 0.0;              // kinetic + potential, J
  double kinetic = 0.0;
  Vec4 work = Vec4::Zero();         // cumulative [thrust, joint, ground, gravity], J
};

struct SimLog {
  std::string scenario;
  bool observer_enabled = true;
  ObserverMode mode = ObserverMode::Supplied;
  Vec10 k0 = Vec10::Ones();
  double dt = 0.0;
  double duration = 0.0;
  double warmup_end = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> fell_at;
  std::vector<LogRow> rows;
};

// ---------------------------------------------------------------------------
// Run

/// Deterministic closed-loop simulation of `sc`.
inline SimLog run(const Scenario& sc) {
  sc.validate();
  const ModelParams& p = sc.model;
  const HarpyModel model(p);
  const double dt = sc.dt;
  const long steps = std::lround(sc.duration / dt);

  SimLog log;
  log.scenario = sc.name;
  log.observer_enabled = sc.observer.enabled;
  log.mode = sc.observer.mode;
  log.k0 = sc.observer.gains();
  log.dt = dt;
  log.duration = sc.duration;
  log.warmup_end = sc.gait.step_period;
  log.seed = sc.seed;
  log.rows.reserve(static_cast<std::size_t>(steps) + 1);

  Controller controller(p, sc.gait, sc.gains);
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  RobotState x = sc.initial ? *sc.initial : standing_state(p, sc.ground, sc.gait);
  ObserverState obs;
  Vec4 u_j_prev = Vec4::Zero();
  Vec6 u_t_prev = Vec6::Zero();
  Vec4 work = Vec4::Zero();

  for (long k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const FramePositions fk = forward_kinematics(x, p);
    const ContactForce grf = both_feet_grf(fk, sc.ground);
    const ControlOutput ctrl = controller.update(t, x, fk, grf, dt);
    Vec6 u_t = ctrl.u_t;
    if (sc.perturbation.thrust_noise > 0.0) {
      for (int i = 0; i < 6; ++i) u_t[i] += sc.perturbation.thrust_noise * noise(rng);
    }

    LogRow row;
    row.t = t;
    row.warmup = t < log.warmup_end;
    row.phase = detect_phase(x, grf.u_g);
    row.state = x;
    row.u_j = ctrl.joints.u_j;
    row.u_k = ctrl.joints.u_k;
    row.u_t = u_t;
    row.u_g = grf.u_g;
    row.cop = ctrl.cop;
    const Vec6& u_t_acting = k == 0 ? u_t : u_t_prev;
    row.gen_thrust = thruster_map(x, p) * u_t_acting;
    row.u_t_body.head<3>() = x.R_B.transpose() * u_t_acting.head<3>();
    row.u_t_body.tail<3>() = x.R_B.transpose() * u_t_acting.tail<3>();
    row.kinetic = kinetic_energy(x, p);
    row.energy = row.kinetic + potential_energy(x, p);
    row.work = work;

    if (sc.observer.enabled) {
      ObserverInputs<RobotState> in;
      in.state = x;
      in.u_j = u_j_prev;
      if (sc.observer.mode == ObserverMode::Supplied) {
        in.grf = SuppliedGrf{grf.u_g};
      } else {
        in.grf = ConstraintModelGrf{};
      }
      obs = k == 0 ? observer_init(log.k0, in, model) : observer_step(obs, in, dt, model);
      row.r = obs.r;
      row.u_t_hat = body_frame_thrust(obs.r, x, p);
      row.lambda_hat = obs.lambda_hat;
      const ConstraintGrf cg = constraint_grf(x, obs.r, u_j_prev, p);
      row.lambda_c = cg.lambda;
      row.rank = cg.rank;
    }
    log.rows.push_back(row);
    if (k == steps) break;

    const GroundParams& ground = sc.ground;
    auto flow = robot_flow(p, ctrl.joints.u_j, u_t, ctrl.joints.u_k, [&p, &ground](const RobotState& s) {
      return both_feet_grf(s, p, ground).u_g;
    });
    const StepResult step = rk4_step(x, t, dt, flow);
    x = step.state;
    work += step.work;
    u_j_prev = ctrl.joints.u_j;
    u_t_prev = u_t;

    const EulerZYX e = euler_zyx(x.R_B);
    if (x.p_B.z() < sc.fall.min_height || std::abs(e.roll) > sc.fall.max_tilt ||
        std::abs(e.pitch) > sc.fall.max_tilt) {
      log.fell_at = t + dt;
      break;
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline void add_triplet(std::vector<std::string>& cols, const std::string& stem, const std::string& unit) {
  for (const char* a : {"x", "y", "z"}) cols.push_back(stem + "_" + a + "[" + unit + "]");
}

inline void add_feet(std::vector<std::string>& cols, const std::string& stem, const std::string& unit) {
  for (const char* side : {"L", "R"}) add_triplet(cols, stem + "_" + side, unit);
}

}  // namespace detail

/// Names of the generalized force rows shown in plots and reports.
inline const std::array<std::string, 6>& wrench_components() {
  static const std::array<std::string, 6> names{"F_x", "F_y", "F_z", "tau_x", "tau_y", "tau_z"};
  return names;
}

inline std::vector<std::string> log_columns(bool observer_enabled) {
  using detail::add_feet;
  using detail::add_triplet;
  std::vector<std::string> c{"t[s]", "warmup", "phase"};
  add_triplet(c, "p_B", "m");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c.push_back("R_B_" + std::to_string(i) + std::to_string(j) + "[-]");
  c.insert(c.end(), {"roll[rad]", "pitch[rad]", "yaw[rad]"});
  c.insert(c.end(), {"gamma_h_L[rad]", "gamma_h_R[rad]", "phi_h_L[rad]", "phi_h_R[rad]",
                     "phi_k_L[rad]", "phi_k_R[rad]"});
  add_triplet(c, "pdot_B", "m/s");
  add_triplet(c, "omega_B", "rad/s");
  c.insert(c.end(), {"gammadot_h_L[rad/s]", "gammadot_h_R[rad/s]", "phidot_h_L[rad/s]",
                     "phidot_h_R[rad/s]", "phidot_k_L[rad/s]", "phidot_k_R[rad/s]"});
  c.insert(c.end(), {"u_j_gamma_L[N m]", "u_j_gamma_R[N m]", "u_j_phi_L[N m]", "u_j_phi_R[N m]",
                     "u_k_L[rad/s^2]", "u_k_R[rad/s^2]"});
  add_feet(c, "u_t", "N");
  add_feet(c, "u_g", "N");
  add_triplet(c, "cop", "m");
  c.insert(c.end(), {"F_x[N]", "F_y[N]", "F_z[N]", "tau_x[N m]", "tau_y[N m]", "tau_z[N m]"});
  add_feet(c, "u_t_body", "N");
  c.insert(c.end(), {"energy[J]", "kinetic[J]", "work_thrust[J]", "work_joint[J]", "work_ground[J]",
                     "work_gravity[J]"});
  if (observer_enabled) {
    c.insert(c.end(), {"r_Fx[N]", "r_Fy[N]", "r_Fz[N]", "r_tx[N m]", "r_ty[N m]", "r_tz[N m]",
                       "r_gamma_L[N m]", "r_gamma_R[N m]", "r_phi_L[N m]", "r_phi_R[N m]"});
    add_feet(c, "u_t_hat", "N");
    add_feet(c, "lambda_hat", "N");
    add_feet(c, "lambda_c", "N");
    c.insert(c.end(), {"stance_feet", "constraint_rank", "wrench_rank", "rank_deficient"});
  }
  return c;
}

inline void write_csv(const SimLog& log, std::ostream& os) {
  const auto cols = log_columns(log.observer_enabled);
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) line += ',';
    line += cols[i];
  }
  os << line << '\n';
  auto put = [&line](double v) {
    line += ',';
    detail::append_number(line, v);
  };
  auto put_vec = [&put](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put(v[i]);
  };
  for (const LogRow& r : log.rows) {
    line.clear();
    detail::append_number(line, r.t);
    line += r.warmup ? ",1," : ",0,";
    line += to_string(r.phase);
    const RobotState& x = r.state;
    put_vec(x.p_B);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) put(x.R_B(i, j));
    const EulerZYX e = euler_zyx(x.R_B);
    put(e.roll);
    put(e.pitch);
    put(e.yaw);
    put_vec(x.gamma_h);
    put_vec(x.phi_h);
    put_vec(x.phi_k);
    put_vec(x.v);
    put_vec(x.phi_k_dot);
    put_vec(r.u_j);
    put_vec(r.u_k);
    put_vec(r.u_t);
    put_vec(r.u_g);
    put_vec(r.cop);
    put_vec(r.gen_thrust.head<6>());
    put_vec(r.u_t_body);
    put(r.energy);
    put(r.kinetic);
    put_vec(r.work);
    if (log.observer_enabled) {
      put_vec(r.r);
      put_vec(r.u_t_hat);
      put_vec(r.lambda_hat);
      put_vec(r.lambda_c);
      put(r.rank.stance_feet);
      put(r.rank.constraint_rank);
      put(r.rank.wrench_rank);
      put(r.rank.deficient ? 1.0 : 0.0);
    }
    os << line << '\n';
  }
}

inline nlohmann::ordered_json log_metadata(const SimLog& log) {
  nlohmann::ordered_json j;
  j["scenario"] = log.scenario;
  j["observer_enabled"] = log.observer_enabled;
  j["observer_mode"] = to_string(log.mode);
  j["K0"] = std::vector<double>(log.k0.data(), log.k0.data() + kDof);
  j["dt"] = log.dt;
  j["duration"] = log.duration;
  j["seed"] = log.seed;
  j["warmup_end"] = log.warmup_end;
  j["rows"] = log.rows.size();
  j["fell"] = log.fell_at.has_value();
  j["fell_at"] = log.fell_at ? nlohmann::ordered_json(*log.fell_at) : nlohmann::ordered_json(nullptr);
  return j;
}

inline std::string metadata_path(const std::string& log_path) { return log_path + ".meta.json"; }

/// Writes the CSV and its metadata sidecar.
inline void save_log(const SimLog& log, const std::string& path) {
  std::ofstream csv(path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(log, csv);
  std::ofstream meta(metadata_path(path), std::ios::binary);
  if (!meta) throw std::runtime_error("cannot open " + metadata_path(path) + " for writing");
  meta << log_metadata(log).dump(2) << '\n';
}

}  // namespace harpy
