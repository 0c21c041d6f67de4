// Scenario files (YAML). Physical parameters keep the model's short symbols; every
// map is checked for unknown keys so typos fail loudly with a line number.
#pragma once

#include "harpy/simulator.hpp"

#include <initializer_list>
#include <stdexcept>
#include <string>

#include <yaml-cpp/yaml.h>

namespace harpy {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string at_line(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  return m.is_null() ? std::string("?") : std::to_string(m.line + 1);
}

class Section {
 public:
  Section(const YAML::Node& node, std::string path, std::string source)
      : node_(node), path_(std::move(path)), source_(std::move(source)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, "expected a mapping");
  }

  explicit operator bool() const { return node_.IsDefined() && !node_.IsNull(); }

  void allow(std::initializer_list<const char*> keys) const {
    if (!*this) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) fail(kv.first, "unknown key '" + key + "'");
    }
  }

  Section child(const char* key) const {
    return Section(*this ? node_[key] : YAML::Node(), path_.empty() ? key : path_ + "." + key, source_);
  }

  void get(const char* key, double& out) const { read(key, out); }
  void get(const char* key, bool& out) const { read(key, out); }
  void get(const char* key, std::string& out) const { read(key, out); }
  void get(const char* key, std::uint64_t& out) const { read(key, out); }

  template <int N>
  void get(const char* key, Eigen::Matrix<double, N, 1>& out) const {
    if (!*this) return;
    const YAML::Node n = node_[key];
    if (!n) return;
    if (!n.IsSequence() || static_cast<int>(n.size()) != N) {
      fail(n, std::string("'") + key + "' must be a list of " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) out[i] = scalar<double>(n[i], key);
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& what) const {
    throw ConfigError(source_ + ":" + at_line(n) + ": " + (path_.empty() ? "" : path_ + ": ") + what);
  }

 private:
  template <typename T>
  void read(const char* key, T& out) const {
    if (!*this) return;
    const YAML::Node n = node_[key];
    if (n) out = scalar<T>(n, key);
  }

  template <typename T>
  T scalar(const YAML::Node& n, const char* key) const {
    if (!n.IsScalar()) fail(n, std::string("'") + key + "' must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, std::string("cannot read '") + key + "' from '" + n.Scalar() + "'");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::string source_;
};

inline void read_pid(const Section& s, PidGains& g) {
  s.allow({"kp", "ki", "kd", "i_limit"});
  s.get("kp", g.kp);
  s.get("ki", g.ki);
  s.get("kd", g.kd);
  s.get("i_limit", g.i_limit);
}

inline void read_pd(const Section& s, PdGains& g) {
  s.allow({"kp", "kd"});
  s.get("kp", g.kp);
  s.get("kd", g.kd);
}

}  // namespace detail

/// Fills a Scenario from parsed YAML; absent keys keep their defaults.
inline Scenario scenario_from_yaml(const YAML::Node& root, const std::string& source = "<config>") {
  using detail::Section;
  Scenario sc;
  if (!root || root.IsNull()) return sc;
  const Section top(root, "", source);
  top.allow({"name", "dt", "duration", "seed", "log", "model", "ground", "gait", "controller", "observer",
             "fall", "perturbation"});
  top.get("name", sc.name);
  top.get("dt", sc.dt);
  top.get("duration", sc.duration);
  top.get("seed", sc.seed);
  top.get("log", sc.log_path);

  const Section m = top.child("model");
  m.allow({"l1", "l2", "l3", "l4", "m_B", "m_H", "m_K", "I_B", "I_H", "I_K", "thruster_offset", "g"});
  m.get("l1", sc.model.l1);
  m.get("l2", sc.model.l2);
  m.get("l3", sc.model.l3);
  m.get("l4", sc.model.l4);
  m.get("m_B", sc.model.m_B);
  m.get("m_H", sc.model.m_H);
  m.get("m_K", sc.model.m_K);
  m.get("I_B", sc.model.I_B);
  m.get("I_H", sc.model.I_H);
  m.get("I_K", sc.model.I_K);
  m.get("thruster_offset", sc.model.thruster_offset);
  m.get("g", sc.model.gravity);

  const Section g = top.child("ground");
  g.allow({"k_gp", "k_gd", "mu_s", "mu_c", "mu_v", "v_s", "v_eps"});
  g.get("k_gp", sc.ground.k_gp);
  g.get("k_gd", sc.ground.k_gd);
  g.get("mu_s", sc.ground.mu_s);
  g.get("mu_c", sc.ground.mu_c);
  g.get("mu_v", sc.ground.mu_v);
  g.get("v_s", sc.ground.v_s);
  g.get("v_eps", sc.ground.v_eps);

  const Section gait = top.child("gait");
  gait.allow({"step_length", "step_height", "step_period", "body_height", "duty_factor", "stance_width",
              "raibert_gain"});
  gait.get("step_length", sc.gait.step_length);
  gait.get("step_height", sc.gait.step_height);
  gait.get("step_period", sc.gait.step_period);
  gait.get("body_height", sc.gait.body_height_ref);
  gait.get("duty_factor", sc.gait.duty_factor);
  gait.get("stance_width", sc.gait.stance_width);
  gait.get("raibert_gain", sc.gait.raibert_gain);

  const Section c = top.child("controller");
  c.allow({"hip_frontal", "hip_sagittal", "knee", "roll", "yaw", "body_kp", "body_kd", "leg_length",
           "swing_gravity_ff"});
  detail::read_pid(c.child("hip_frontal"), sc.gains.hip_frontal);
  detail::read_pid(c.child("hip_sagittal"), sc.gains.hip_sagittal);
  detail::read_pd(c.child("knee"), sc.gains.knee);
  detail::read_pd(c.child("roll"), sc.gains.roll);
  detail::read_pd(c.child("yaw"), sc.gains.yaw);
  detail::read_pd(c.child("leg_length"), sc.gains.leg_length);
  c.get("body_kp", sc.gains.body_kp);
  c.get("body_kd", sc.gains.body_kd);
  c.get("swing_gravity_ff", sc.gains.swing_gravity_ff);

  const Section o = top.child("observer");
  o.allow({"enabled", "mode", "K0"});
  o.get("enabled", sc.observer.enabled);
  std::string mode = to_string(sc.observer.mode);
  o.get("mode", mode);
  try {
    sc.observer.mode = parse_observer_mode(mode);
  } catch (const std::invalid_argument& e) {
    o.fail(root["observer"]["mode"], e.what());
  }
  if (o && root["observer"]["K0"]) {
    Vec10 k;
    o.get("K0", k);
    sc.observer.k0 = k;
  }

  const Section f = top.child("fall");
  f.allow({"min_height", "max_tilt"});
  f.get("min_height", sc.fall.min_height);
  f.get("max_tilt", sc.fall.max_tilt);

  const Section pt = top.child("perturbation");
  pt.allow({"thrust_noise"});
  pt.get("thrust_noise", sc.perturbation.thrust_noise);

  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return sc;
}

inline Scenario parse_scenario(const std::string& text, const std::string& source = "<string>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  return scenario_from_yaml(root, source);
}

inline Scenario load_scenario(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError(path + ": cannot open file");
  } catch (const YAML::ParserException& e) {
    throw ConfigError(path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  return scenario_from_yaml(root, path);
}

}  // namespace harpy
