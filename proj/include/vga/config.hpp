#pragma once

// YAML experiment files. Every section is optional and overrides the
// experiment it is applied to; `scenario:` picks the starting point. Errors
// carry file:line:column and the key path, and unknown keys are rejected.

#include "vga/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

namespace vga {

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

namespace detail {

struct YamlCtx {
  std::string file;
  std::string path;

  YamlCtx operator/(const std::string& key) const {
    return {file, path.empty() ? key : path + "." + key};
  }
  YamlCtx at(std::size_t i) const { return {file, path + "[" + std::to_string(i) + "]"}; }
};

[[noreturn]] inline void config_fail(const YamlCtx& c, const YAML::Node& n, const std::string& msg) {
  std::string where = c.file;
  const YAML::Mark m = n.Mark();
  if (m.line >= 0) where += ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
  throw ConfigError(where + ": " + (c.path.empty() ? "" : c.path + ": ") + msg);
}

inline void check_keys(const YAML::Node& n, const YamlCtx& c, std::initializer_list<const char*> keys) {
  if (!n.IsMap()) config_fail(c, n, "expected a mapping");
  for (const auto& kv : n) {
    const std::string k = kv.first.as<std::string>();
    bool known = false;
    for (const char* s : keys) known = known || k == s;
    if (!known) {
      std::string list;
      for (const char* s : keys) list += (list.empty() ? "" : ", ") + std::string(s);
      config_fail(c / k, kv.first, "unknown key (expected one of: " + list + ")");
    }
  }
}

inline double read_double(const YAML::Node& n, const YamlCtx& c) {
  if (!n.IsScalar()) config_fail(c, n, "expected a number");
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    config_fail(c, n, "expected a number, got '" + n.Scalar() + "'");
  }
}

inline int read_int(const YAML::Node& n, const YamlCtx& c) {
  const double v = read_double(n, c);
  if (v != std::floor(v) || std::abs(v) > 1e9) config_fail(c, n, "expected an integer");
  return static_cast<int>(v);
}

inline bool read_bool(const YAML::Node& n, const YamlCtx& c) {
  if (!n.IsScalar()) config_fail(c, n, "expected true or false");
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    config_fail(c, n, "expected true or false, got '" + n.Scalar() + "'");
  }
}

inline std::string read_string(const YAML::Node& n, const YamlCtx& c) {
  if (!n.IsScalar()) config_fail(c, n, "expected a string");
  return n.Scalar();
}

inline std::vector<double> read_list(const YAML::Node& n, const YamlCtx& c) {
  if (!n.IsSequence()) config_fail(c, n, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(read_double(n[i], c.at(i)));
  return out;
}

inline Vec read_vec(const YAML::Node& n, const YamlCtx& c, int size) {
  const std::vector<double> v = read_list(n, c);
  if (size >= 0 && static_cast<int>(v.size()) != size)
    config_fail(c, n, "expected " + std::to_string(size) + " entries, got " + std::to_string(v.size()));
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Per-axis quantity: a list of n numbers or one number for every axis.
inline Vec read_axes(const YAML::Node& n, const YamlCtx& c, int size) {
  if (n.IsScalar()) return Vec::Constant(size, read_double(n, c));
  return read_vec(n, c, size);
}

inline Vec3 read_vec3(const YAML::Node& n, const YamlCtx& c) { return read_vec(n, c, 3); }

inline std::vector<int> read_indices(const YAML::Node& n, const YamlCtx& c, int size) {
  const Vec v = read_axes(n, c, size);
  std::vector<int> out;
  for (int i = 0; i < v.size(); ++i) {
    if (v(i) != std::floor(v(i)) || v(i) < 0) config_fail(c, n, "gear indices are non-negative integers");
    out.push_back(static_cast<int>(v(i)));
  }
  return out;
}

// Wraps the library's validation so the message points at the section.
template <class F>
void at_section(const YAML::Node& n, const YamlCtx& c, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const UserError& e) {
    config_fail(c, n, e.what());
  }
}

inline Link read_link(const YAML::Node& n, const YamlCtx& c) {
  check_keys(n, c, {"name", "axis", "tip", "com", "mass", "inertia", "damping", "limits"});
  Link l;
  if (n["name"]) l.name = read_string(n["name"], c / "name");
  if (n["axis"]) l.axis = read_vec3(n["axis"], c / "axis");
  if (n["tip"]) l.tip = read_vec3(n["tip"], c / "tip");
  if (n["com"]) l.com = read_vec3(n["com"], c / "com");
  if (n["mass"]) l.mass = read_double(n["mass"], c / "mass");
  if (n["inertia"]) {
    const YAML::Node& in = n["inertia"];
    const std::vector<double> v = read_list(in, c / "inertia");
    if (v.size() == 3) {
      l.inertia = Vec3(v[0], v[1], v[2]).asDiagonal();
    } else if (v.size() == 9) {
      l.inertia = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(v.data());
    } else {
      config_fail(c / "inertia", in, "expected a diagonal [Ixx, Iyy, Izz] or 9 row-major entries");
    }
  }
  if (n["damping"]) l.damping = read_double(n["damping"], c / "damping");
  if (n["limits"]) {
    const Vec lim = read_vec(n["limits"], c / "limits", 2);
    l.lower = lim(0);
    l.upper = lim(1);
  }
  return l;
}

inline RobotModel read_robot(const YAML::Node& n, const YamlCtx& c) {
  check_keys(n, c, {"name", "gravity", "task_space", "links"});
  const std::string name = n["name"] ? read_string(n["name"], c / "name") : "robot";
  const Vec3 g = n["gravity"] ? read_vec3(n["gravity"], c / "gravity") : Vec3(0, 0, -9.81);
  TaskSpace task = TaskSpace::joint;
  if (n["task_space"]) {
    const std::string t = read_string(n["task_space"], c / "task_space");
    if (t == "joint") task = TaskSpace::joint;
    else if (t == "position") task = TaskSpace::position;
    else config_fail(c / "task_space", n["task_space"], "expected joint or position");
  }
  const YAML::Node& links = n["links"];
  if (!links || !links.IsSequence() || links.size() == 0)
    config_fail(c / "links", links ? links : n, "expected a non-empty list of links");
  std::vector<Link> out;
  for (std::size_t i = 0; i < links.size(); ++i) out.push_back(read_link(links[i], (c / "links").at(i)));
  RobotModel model;
  at_section(n, c, [&] { model = RobotModel(name, out, g, task); });
  return model;
}

inline Actuator read_actuator(const YAML::Node& n, const YamlCtx& c, Actuator a) {
  check_keys(n, c, {"rotor_inertia", "damping", "torque_limit", "speed_limit", "gears"});
  if (n["rotor_inertia"]) a.rotor_inertia = read_double(n["rotor_inertia"], c / "rotor_inertia");
  if (n["damping"]) a.damping = read_double(n["damping"], c / "damping");
  if (n["torque_limit"]) a.torque_limit = read_double(n["torque_limit"], c / "torque_limit");
  if (n["speed_limit"]) a.speed_limit = read_double(n["speed_limit"], c / "speed_limit");
  if (n["gears"]) a.gears = read_list(n["gears"], c / "gears");
  return a;
}

// A list gives one actuator per axis; a mapping applies to every axis.
inline ActuatorBank read_actuators(const YAML::Node& n, const YamlCtx& c, const ActuatorBank& base,
                                   int dof) {
  std::vector<Actuator> axes;
  if (n.IsSequence()) {
    if (static_cast<int>(n.size()) != dof)
      config_fail(c, n, "expected " + std::to_string(dof) + " actuators, got " + std::to_string(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) {
      const Actuator a0 = static_cast<int>(i) < base.size() ? base.axis(static_cast<int>(i)) : Actuator{};
      axes.push_back(read_actuator(n[i], c.at(i), a0));
    }
  } else {
    for (int i = 0; i < dof; ++i)
      axes.push_back(read_actuator(n, c, i < base.size() ? base.axis(i) : Actuator{}));
  }
  ActuatorBank bank;
  at_section(n, c, [&] { bank = ActuatorBank(axes); });
  return bank;
}

inline void read_planner(const YAML::Node& n, const YamlCtx& c, PlannerParams& p, int dof) {
  check_keys(n, c, {"goal_q", "goal_qd", "tol_q", "tol_qd", "edge_duration", "substep", "max_nodes",
                    "seed", "goal_bias", "weight_q", "weight_qd", "torque_weight", "min_gear_hold",
                    "torque_levels", "primitives_per_extension", "velocity_bound", "integrator"});
  if (n["goal_q"]) p.goal_q = read_vec(n["goal_q"], c / "goal_q", dof);
  if (n["goal_qd"]) p.goal_qd = read_vec(n["goal_qd"], c / "goal_qd", dof);
  if (n["tol_q"]) p.tol_q = read_double(n["tol_q"], c / "tol_q");
  if (n["tol_qd"]) p.tol_qd = read_double(n["tol_qd"], c / "tol_qd");
  if (n["edge_duration"]) p.edge_duration = read_double(n["edge_duration"], c / "edge_duration");
  if (n["substep"]) p.substep = read_double(n["substep"], c / "substep");
  if (n["max_nodes"]) p.max_nodes = read_int(n["max_nodes"], c / "max_nodes");
  if (n["seed"]) p.seed = static_cast<std::uint64_t>(read_int(n["seed"], c / "seed"));
  if (n["goal_bias"]) p.goal_bias = read_double(n["goal_bias"], c / "goal_bias");
  if (n["weight_q"]) p.weight_q = read_double(n["weight_q"], c / "weight_q");
  if (n["weight_qd"]) p.weight_qd = read_double(n["weight_qd"], c / "weight_qd");
  if (n["torque_weight"]) p.torque_weight = read_double(n["torque_weight"], c / "torque_weight");
  if (n["min_gear_hold"]) p.min_gear_hold = read_double(n["min_gear_hold"], c / "min_gear_hold");
  if (n["torque_levels"]) p.torque_levels = read_list(n["torque_levels"], c / "torque_levels");
  if (n["primitives_per_extension"])
    p.primitives_per_extension = read_int(n["primitives_per_extension"], c / "primitives_per_extension");
  if (n["velocity_bound"]) p.velocity_bound = read_axes(n["velocity_bound"], c / "velocity_bound", dof);
  if (n["integrator"])
    at_section(n["integrator"], c / "integrator",
               [&] { p.integrator = parse_integrator(read_string(n["integrator"], c / "integrator")); });
}

inline void read_controller(const YAML::Node& n, const YamlCtx& c, Experiment& e) {
  check_keys(n, c, {"law", "kp", "kd", "lambda", "k_margin", "reaching", "phi", "literal_reference",
                    "d_max", "hysteresis", "enforce_speed_limit", "saturate"});
  const int dof = e.model.dof();
  ControllerConfig& cc = e.controller;
  if (n["law"])
    at_section(n["law"], c / "law", [&] { set_controller(e, read_string(n["law"], c / "law")); });
  if (n["kp"]) cc.gains.kp = read_axes(n["kp"], c / "kp", dof);
  if (n["kd"]) cc.gains.kd = read_axes(n["kd"], c / "kd", dof);
  if (cc.gains.kp.size() != cc.gains.kd.size()) {
    const ControllerGains d = ControllerGains::defaults(dof);
    if (cc.gains.kp.size() == 0) cc.gains.kp = d.kp;
    if (cc.gains.kd.size() == 0) cc.gains.kd = d.kd;
  }
  if (n["lambda"]) cc.gains.lambda = read_double(n["lambda"], c / "lambda");
  if (n["k_margin"]) cc.gains.k_margin = read_double(n["k_margin"], c / "k_margin");
  if (n["reaching"]) cc.gains.reaching = read_double(n["reaching"], c / "reaching");
  if (n["phi"]) cc.gains.phi = read_double(n["phi"], c / "phi");
  if (n["literal_reference"])
    cc.gains.literal_reference = read_bool(n["literal_reference"], c / "literal_reference");
  if (n["d_max"]) cc.d_bound = read_axes(n["d_max"], c / "d_max", dof);
  if (n["enforce_speed_limit"])
    cc.gear.enforce_speed_limit = read_bool(n["enforce_speed_limit"], c / "enforce_speed_limit");
  if (n["saturate"]) cc.gear.saturate = read_bool(n["saturate"], c / "saturate");
  if (const YAML::Node& h = n["hysteresis"]) {
    const YamlCtx hc = c / "hysteresis";
    check_keys(h, hc, {"min_improvement", "dwell"});
    HysteresisPolicy base = cc.hysteresis ? *cc.hysteresis : HysteresisPolicy::defaults(e.bank);
    Vec th = base.min_improvement;
    double dwell = base.dwell;
    if (h["min_improvement"]) th = read_axes(h["min_improvement"], hc / "min_improvement", dof);
    if (h["dwell"]) dwell = read_double(h["dwell"], hc / "dwell");
    at_section(h, hc, [&] { cc.hysteresis = HysteresisPolicy(th, dwell); });
  }
}

inline void read_disturbance(const YAML::Node& n, const YamlCtx& c, DisturbanceSpec& d, int dof) {
  check_keys(n, c, {"kind", "payload_mass", "impulse_time", "impulse", "bound", "force"});
  if (n["kind"])
    at_section(n["kind"], c / "kind",
               [&] { d.kind = parse_disturbance_kind(read_string(n["kind"], c / "kind")); });
  if (n["payload_mass"]) d.payload_mass = read_double(n["payload_mass"], c / "payload_mass");
  if (n["impulse_time"]) d.impulse_time = read_double(n["impulse_time"], c / "impulse_time");
  if (n["impulse"]) d.impulse = read_axes(n["impulse"], c / "impulse", dof);
  if (n["bound"]) d.bound = read_axes(n["bound"], c / "bound", dof);
  if (n["force"]) d.force = read_axes(n["force"], c / "force", dof);
}

inline void read_sim(const YAML::Node& n, const YamlCtx& c, Experiment& e) {
  check_keys(n, c, {"duration", "hold", "dt", "control_period", "integrator", "tolerance",
                    "velocity_ceiling", "seed", "disturbance"});
  SimConfig& s = e.sim;
  if (n["duration"]) s.duration = read_double(n["duration"], c / "duration");
  if (n["hold"]) e.hold = read_double(n["hold"], c / "hold");
  if (n["dt"]) s.dt = read_double(n["dt"], c / "dt");
  if (n["control_period"]) s.control_period = read_double(n["control_period"], c / "control_period");
  if (n["integrator"])
    at_section(n["integrator"], c / "integrator",
               [&] { s.integrator = parse_integrator(read_string(n["integrator"], c / "integrator")); });
  if (n["tolerance"]) s.tolerance = read_double(n["tolerance"], c / "tolerance");
  if (n["velocity_ceiling"]) s.velocity_ceiling = read_double(n["velocity_ceiling"], c / "velocity_ceiling");
  if (n["seed"]) s.seed = static_cast<std::uint64_t>(read_int(n["seed"], c / "seed"));
  if (n["disturbance"]) read_disturbance(n["disturbance"], c / "disturbance", s.disturbance, e.model.dof());
}

}  // namespace detail

// Applies one parsed document on top of `e`. `scenario:` starts from a
// built-in experiment, `name:` labels the result (output file names use it).
inline void apply_config(const YAML::Node& root, const std::string& file, Experiment& e) {
  using namespace detail;
  const YamlCtx c{file, ""};
  if (!root || root.IsNull()) return;
  check_keys(root, c, {"scenario", "name", "robot", "actuators", "start", "planner", "target", "controller",
                       "sim", "compare"});
  if (root["scenario"]) {
    const std::string name = read_string(root["scenario"], c / "scenario");
    at_section(root["scenario"], c / "scenario", [&] { e = make_scenario(name); });
  }
  if (root["robot"]) {
    e.model = read_robot(root["robot"], c / "robot");
    e.scenario = "custom";
  }
  const int dof = e.model.dof();
  if (dof == 0) config_fail(c, root, "no robot defined (add a 'robot' section or a 'scenario')");
  if (root["actuators"]) e.bank = read_actuators(root["actuators"], c / "actuators", e.bank, dof);
  if (e.bank.size() != dof)
    config_fail(c, root, "actuators do not match the robot (" + std::to_string(e.bank.size()) +
                             " for " + std::to_string(dof) + " joints)");
  if (e.start.q.size() != dof) e.start = State{Vec::Zero(dof), Vec::Zero(dof), std::vector<int>(dof, 0), 0};
  if (const YAML::Node& s = root["start"]) {
    const YamlCtx sc = c / "start";
    check_keys(s, sc, {"q", "qd", "gears"});
    if (s["q"]) e.start.q = read_vec(s["q"], sc / "q", dof);
    if (s["qd"]) e.start.qd = read_vec(s["qd"], sc / "qd", dof);
    if (s["gears"]) e.start.gears = read_indices(s["gears"], sc / "gears", dof);
  }
  if (root["planner"]) {
    PlannerParams p = e.planner ? *e.planner : PlannerParams{};
    if (p.goal_q.size() != dof) p.goal_q = Vec::Zero(dof);
    read_planner(root["planner"], c / "planner", p, dof);
    e.planner = p;
    e.target.reset();
  }
  if (root["target"]) {
    e.target = read_vec(root["target"], c / "target", dof);
    e.planner.reset();
  }
  if (root["controller"]) read_controller(root["controller"], c / "controller", e);
  if (root["sim"]) read_sim(root["sim"], c / "sim", e);
  if (const YAML::Node& cm = root["compare"]) {
    const YamlCtx cc = c / "compare";
    check_keys(cm, cc, {"enforce_speed_limit", "enforce_torque_limit"});
    if (cm["enforce_speed_limit"])
      e.compare.enforce_speed_limit = read_bool(cm["enforce_speed_limit"], cc / "enforce_speed_limit");
    if (cm["enforce_torque_limit"])
      e.compare.enforce_torque_limit = read_bool(cm["enforce_torque_limit"], cc / "enforce_torque_limit");
  }
  if (root["name"]) e.scenario = read_string(root["name"], c / "name");
  at_section(root, c, [&] { e.validate(); });
}

inline YAML::Node parse_yaml_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw UserError("config file not found: " + path);
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError(path + ":" + std::to_string(ex.mark.line + 1) + ":" +
                      std::to_string(ex.mark.column + 1) + ": " + ex.msg);
  } catch (const YAML::BadFile&) {
    throw UserError("cannot read config file: " + path);
  }
}

inline void apply_config_file(const std::string& path, Experiment& e) {
  apply_config(parse_yaml_file(path), path, e);
}

inline Experiment load_experiment(const std::vector<std::string>& paths, Experiment base = {}) {
  for (const auto& p : paths) apply_config_file(p, base);
  return base;
}

}  // namespace vga
