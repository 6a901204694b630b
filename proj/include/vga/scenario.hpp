#pragma once

// Named experiments: robot, actuators, start state, reference source,
// controller and simulation settings. Config files can override any part.

#include "vga/planner.hpp"
#include "vga/robots.hpp"
#include "vga/sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vga {

struct Experiment {
  std::string scenario = "custom";
  RobotModel model;
  ActuatorBank bank;
  State start;
  std::optional<PlannerParams> planner;  // plan a reference from start
  std::optional<Vec> target;             // or hold a fixed set-point
  ControllerConfig controller;
  SimConfig sim;
  double hold = 2.0;      // s tracked past the end of a planned reference
  CompareOptions compare;

  void validate() const {
    const int n = model.dof();
    if (n == 0) throw UserError("experiment has no robot");
    if (bank.size() != n) throw UserError("actuator count does not match the robot");
    if (start.q.size() != n || start.qd.size() != n)
      throw UserError("start state does not match the robot");
    if (!bank.valid_indices(start.gears)) throw UserError("start gears are invalid for the actuators");
    if (planner.has_value() == target.has_value())
      throw UserError("an experiment needs exactly one of 'planner' or 'target'");
    if (planner) planner->validate(model);
    if (target && target->size() != n) throw UserError("target has the wrong dimension");
    if (controller.gains.kp.size() != 0) controller.gains.validate(n);
    if (controller.hysteresis && controller.hysteresis->min_improvement.size() != n)
      throw UserError("hysteresis thresholds need one entry per axis");
    if (controller.d_bound.size() != 0 && controller.d_bound.size() != n)
      throw UserError("d_max needs one entry per axis");
    if (!(hold >= 0)) throw UserError("hold time must be non-negative");
    sim.validate();
  }
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"pendulum-swingup", "arm3-reach",
                                              "disturbance-rejection"};
  return names;
}

inline Experiment pendulum_swingup() {
  Experiment e;
  e.scenario = "pendulum-swingup";
  e.model = robots::pendulum();
  e.bank = robots::pendulum_actuators();
  e.start = State{Vec::Constant(1, -kPi), Vec::Zero(1), {0}, 0.0};
  PlannerParams p;
  p.goal_q = Vec::Zero(1);
  p.max_nodes = 10000;
  e.planner = p;
  return e;
}

inline Experiment arm3_reach() {
  Experiment e;
  e.scenario = "arm3-reach";
  e.model = robots::arm3();
  e.bank = robots::arm3_actuators();
  e.start = State{Vec3(0.0, 0.5, 0.3), Vec::Zero(3), {0, 0, 0}, 0.0};
  PlannerParams p;
  p.goal_q = Vec3(2.5, 2.4, 0.5);
  p.tol_q = 0.3;
  p.tol_qd = 1.5;
  p.max_nodes = 8000;
  p.goal_bias = 0.2;
  p.weight_qd = 0.3;
  p.primitives_per_extension = 40;
  p.velocity_bound = Vec::Constant(3, 3.0);
  e.planner = p;
  return e;
}

// Fixed set-point near upright with an unknown end-effector payload.
inline Experiment disturbance_rejection() {
  Experiment e;
  e.scenario = "disturbance-rejection";
  e.model = robots::pendulum();
  e.bank = robots::pendulum_actuators();
  e.start = State{Vec::Constant(1, 0.3), Vec::Zero(1), {1}, 0.0};
  e.target = Vec::Constant(1, 0.1);
  e.controller.law = ControlLaw::sliding;
  e.controller.d_bound = Vec::Constant(1, 1.0);
  e.sim.duration = 5.0;
  e.sim.disturbance.kind = DisturbanceKind::payload;
  e.sim.disturbance.payload_mass = 0.4;
  e.hold = 0.0;
  return e;
}

inline Experiment make_scenario(const std::string& name) {
  if (name == "pendulum-swingup") return pendulum_swingup();
  if (name == "arm3-reach") return arm3_reach();
  if (name == "disturbance-rejection") return disturbance_rejection();
  std::string known;
  for (const auto& s : scenario_names()) known += (known.empty() ? "" : ", ") + s;
  throw UserError("unknown scenario '" + name + "' (known: " + known + ", or custom with --config)");
}

// ct: computed torque on held gears; rstar: computed torque with R* gear
// selection; sliding: sliding mode with R* gear selection.
inline void set_controller(Experiment& e, const std::string& name) {
  e.controller.law = parse_control_law(name);
  e.controller.gear.active = name != "ct" && name != "computed-torque";
}

inline std::string controller_name(const Experiment& e) {
  if (e.controller.law == ControlLaw::sliding) return "sliding";
  return e.controller.gear.active ? "rstar" : "ct";
}

// Command-line style adjustments on top of a scenario or config.
struct Overrides {
  std::optional<std::uint64_t> seed;  // planner and simulation
  std::optional<std::string> controller;
  std::optional<double> d_max;        // every axis
  std::optional<double> payload;      // kg, unknown to the controller
  std::optional<std::vector<double>> gears;  // ratio set for every axis
  std::optional<double> dwell;        // s
  std::optional<double> min_improvement;  // N m, every axis
  std::optional<double> impulse_time;
  std::optional<std::vector<double>> impulse;  // N m s per axis
};

inline void apply_overrides(Experiment& e, const Overrides& o) {
  const int n = e.model.dof();
  if (o.seed) {
    e.sim.seed = *o.seed;
    if (e.planner) e.planner->seed = *o.seed;
  }
  if (o.controller) set_controller(e, *o.controller);
  if (o.d_max) {
    if (*o.d_max < 0) throw UserError("d_max must be non-negative");
    e.controller.d_bound = Vec::Constant(n, *o.d_max);
  }
  if (o.payload) {
    if (*o.payload < 0) throw UserError("payload must be non-negative");
    e.sim.disturbance.kind = DisturbanceKind::payload;
    e.sim.disturbance.payload_mass = *o.payload;
  }
  if (o.gears) {
    std::vector<Actuator> axes = e.bank.axes();
    for (auto& a : axes) a.gears = *o.gears;
    e.bank = ActuatorBank(std::move(axes));
    // Start gears keep their index where it still exists.
    for (int& g : e.start.gears) g = std::min(g, static_cast<int>(o.gears->size()) - 1);
  }
  if (o.dwell || o.min_improvement) {
    HysteresisPolicy h = e.controller.hysteresis ? *e.controller.hysteresis : HysteresisPolicy::defaults(e.bank);
    h = HysteresisPolicy(o.min_improvement ? Vec::Constant(n, *o.min_improvement) : h.min_improvement,
                         o.dwell ? *o.dwell : h.dwell);
    e.controller.hysteresis = h;
  }
  if (o.impulse_time || o.impulse) {
    if (!o.impulse || !o.impulse_time) throw UserError("an impulse needs both a time and a value");
    if (static_cast<int>(o.impulse->size()) != n) throw UserError("impulse needs one entry per axis");
    e.sim.disturbance.kind = DisturbanceKind::impulse;
    e.sim.disturbance.impulse_time = *o.impulse_time;
    e.sim.disturbance.impulse = Eigen::Map<const Vec>(o.impulse->data(), n);
  }
  e.validate();
}

inline Trajectory make_reference(const Experiment& e, PlanStats* stats = nullptr) {
  if (e.target) return set_point(*e.target);
  return plan_low_torque(e.model, e.bank, e.start, *e.planner, stats);
}

inline SimConfig track_config(const Experiment& e, const Trajectory& ref) {
  SimConfig c = e.sim;
  if (!e.target) c.duration = ref.duration() + e.hold;
  return c;
}

inline SimLog run_track(const Experiment& e, const Trajectory& ref) {
  Controller ctl(e.model, e.bank, e.controller);
  const State start = e.target ? e.start : trajectory_start(ref, e.bank);
  State s = start;
  if (!e.controller.gear.active) s.gears = e.start.gears;
  return run_closed_loop(e.model, e.bank, ctl, ReferenceSampler(ref), s, track_config(e, ref));
}

// Metrics cover the planned reference's own time span.
inline std::vector<CompareRow> run_compare(const Experiment& e, const Trajectory& ref) {
  SimConfig c = e.sim;
  if (!e.target) c.duration = ref.duration();
  CompareOptions opt = e.compare;
  if (opt.gains.kp.size() == 0) opt.gains = e.controller.gains;
  if (!opt.hysteresis) opt.hysteresis = e.controller.hysteresis;
  return compare_fixed_vs_active(e.model, e.bank, ref, c, opt);
}

}  // namespace vga
