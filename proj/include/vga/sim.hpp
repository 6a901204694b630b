#pragma once

// Fixed-step closed-loop simulation. Physics advances at `dt` with the motor
// torque held between controller instants; gear changes happen only at
// controller instants and leave q, qd continuous.

#include "vga/control.hpp"
#include "vga/integrator.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace vga {

enum class DisturbanceKind { none, payload, impulse, random, constant };

inline DisturbanceKind parse_disturbance_kind(const std::string& s) {
  if (s == "none") return DisturbanceKind::none;
  if (s == "payload") return DisturbanceKind::payload;
  if (s == "impulse") return DisturbanceKind::impulse;
  if (s == "random") return DisturbanceKind::random;
  if (s == "constant") return DisturbanceKind::constant;
  throw UserError("unknown disturbance '" + s +
                  "' (expected none, payload, impulse, random or constant)");
}

inline const char* to_string(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::none: return "none";
    case DisturbanceKind::payload: return "payload";
    case DisturbanceKind::impulse: return "impulse";
    case DisturbanceKind::random: return "random";
    case DisturbanceKind::constant: return "constant";
  }
  return "none";
}

struct DisturbanceSpec {
  DisturbanceKind kind = DisturbanceKind::none;
  double payload_mass = 0.0;  // kg at the end effector, unknown to the controller
  double impulse_time = 0.0;  // s
  Vec impulse;                // generalized momentum, N m s
  Vec bound;                  // random: |d_i| <= bound_i, resampled every control period
  Vec force;                  // constant load-side force, N m
};

struct SimConfig {
  double duration = 5.0;
  double dt = 1e-3;
  double control_period = 2e-3;
  Integrator integrator = Integrator::rk4;
  DisturbanceSpec disturbance;
  double velocity_ceiling = 100.0;  // rad/s, divergence guard on |qd|_inf
  double tolerance = 0.05;          // rad, final tracking error for "tracked"
  std::uint64_t seed = 1;

  int steps_per_control() const {
    const double ratio = control_period / dt;
    const long r = std::lround(ratio);
    if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio)
      throw UserError("control period must be an integer multiple of the physics step");
    return static_cast<int>(r);
  }

  void validate() const {
    if (!(dt > 0) || !(duration >= 0) || !(control_period > 0))
      throw UserError("simulation times must be positive");
    steps_per_control();
    if (!(velocity_ceiling > 0)) throw UserError("velocity ceiling must be positive");
    if (!(tolerance > 0)) throw UserError("tracking tolerance must be positive");
    if (disturbance.payload_mass < 0) throw UserError("payload mass must be non-negative");
    if ((disturbance.bound.array() < 0).any()) throw UserError("random bound must be non-negative");
  }
};

struct SimRow {
  double t = 0.0;
  Vec q, qd;
  Vec q_ref, qd_ref;
  Vec tau;  // motor torque held over [t, t + dt)
  std::vector<int> gears;
  Vec d;    // load-side disturbance force (zero for payload runs)
  Vec tau_extrinsic, tau_intrinsic;  // controller's model at qdd_r
  double energy = 0.0;               // plant, engaged gears
};

struct GearEvent {
  double t = 0.0;
  int axis = 0;
  int from = 0;
  int to = 0;
  double rotor_energy_jump = 0.0;  // J, 1/2 I_i qd_i^2 (R_to^2 - R_from^2)
  bool forced = false;
};

struct SimMetrics {
  double max_abs_torque = 0.0;   // N m, motor side
  double torque_sq_integral = 0.0;  // trapezoidal over the log
  double final_error = 0.0;      // rad, |q_ref - q|_inf at the end
  double max_error = 0.0;
  int shift_count = 0;
  double saturated_fraction = 0.0;  // of controller instants
  bool aborted = false;
  double abort_time = 0.0;
  std::string abort_reason;
  bool tracked = false;
};

struct SimLog {
  std::string robot;
  int dof = 0;
  std::vector<SimRow> rows;
  std::vector<GearEvent> events;
  SimMetrics metrics;
};

using ControlFn = std::function<ControlCommand(const State&, const ReferenceSample&)>;

// Joint error with angle wrapping on continuous joints.
inline Vec tracking_error(const RobotModel& model, const Vec& q_ref, const Vec& q) {
  Vec e = q_ref - q;
  for (int i = 0; i < model.dof(); ++i)
    if (model.link(i).continuous()) e(i) = wrap_angle(e(i));
  return e;
}

inline void compute_metrics(const RobotModel& model, SimLog& log, double tolerance,
                            int controller_instants, int saturated_instants) {
  SimMetrics& m = log.metrics;
  m.max_abs_torque = 0;
  m.torque_sq_integral = 0;
  m.max_error = 0;
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    const SimRow& r = log.rows[k];
    m.max_abs_torque = std::max(m.max_abs_torque, r.tau.cwiseAbs().maxCoeff());
    m.max_error = std::max(m.max_error, tracking_error(model, r.q_ref, r.q).cwiseAbs().maxCoeff());
    if (k > 0) {
      const SimRow& p = log.rows[k - 1];
      m.torque_sq_integral += 0.5 * (p.tau.squaredNorm() + r.tau.squaredNorm()) * (r.t - p.t);
    }
  }
  if (!log.rows.empty()) {
    const SimRow& last = log.rows.back();
    m.final_error = tracking_error(model, last.q_ref, last.q).cwiseAbs().maxCoeff();
  }
  m.shift_count = static_cast<int>(log.events.size());
  m.saturated_fraction =
      controller_instants > 0 ? static_cast<double>(saturated_instants) / controller_instants : 0.0;
  m.tracked = !m.aborted && m.final_error <= tolerance;
}

/// Closed-loop run. `model` is the controller's nominal model; a payload
/// disturbance changes only the plant.
inline SimLog run_closed_loop(const RobotModel& model, const ActuatorBank& bank,
                              const ControlFn& controller, const ReferenceSampler& reference,
                              const State& start, const SimConfig& cfg) {
  cfg.validate();
  const int n = model.dof();
  if (start.q.size() != n || start.qd.size() != n || !bank.valid_indices(start.gears))
    throw UserError("start state does not match the robot");
  const DisturbanceSpec& dist = cfg.disturbance;
  const RobotModel plant =
      dist.kind == DisturbanceKind::payload ? model.with_payload(dist.payload_mass) : model;
  if (dist.kind == DisturbanceKind::impulse && dist.impulse.size() != n)
    throw UserError("impulse must have one entry per axis");
  if (dist.kind == DisturbanceKind::random && dist.bound.size() != n)
    throw UserError("random disturbance bound must have one entry per axis");
  if (dist.kind == DisturbanceKind::constant && dist.force.size() != n)
    throw UserError("constant disturbance must have one entry per axis");

  std::mt19937_64 rng(cfg.seed);
  Vec d = Vec::Zero(n);
  if (dist.kind == DisturbanceKind::constant) d = dist.force;

  SimLog log;
  log.robot = model.name();
  log.dof = n;
  const long steps = std::lround(cfg.duration / cfg.dt);
  const int spc = cfg.steps_per_control();
  log.rows.reserve(static_cast<std::size_t>(steps + 1));

  State st = start;
  st.t = 0.0;
  ControlCommand cmd;
  ReferenceSample ref;
  bool impulse_done = dist.kind != DisturbanceKind::impulse;
  int instants = 0, saturated = 0;

  auto abort_run = [&](double t, std::string why) {
    log.metrics.aborted = true;
    log.metrics.abort_time = t;
    log.metrics.abort_reason = std::move(why);
  };

  for (long k = 0; k <= steps; ++k) {
    st.t = static_cast<double>(k) * cfg.dt;
    if (!impulse_done && st.t + 0.5 * cfg.dt > dist.impulse_time) {
      const Mat m = effective_inertia(plant, bank, GearRatios::select(bank, st.gears), st.q);
      st.qd += m.llt().solve(dist.impulse);
      impulse_done = true;
    }
    if (k % spc == 0) {
      ref = reference(st.t);
      try {
        cmd = controller(st, ref);
      } catch (const NumericalError& e) {
        abort_run(st.t, e.what());
        break;
      }
      ++instants;
      saturated += cmd.saturated;
      for (int i = 0; i < n; ++i) {
        if (cmd.gears[i] == st.gears[i]) continue;
        const double r0 = bank.axis(i).gears[st.gears[i]];
        const double r1 = bank.axis(i).gears[cmd.gears[i]];
        log.events.push_back({st.t, i, st.gears[i], cmd.gears[i],
                              0.5 * bank.axis(i).rotor_inertia * st.qd(i) * st.qd(i) *
                                  (r1 * r1 - r0 * r0),
                              cmd.forced_shift});
      }
      st.gears = cmd.gears;
      if (dist.kind == DisturbanceKind::random) {
        for (int i = 0; i < n; ++i)
          d(i) = std::uniform_real_distribution<double>(-dist.bound(i), dist.bound(i))(rng);
      }
    }
    const GearRatios r = GearRatios::select(bank, st.gears);
    SimRow row;
    row.t = st.t;
    row.q = st.q;
    row.qd = st.qd;
    row.q_ref = ref.q;
    row.qd_ref = ref.qd;
    row.tau = cmd.tau;
    row.gears = st.gears;
    row.d = d;
    row.tau_extrinsic = cmd.tau_extrinsic;
    row.tau_intrinsic = cmd.tau_intrinsic;
    row.energy = total_energy(plant, bank, r, st.q, st.qd);
    log.rows.push_back(std::move(row));
    if (k == steps) break;

    const Vec tau = cmd.tau;
    auto accel = [&](double, const Vec& q, const Vec& qd) {
      return forward_dynamics(plant, bank, r, tau, qd, q, d);
    };
    try {
      integrate_step(cfg.integrator, accel, st.t, cfg.dt, st.q, st.qd);
    } catch (const NumericalError& e) {
      abort_run(st.t + cfg.dt, e.what());
      break;
    }
    if (!st.q.allFinite() || !st.qd.allFinite() ||
        st.qd.cwiseAbs().maxCoeff() > cfg.velocity_ceiling) {
      abort_run(st.t + cfg.dt, "joint speed exceeded the divergence ceiling");
      break;
    }
  }
  compute_metrics(model, log, cfg.tolerance, instants, saturated);
  return log;
}

inline SimLog run_closed_loop(const RobotModel& model, const ActuatorBank& bank,
                              Controller& controller, const ReferenceSampler& reference,
                              const State& start, const SimConfig& cfg) {
  controller.reset();
  return run_closed_loop(
      model, bank, [&](const State& s, const ReferenceSample& r) { return controller.step(s, r); },
      reference, start, cfg);
}

// Start state taken from the first trajectory sample.
inline State trajectory_start(const Trajectory& traj, const ActuatorBank& bank) {
  traj.validate();
  const auto& s = traj.samples.front();
  State st{s.q, s.qd, s.gears, 0.0};
  if (!bank.valid_indices(st.gears)) st.gears.assign(static_cast<std::size_t>(bank.size()), 0);
  return st;
}

// ---------------------------------------------------------------------------
// Fixed-gear versus active-gear comparison

struct CompareOptions {
  bool enforce_speed_limit = false;
  bool enforce_torque_limit = false;  // report required torque, not saturated torque
  ControllerGains gains;              // empty = defaults
  std::optional<HysteresisPolicy> hysteresis;
};

struct CompareRow {
  std::string mode;        // "fixed-<ratio>" or "active"
  std::vector<int> gears;  // held gears for fixed modes
  SimMetrics metrics;
};

inline ActuatorBank without_torque_limit(const ActuatorBank& bank) {
  std::vector<Actuator> axes = bank.axes();
  for (auto& a : axes) a.torque_limit = kInf;
  return ActuatorBank(std::move(axes));
}

inline std::string ratio_label(double r) {
  std::ostringstream s;
  s << r;
  return s.str();
}

inline std::vector<CompareRow> compare_fixed_vs_active(const RobotModel& model,
                                                       const ActuatorBank& bank,
                                                       const Trajectory& traj,
                                                       const SimConfig& cfg,
                                                       const CompareOptions& opt = {}) {
  const ReferenceSampler ref(traj);
  int modes = 0;
  for (int i = 0; i < bank.size(); ++i) modes = std::max(modes, bank.gear_count(i));

  ControllerConfig base;
  base.law = ControlLaw::computed_torque;
  base.gains = opt.gains;
  base.hysteresis = opt.hysteresis ? opt.hysteresis : HysteresisPolicy::defaults(bank);
  base.gear.enforce_speed_limit = opt.enforce_speed_limit;
  base.gear.saturate = opt.enforce_torque_limit;

  std::vector<CompareRow> rows;
  for (int g = 0; g < modes; ++g) {
    CompareRow row;
    for (int i = 0; i < bank.size(); ++i) row.gears.push_back(std::min(g, bank.gear_count(i) - 1));
    row.mode = "fixed-" + ratio_label(bank.axis(0).gears[row.gears[0]]);
    ControllerConfig c = base;
    c.gear.active = false;
    Controller ctl(model, bank, c);
    State start = trajectory_start(traj, bank);
    start.gears = row.gears;
    row.metrics = run_closed_loop(model, bank, ctl, ref, start, cfg).metrics;
    rows.push_back(std::move(row));
  }
  CompareRow active;
  active.mode = "active";
  Controller ctl(model, bank, base);
  active.metrics = run_closed_loop(model, bank, ctl, ref, trajectory_start(traj, bank), cfg).metrics;
  rows.push_back(std::move(active));
  return rows;
}

}  // namespace vga
