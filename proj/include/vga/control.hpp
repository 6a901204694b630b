#pragma once

// R* computed-torque and sliding-mode tracking controllers.
//
// Tracking errors are taken as e = q_d - q, so the sliding variable
// s = de/dt + lambda e is positive when the joint lags the reference and the
// robust term + R^-1 G sat(s / phi) pushes it forward.

#include "vga/gearopt.hpp"
#include "vga/trajectory.hpp"

#include <optional>
#include <string>

namespace vga {

struct ReferenceSample {
  double t = 0.0;
  Vec q;
  Vec qd;
  Vec qdd;
};

struct ControllerGains {
  Vec kp;                  // computed torque, 1/s^2
  Vec kd;                  // computed torque, 1/s
  double lambda = 5.0;     // sliding slope, 1/s
  double k_margin = 1.2;   // factor on the disturbance-induced bound
  double reaching = 0.2;   // added to k_i, rad/s^2
  double phi = 0.1;        // boundary layer, rad/s; 0 = sgn, inf = no robust term
  bool literal_reference = false;  // qdd_r = qdd_d + de/dt instead of + lambda de/dt

  static ControllerGains defaults(int n) {
    ControllerGains g;
    g.kp = Vec::Constant(n, 50.0);
    g.kd = Vec::Constant(n, 15.0);
    return g;
  }

  void validate(int n) const {
    if (kp.size() != n || kd.size() != n) throw UserError("controller gains have the wrong size");
    if ((kp.array() <= 0).any() || (kd.array() <= 0).any())
      throw UserError("Kp and Kd must be strictly positive");
    if (!(lambda > 0) || !(k_margin > 0) || !(reaching >= 0))
      throw UserError("sliding gains must be strictly positive");
    if (!(phi >= 0)) throw UserError("boundary layer width must be non-negative");
  }
};

struct ControlCommand {
  Vec tau;                  // saturated motor torque
  Vec tau_unsaturated;
  std::vector<int> gears;   // engaged for this control period
  std::vector<int> proposed;  // raw R* proposal before hysteresis
  Vec qdd_r;
  Vec tau_extrinsic;        // at qdd_r
  Vec tau_intrinsic;        // at qdd_r
  Vec sliding;              // s, empty for computed torque
  Vec robust_gain;          // k_i, empty for computed torque
  std::vector<std::vector<double>> candidate_torque;  // [axis][gear] objective torque
  bool saturated = false;
  bool forced_shift = false;  // dwell overridden: engaged gear over the speed limit, or the
                              // shift at least halves the excess over the torque limit
};

inline Vec saturate(const Vec& tau, const Vec& limit, bool* hit = nullptr) {
  Vec out = tau;
  bool any = false;
  for (int i = 0; i < tau.size(); ++i) {
    if (out(i) > limit(i)) out(i) = limit(i), any = true;
    if (out(i) < -limit(i)) out(i) = -limit(i), any = true;
  }
  if (hit) *hit = any;
  return out;
}

inline double boundary_sat(double s, double phi) {
  if (std::isinf(phi)) return 0.0;
  if (phi == 0.0) return signum(s);
  return std::clamp(s / phi, -1.0, 1.0);
}

namespace detail {

// Gear choice shared by both laws: R* proposal, then hysteresis. The filter
// is overridden on an axis whose engaged gear would exceed its rotor speed
// limit or need more than the torque limit while the proposal needs less.
inline void choose_gears(const RobotModel& model, const ActuatorBank& bank, const State& state,
                         const GearQuery& query, const GearObjectiveWeights& weights,
                         HysteresisPolicy& policy, ControlCommand& cmd) {
  const int n = model.dof();
  const GearSelection sel = select_gears(model, bank, query, weights);
  const Vec tau_current = objective_torque(model, bank, query, weights, state.gears);
  cmd.proposed = sel.gears;
  cmd.gears = hysteresis_filter(sel.gears, state.gears, sel.torque, tau_current, policy, state.t);
  for (int i = 0; i < n; ++i) {
    if (cmd.gears[i] == sel.gears[i]) continue;
    const double r = bank.axis(i).gears[cmd.gears[i]];
    const bool overspeed =
        query.enforce_speed_limit && !detail::speed_feasible(bank, i, r, state.qd(i));
    const double limit = bank.axis(i).torque_limit;
    const double excess_now = std::abs(tau_current(i)) - limit;
    const double excess_new = std::max(0.0, std::abs(sel.torque(i)) - limit);
    const bool overload = excess_now > 0 && excess_new <= 0.5 * excess_now &&
                          std::abs(tau_current(i)) - std::abs(sel.torque(i)) > policy.min_improvement(i);
    if (overspeed || overload) {
      cmd.gears[i] = sel.gears[i];
      policy.last_shift[i] = state.t;
      cmd.forced_shift = true;
    }
  }
  cmd.candidate_torque.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (double r : bank.axis(i).gears)
      cmd.candidate_torque[i].push_back(cmd.tau_extrinsic(i) / r + r * cmd.tau_intrinsic(i));
  }
}

inline void check_inputs(const RobotModel& model, const ActuatorBank& bank, const State& state,
                         const ReferenceSample& ref) {
  const int n = model.dof();
  if (bank.size() != n) throw UserError("actuator bank does not match the robot");
  if (state.q.size() != n || state.qd.size() != n || ref.q.size() != n || ref.qd.size() != n ||
      ref.qdd.size() != n)
    throw UserError("controller input dimensions do not match the robot");
  if (!bank.valid_indices(state.gears)) throw UserError("engaged gear indices are invalid");
  if (!state.q.allFinite() || !state.qd.allFinite())
    throw NumericalError("controller received a non-finite state");
  if (!ref.q.allFinite() || !ref.qd.allFinite() || !ref.qdd.allFinite())
    throw UserError("controller received a non-finite reference");
}

}  // namespace detail

struct GearControl {
  bool active = true;  // false: hold state.gears
  bool enforce_speed_limit = true;
  bool saturate = true;  // false: report the required torque unclipped
  GearObjectiveWeights weights;
};

/// R* computed torque: qdd_r = qdd_d + Kd (qd_d - qd) + Kp (q_d - q).
inline ControlCommand computed_torque_step(const RobotModel& model, const ActuatorBank& bank,
                                           const State& state, const ReferenceSample& ref,
                                           const ControllerGains& gains, HysteresisPolicy& policy,
                                           const GearControl& gear = {}) {
  detail::check_inputs(model, bank, state, ref);
  const int n = model.dof();
  gains.validate(n);
  ControlCommand cmd;
  cmd.qdd_r = ref.qdd + gains.kd.cwiseProduct(ref.qd - state.qd) +
              gains.kp.cwiseProduct(ref.q - state.q);
  cmd.tau_extrinsic = extrinsic_torque(model, cmd.qdd_r, state.qd, state.q);
  cmd.tau_intrinsic = intrinsic_torque(bank, cmd.qdd_r, state.qd);
  cmd.gears = state.gears;
  cmd.proposed = state.gears;
  if (gear.active) {
    GearQuery query{state.q, state.qd, cmd.qdd_r, state.gears, std::nullopt,
                    gear.enforce_speed_limit};
    GearObjectiveWeights w = gear.weights;
    w.disturbance_bound = Vec();
    detail::choose_gears(model, bank, state, query, w, policy, cmd);
  }
  const GearRatios r = GearRatios::select(bank, cmd.gears);
  cmd.tau_unsaturated.resize(n);
  for (int i = 0; i < n; ++i)
    cmd.tau_unsaturated(i) = cmd.tau_extrinsic(i) / r(i) + r(i) * cmd.tau_intrinsic(i);
  cmd.tau = gear.saturate ? saturate(cmd.tau_unsaturated, bank.torque_limit(), &cmd.saturated)
                         : cmd.tau_unsaturated;
  return cmd;
}

/// Sliding mode: tau = R^-1 tau_E(qdd_r) + R tau_I(qdd_r) + R^-1 G sat(s / phi),
/// G = [H + R^T I R] diag(k), k_i = margin * max_|d|<=bound |([H + R^T I R]^-1 d)_i| + reaching.
inline ControlCommand sliding_mode_step(const RobotModel& model, const ActuatorBank& bank,
                                        const State& state, const ReferenceSample& ref,
                                        const ControllerGains& gains, const Vec& d_bound,
                                        HysteresisPolicy& policy, const GearControl& gear = {}) {
  detail::check_inputs(model, bank, state, ref);
  const int n = model.dof();
  gains.validate(n);
  if (d_bound.size() != n || (d_bound.array() < 0).any() || !d_bound.allFinite())
    throw UserError("disturbance bound must be finite, non-negative and one per axis");
  ControlCommand cmd;
  const Vec e = ref.q - state.q;
  const Vec ed = ref.qd - state.qd;
  cmd.sliding = ed + gains.lambda * e;
  cmd.qdd_r = ref.qdd + (gains.literal_reference ? 1.0 : gains.lambda) * ed;
  cmd.tau_extrinsic = extrinsic_torque(model, cmd.qdd_r, state.qd, state.q);
  cmd.tau_intrinsic = intrinsic_torque(bank, cmd.qdd_r, state.qd);
  cmd.gears = state.gears;
  cmd.proposed = state.gears;
  if (gear.active) {
    GearQuery query{state.q, state.qd, cmd.qdd_r, state.gears, cmd.sliding,
                    gear.enforce_speed_limit};
    GearObjectiveWeights w = gear.weights;
    w.disturbance_bound = d_bound;
    detail::choose_gears(model, bank, state, query, w, policy, cmd);
  }
  const GearRatios r = GearRatios::select(bank, cmd.gears);
  const Mat m = effective_inertia(mass_matrix(model, state.q), bank, r);
  const Mat minv = m.inverse();
  cmd.robust_gain.resize(n);
  for (int i = 0; i < n; ++i)
    cmd.robust_gain(i) = gains.k_margin * minv.row(i).cwiseAbs().dot(d_bound) + gains.reaching;
  Vec robust(n);
  for (int i = 0; i < n; ++i) robust(i) = boundary_sat(cmd.sliding(i), gains.phi);
  const Vec g_term = m * cmd.robust_gain.cwiseProduct(robust);
  cmd.tau_unsaturated.resize(n);
  for (int i = 0; i < n; ++i)
    cmd.tau_unsaturated(i) = cmd.tau_extrinsic(i) / r(i) + r(i) * cmd.tau_intrinsic(i) +
                             g_term(i) / r(i);
  cmd.tau = gear.saturate ? saturate(cmd.tau_unsaturated, bank.torque_limit(), &cmd.saturated)
                         : cmd.tau_unsaturated;
  return cmd;
}

// ---------------------------------------------------------------------------
// Reference playback

class ReferenceSampler {
 public:
  explicit ReferenceSampler(Trajectory traj) : traj_(std::move(traj)) { traj_.validate(); }

  const Trajectory& trajectory() const { return traj_; }

  // Linear q_d and qd_d, zero-order-hold qdd_d. Before the first sample the
  // first sample is returned; after the last, its position is held at rest.
  ReferenceSample operator()(double t) const {
    const auto& s = traj_.samples;
    ReferenceSample out;
    out.t = t;
    if (t <= s.front().t) {
      out.q = s.front().q;
      out.qd = s.front().qd;
      out.qdd = s.front().qdd;
      return out;
    }
    if (t > s.back().t + kTimeEpsilon || s.size() == 1) {
      out.q = s.back().q;
      out.qd = Vec::Zero(out.q.size());
      out.qdd = Vec::Zero(out.q.size());
      return out;
    }
    if (t >= s.back().t - kTimeEpsilon) {
      out.q = s.back().q;
      out.qd = s.back().qd;
      out.qdd = s.back().qdd;
      return out;
    }
    const auto it = std::upper_bound(s.begin(), s.end(), t,
                                     [](double v, const TrajectorySample& x) { return v < x.t; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double u = (t - a.t) / (b.t - a.t);
    out.q = a.q + u * (b.q - a.q);
    out.qd = a.qd + u * (b.qd - a.qd);
    out.qdd = a.qdd;
    return out;
  }

 private:
  Trajectory traj_;
};

inline Trajectory set_point(const Vec& q) {
  Trajectory t;
  TrajectorySample s;
  s.q = q;
  s.qd = Vec::Zero(q.size());
  s.qdd = Vec::Zero(q.size());
  t.samples.push_back(s);
  return t;
}

// ---------------------------------------------------------------------------
// Stateful wrapper owning the hysteresis policy of one control loop.

enum class ControlLaw { computed_torque, sliding };

inline ControlLaw parse_control_law(const std::string& s) {
  if (s == "ct" || s == "computed-torque" || s == "rstar") return ControlLaw::computed_torque;
  if (s == "sliding") return ControlLaw::sliding;
  throw UserError("unknown controller '" + s + "' (expected ct, rstar or sliding)");
}

struct ControllerConfig {
  ControlLaw law = ControlLaw::computed_torque;
  ControllerGains gains;
  GearControl gear;
  std::optional<HysteresisPolicy> hysteresis;  // defaults from the bank when empty
  Vec d_bound;                                 // sliding only; empty = zero
};

class Controller {
 public:
  Controller(RobotModel model, ActuatorBank bank, ControllerConfig config)
      : model_(std::move(model)), bank_(std::move(bank)), config_(std::move(config)) {
    const int n = model_.dof();
    if (config_.gains.kp.size() == 0) {
      const auto d = ControllerGains::defaults(n);
      config_.gains.kp = d.kp;
      config_.gains.kd = d.kd;
    }
    config_.gains.validate(n);
    if (config_.d_bound.size() == 0) config_.d_bound = Vec::Zero(n);
    reset();
  }

  void reset() {
    policy_ = config_.hysteresis ? *config_.hysteresis : HysteresisPolicy::defaults(bank_);
    policy_.last_shift.assign(static_cast<std::size_t>(model_.dof()), -kInf);
  }

  ControlCommand step(const State& state, const ReferenceSample& ref) {
    if (config_.law == ControlLaw::sliding)
      return sliding_mode_step(model_, bank_, state, ref, config_.gains, config_.d_bound, policy_,
                               config_.gear);
    return computed_torque_step(model_, bank_, state, ref, config_.gains, policy_, config_.gear);
  }

  const ControllerConfig& config() const { return config_; }
  const HysteresisPolicy& policy() const { return policy_; }

 private:
  RobotModel model_;
  ActuatorBank bank_;
  ControllerConfig config_;
  HysteresisPolicy policy_;
};

}  // namespace vga
