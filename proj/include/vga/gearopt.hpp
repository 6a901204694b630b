#pragma once

// Gear-ratio selection minimizing motor torque.
//
// With a diagonal R each axis decouples: tau_i(r) = num_i / r + r * tau_I,i,
// where num_i = tau_E,i (+ |d|_max,i sgn(s_i) for the robust objective).
// The continuous optimum is r* = sqrt(|num_i / tau_I,i|); for a discrete gear
// set the candidates are enumerated.

#include "vga/dynamics.hpp"

#include <optional>
#include <sstream>
#include <vector>

namespace vga {

struct ContinuousRatio {
  enum class Kind {
    finite,
    infinite,     // tau_I = 0, tau_E != 0: take the largest feasible gear
    indifferent,  // both zero: every ratio gives zero torque
  };
  Kind kind = Kind::indifferent;
  double value = 0.0;  // meaningful for finite only

  bool is_finite() const { return kind == Kind::finite; }
};

inline ContinuousRatio optimal_ratio_continuous(double tau_e, double tau_i) {
  if (tau_i == 0.0) {
    if (tau_e == 0.0) return {ContinuousRatio::Kind::indifferent, 0.0};
    return {ContinuousRatio::Kind::infinite, kInf};
  }
  return {ContinuousRatio::Kind::finite, std::sqrt(std::abs(tau_e / tau_i))};
}

struct GearObjectiveWeights {
  double alpha = 0.0;                  // end-point inertia trade-off
  std::optional<Mat> desired_inertia;  // M_d, required when alpha > 0
  Vec disturbance_bound;               // |d|_max per axis; empty means zero

  double bound(int i) const { return disturbance_bound.size() > i ? disturbance_bound(i) : 0.0; }
};

struct GearSelection {
  std::vector<int> gears;
  Vec torque;  // objective torque per axis at the selected gears
  double cost = 0.0;
};

struct GearQuery {
  Vec q;
  Vec qd;
  Vec qdd_r;                       // acceleration the controller wants
  std::vector<int> current;        // engaged gears, used for tie-breaking
  std::optional<Vec> sliding;      // s, enables the disturbance inflation
  bool enforce_speed_limit = true;
};

inline double signum(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

namespace detail {

// Numerator tau_E + |d|_max sgn(s) and tau_I for a query.
struct TorqueTerms {
  Vec numerator;
  Vec intrinsic;
};

inline TorqueTerms torque_terms(const RobotModel& model, const ActuatorBank& bank,
                                const GearQuery& query, const GearObjectiveWeights& w) {
  TorqueTerms t{extrinsic_torque(model, query.qdd_r, query.qd, query.q),
                intrinsic_torque(bank, query.qdd_r, query.qd)};
  if (query.sliding) {
    for (int i = 0; i < model.dof(); ++i) t.numerator(i) += w.bound(i) * signum((*query.sliding)(i));
  }
  return t;
}

inline bool speed_feasible(const ActuatorBank& bank, int axis, double ratio, double qd) {
  return std::abs(ratio * qd) <= bank.axis(axis).speed_limit;
}

inline void validate_query(const RobotModel& model, const ActuatorBank& bank,
                           const GearQuery& query, const GearObjectiveWeights& w) {
  const int n = model.dof();
  if (bank.size() != n || query.q.size() != n || query.qd.size() != n || query.qdd_r.size() != n)
    throw UserError("gear query dimensions do not match the robot");
  if (!query.current.empty() && !bank.valid_indices(query.current))
    throw UserError("current gear indices are invalid for the actuator bank");
  if (w.alpha < 0) throw UserError("alpha must be non-negative");
  if ((w.disturbance_bound.array() < 0).any())
    throw UserError("disturbance bound must be non-negative");
  if (w.alpha > 0 && !w.desired_inertia)
    throw UserError("alpha > 0 needs a desired end-point inertia");
}

inline bool is_current(const GearQuery& query, int axis, int idx) {
  return !query.current.empty() && query.current[axis] == idx;
}

}  // namespace detail

/// Objective torque per axis for a given gear choice (same objective as select_gears).
inline Vec objective_torque(const RobotModel& model, const ActuatorBank& bank,
                            const GearQuery& query, const GearObjectiveWeights& w,
                            const std::vector<int>& gears) {
  detail::validate_query(model, bank, query, w);
  const auto terms = detail::torque_terms(model, bank, query, w);
  const GearRatios r = GearRatios::select(bank, gears);
  Vec tau(model.dof());
  for (int i = 0; i < model.dof(); ++i)
    tau(i) = terms.numerator(i) / r(i) + r(i) * terms.intrinsic(i);
  return tau;
}

/// Discrete R* selection. Ties keep the engaged gear, otherwise the smaller ratio.
inline GearSelection select_gears(const RobotModel& model, const ActuatorBank& bank,
                                  const GearQuery& query, const GearObjectiveWeights& w = {}) {
  detail::validate_query(model, bank, query, w);
  const int n = model.dof();
  const auto terms = detail::torque_terms(model, bank, query, w);

  // Feasible candidates per axis.
  std::vector<std::vector<int>> feasible(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < bank.gear_count(i); ++k) {
      if (!query.enforce_speed_limit ||
          detail::speed_feasible(bank, i, bank.axis(i).gears[k], query.qd(i)))
        feasible[i].push_back(k);
    }
    if (feasible[i].empty()) {
      std::ostringstream msg;
      msg << "no feasible gear on axis " << i << ": joint speed " << query.qd(i)
          << " rad/s exceeds the rotor limit " << bank.axis(i).speed_limit << " rad/s in every gear";
      throw NoFeasibleGearError(msg.str());
    }
  }
  auto torque_at = [&](int i, int k) {
    const double r = bank.axis(i).gears[k];
    return terms.numerator(i) / r + r * terms.intrinsic(i);
  };

  GearSelection out;
  out.gears.assign(n, 0);
  out.torque = Vec::Zero(n);

  if (w.alpha == 0.0) {
    for (int i = 0; i < n; ++i) {
      double best = kInf;
      for (int k : feasible[i]) {
        const double t = torque_at(i, k);
        const double c = t * t;
        if (c < best || (c == best && detail::is_current(query, i, k))) {
          best = c;
          out.gears[i] = k;
          out.torque(i) = t;
        }
      }
    }
    for (int i = 0; i < n; ++i) out.cost += out.torque(i) * out.torque(i);
    return out;
  }

  // alpha > 0 couples the axes through M(R): walk the full cross product.
  const Mat h = mass_matrix(model, query.q);
  const Mat jac = task_jacobian(model, query.q);
  std::vector<std::size_t> pos(n, 0);
  double best_cost = kInf;
  int best_changes = n + 1;
  while (true) {
    std::vector<int> idx(n);
    Vec tau(n);
    double cost = 0;
    int changes = 0;
    Vec ratios(n);
    for (int i = 0; i < n; ++i) {
      idx[i] = feasible[i][pos[i]];
      tau(i) = torque_at(i, idx[i]);
      cost += tau(i) * tau(i);
      ratios(i) = bank.axis(i).gears[idx[i]];
      if (!detail::is_current(query, i, idx[i])) ++changes;
    }
    const Mat m = endpoint_inertia(h, bank, GearRatios(ratios), jac);
    cost += w.alpha * (*w.desired_inertia - m).norm();
    // Candidates are visited in lexicographic index order, so strict
    // comparison on (cost, changes) leaves the smallest ratios among ties.
    if (cost < best_cost || (cost == best_cost && changes < best_changes)) {
      best_cost = cost;
      best_changes = changes;
      out.gears = idx;
      out.torque = tau;
    }
    int k = n - 1;
    while (k >= 0 && ++pos[k] == feasible[k].size()) pos[k--] = 0;
    if (k < 0) break;
  }
  out.cost = best_cost;
  return out;
}

// Switching hysteresis: a proposed shift on an axis goes through only if it
// lowers that axis' torque magnitude by more than min_improvement and the axis
// has not shifted within the last `dwell` seconds. A zero threshold disables
// the corresponding check.
struct HysteresisPolicy {
  Vec min_improvement;             // N m, per axis
  double dwell = 0.1;              // s
  std::vector<double> last_shift;  // s, per axis

  HysteresisPolicy() = default;
  HysteresisPolicy(Vec threshold, double dwell_s)
      : min_improvement(std::move(threshold)), dwell(dwell_s),
        last_shift(static_cast<std::size_t>(min_improvement.size()), -kInf) {
    if ((min_improvement.array() < 0).any() || dwell < 0)
      throw UserError("hysteresis thresholds must be non-negative");
  }

  // 2% of each axis' torque limit, 100 ms dwell.
  static HysteresisPolicy defaults(const ActuatorBank& bank) {
    Vec th(bank.size());
    for (int i = 0; i < bank.size(); ++i) {
      const double lim = bank.axis(i).torque_limit;
      th(i) = std::isfinite(lim) ? 0.02 * lim : 0.0;
    }
    return HysteresisPolicy(th, 0.1);
  }

  static HysteresisPolicy disabled(int n) { return HysteresisPolicy(Vec::Zero(n), 0.0); }
};

inline constexpr double kTimeEpsilon = 1e-9;  // s

inline std::vector<int> hysteresis_filter(const std::vector<int>& proposed,
                                          const std::vector<int>& current, const Vec& tau_proposed,
                                          const Vec& tau_current, HysteresisPolicy& policy,
                                          double now) {
  const std::size_t n = proposed.size();
  if (current.size() != n || static_cast<std::size_t>(tau_proposed.size()) != n ||
      static_cast<std::size_t>(tau_current.size()) != n ||
      static_cast<std::size_t>(policy.min_improvement.size()) != n)
    throw UserError("hysteresis filter dimensions do not match");
  if (policy.last_shift.size() != n) policy.last_shift.assign(n, -kInf);
  std::vector<int> out = current;
  for (std::size_t i = 0; i < n; ++i) {
    if (proposed[i] == current[i]) continue;
    const double threshold = policy.min_improvement(static_cast<int>(i));
    const double gain = std::abs(tau_current(static_cast<int>(i))) -
                        std::abs(tau_proposed(static_cast<int>(i)));
    const bool torque_ok = threshold == 0.0 || gain > threshold;
    // 1 ns slack so a dwell that ends on the control grid is not lost to rounding.
    const bool dwell_ok =
        policy.dwell == 0.0 || now - policy.last_shift[i] >= policy.dwell - kTimeEpsilon;
    if (torque_ok && dwell_ok) {
      out[i] = proposed[i];
      policy.last_shift[i] = now;
    }
  }
  return out;
}

}  // namespace vga
