#pragma once

// Kinodynamic RRT over (q, qd) with a discrete set of constant-torque,
// constant-gear primitives. Each extension integrates the candidate
// primitives from the nearest node for one edge and keeps the one ending
// closest to the random sample, with a torque-cost penalty. The tree is grown
// to the full node budget and the cheapest branch ending in the goal region is
// returned, so larger budgets (same seed) never return a costlier plan.

#include "vga/dynamics.hpp"
#include "vga/integrator.hpp"
#include "vga/trajectory.hpp"

#include <limits>
#include <random>

namespace vga {

struct Primitive {
  Vec tau;                 // motor torque
  std::vector<int> gears;
};

struct PlannerParams {
  Vec goal_q;
  Vec goal_qd;                     // empty = rest
  double tol_q = 0.2;              // rad, per axis
  double tol_qd = 0.5;             // rad/s, per axis
  double edge_duration = 0.1;      // s
  double substep = 0.01;           // s
  int max_nodes = 4000;
  std::uint64_t seed = 1;
  double goal_bias = 0.1;
  double weight_q = 1.0;           // distance weights on (q, qd)
  double weight_qd = 0.1;
  double torque_weight = 0.0;      // added to the distance per unit of edge cost
  double min_gear_hold = 0.2;      // s an axis keeps a gear before the plan may shift it
  std::vector<double> torque_levels{-1.0, -0.5, 0.0, 0.5, 1.0};  // fractions of tau_max
  int primitives_per_extension = 0;  // 0 = try all; otherwise a random subset
  Vec velocity_bound;              // sampling box for qd; empty = 10 rad/s
  Integrator integrator = Integrator::rk4;

  void validate(const RobotModel& model) const {
    const int n = model.dof();
    if (goal_q.size() != n) throw UserError("planner goal has the wrong dimension");
    if (goal_qd.size() != 0 && goal_qd.size() != n)
      throw UserError("planner goal velocity has the wrong dimension");
    if (!(tol_q > 0) || !(tol_qd > 0)) throw UserError("goal tolerance must be positive");
    if (!(substep > 0) || !(edge_duration >= substep))
      throw UserError("edge duration must be at least one substep");
    if (max_nodes < 1) throw UserError("node budget must be positive");
    if (goal_bias < 0 || goal_bias > 1) throw UserError("goal bias must be in [0, 1]");
    if (torque_levels.empty()) throw UserError("torque level set is empty");
    for (double f : torque_levels)
      if (std::abs(f) > 1) throw UserError("torque levels are fractions of tau_max within [-1, 1]");
    if (torque_weight < 0) throw UserError("torque weight must be non-negative");
    if (min_gear_hold < 0) throw UserError("minimum gear hold must be non-negative");
    if (velocity_bound.size() != 0 && velocity_bound.size() != n)
      throw UserError("velocity bound has the wrong dimension");
    for (int i = 0; i < n; ++i) {
      const Link& l = model.link(i);
      if (!l.continuous() && (goal_q(i) < l.lower || goal_q(i) > l.upper))
        throw UserError("planner goal is outside the joint limits");
    }
  }
};

struct PlanStats {
  int nodes = 0;
  int goal_hits = 0;
  int rejected_edges = 0;
  double closest_goal = kInf;  // min over nodes of the goal-normalized distance; <= 1 is inside
};

// Every per-axis combination of torque level and gear.
inline std::vector<Primitive> make_primitives(const ActuatorBank& bank,
                                              const std::vector<double>& levels) {
  const int n = bank.size();
  std::vector<Primitive> out;
  std::vector<int> lv(n, 0), gr(n, 0);
  while (true) {
    Primitive p;
    p.tau.resize(n);
    p.gears = gr;
    for (int i = 0; i < n; ++i) {
      const double lim = bank.axis(i).torque_limit;
      if (!std::isfinite(lim)) throw UserError("planner needs finite torque limits");
      p.tau(i) = levels[lv[i]] * lim;
    }
    out.push_back(std::move(p));
    int k = 0;
    for (; k < n; ++k) {
      if (++lv[k] < static_cast<int>(levels.size())) break;
      lv[k] = 0;
      if (++gr[k] < bank.gear_count(k)) break;
      gr[k] = 0;
    }
    if (k == n) break;
  }
  return out;
}

namespace detail {

struct PlanNode {
  int parent = -1;
  Vec q, qd;
  double cost = 0.0;
  double t = 0.0;
  std::vector<double> engaged_since;  // per axis
  Primitive primitive;              // applied on the edge from the parent
  std::vector<TrajectorySample> edge;  // substep states after the parent, ending here
};

inline double state_distance(const RobotModel& model, const PlannerParams& p, const Vec& q1,
                             const Vec& qd1, const Vec& q2, const Vec& qd2) {
  double d = 0;
  for (int i = 0; i < model.dof(); ++i) {
    double dq = q1(i) - q2(i);
    if (model.link(i).continuous()) dq = wrap_angle(dq);
    const double dv = qd1(i) - qd2(i);
    d += p.weight_q * dq * dq + p.weight_qd * dv * dv;
  }
  return std::sqrt(d);
}

// Largest per-axis error in units of the goal tolerance.
inline double goal_distance(const RobotModel& model, const PlannerParams& p, const Vec& goal_qd,
                            const Vec& q, const Vec& qd) {
  double worst = 0;
  for (int i = 0; i < model.dof(); ++i) {
    double dq = q(i) - p.goal_q(i);
    if (model.link(i).continuous()) dq = wrap_angle(dq);
    worst = std::max({worst, std::abs(dq) / p.tol_q, std::abs(qd(i) - goal_qd(i)) / p.tol_qd});
  }
  return worst;
}

inline bool in_goal(const RobotModel& model, const PlannerParams& p, const Vec& goal_qd,
                    const Vec& q, const Vec& qd) {
  return goal_distance(model, p, goal_qd, q, qd) <= 1.0;
}

}  // namespace detail

// Integrates one primitive from (q, qd) for up to `steps` substeps. Returns
// false if the start state (in the primitive's gears) or an intermediate
// state violates a joint or rotor-speed limit. Stops early when `stop`
// returns true for a substep state.
template <class Stop>
bool rollout(const RobotModel& model, const ActuatorBank& bank, const PlannerParams& p,
             const Primitive& prim, double t0, Vec q, Vec qd, int steps,
             std::vector<TrajectorySample>& out, Stop&& stop) {
  const int n = model.dof();
  const GearRatios r = GearRatios::select(bank, prim.gears);
  const Vec zero = Vec::Zero(n);
  auto accel = [&](double, const Vec& x, const Vec& v) {
    return forward_dynamics(model, bank, r, prim.tau, v, x, zero);
  };
  out.clear();
  for (int i = 0; i < n; ++i)
    if (std::abs(r(i) * qd(i)) > bank.axis(i).speed_limit) return false;
  for (int k = 0; k < steps; ++k) {
    integrate_step(p.integrator, accel, t0 + k * p.substep, p.substep, q, qd);
    if (!q.allFinite() || !qd.allFinite()) return false;
    for (int i = 0; i < n; ++i) {
      const Link& l = model.link(i);
      if (!l.continuous() && (q(i) < l.lower || q(i) > l.upper)) return false;
      if (std::abs(r(i) * qd(i)) > bank.axis(i).speed_limit) return false;
    }
    TrajectorySample s;
    s.t = t0 + (k + 1) * p.substep;
    s.q = q;
    s.qd = qd;
    s.tau = prim.tau;
    s.gears = prim.gears;
    out.push_back(std::move(s));
    if (stop(q, qd)) break;
  }
  return true;
}

/// Plans a low-torque trajectory from `start` to the goal region.
inline Trajectory plan_low_torque(const RobotModel& model, const ActuatorBank& bank,
                                  const State& start, const PlannerParams& params,
                                  PlanStats* stats = nullptr) {
  params.validate(model);
  const int n = model.dof();
  if (bank.size() != n || start.q.size() != n || start.qd.size() != n)
    throw UserError("planner start state does not match the robot");
  std::vector<int> start_gears = start.gears;
  if (!bank.valid_indices(start_gears)) start_gears.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const Link& l = model.link(i);
    if (!l.continuous() && (start.q(i) < l.lower || start.q(i) > l.upper))
      throw UserError("planner start is outside the joint limits");
    const double r = bank.axis(i).gears[start_gears[i]];
    if (std::abs(r * start.qd(i)) > bank.axis(i).speed_limit)
      throw UserError("planner start violates the rotor speed limit");
  }
  const Vec goal_qd = params.goal_qd.size() ? params.goal_qd : Vec::Zero(n);
  const Vec vbound = params.velocity_bound.size() ? params.velocity_bound : Vec::Constant(n, 10.0);
  const int edge_steps = std::max(1, static_cast<int>(std::lround(params.edge_duration / params.substep)));
  const std::vector<Primitive> prims = make_primitives(bank, params.torque_levels);

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<detail::PlanNode> tree;
  tree.reserve(static_cast<std::size_t>(params.max_nodes));
  {
    detail::PlanNode root;
    root.q = start.q;
    root.qd = start.qd;
    root.primitive.gears = start_gears;
    root.engaged_since.assign(static_cast<std::size_t>(n), -kInf);
    tree.push_back(std::move(root));
  }
  int best_goal = -1;
  PlanStats st;

  auto goal_test = [&](const Vec& q, const Vec& qd) { return detail::in_goal(model, params, goal_qd, q, qd); };
  st.closest_goal = detail::goal_distance(model, params, goal_qd, start.q, start.qd);
  if (goal_test(start.q, start.qd)) best_goal = 0;

  std::vector<TrajectorySample> edge, best_edge;
  std::vector<int> subset(prims.size());
  for (std::size_t i = 0; i < prims.size(); ++i) subset[i] = static_cast<int>(i);
  const int tries = params.primitives_per_extension > 0
                        ? std::min<int>(params.primitives_per_extension, static_cast<int>(prims.size()))
                        : static_cast<int>(prims.size());

  while (static_cast<int>(tree.size()) < params.max_nodes && best_goal != 0) {
    Vec sq(n), sqd(n);
    if (unit(rng) < params.goal_bias) {
      sq = params.goal_q;
      sqd = goal_qd;
    } else {
      for (int i = 0; i < n; ++i) {
        const Link& l = model.link(i);
        const double lo = l.continuous() ? -kPi : l.lower;
        const double hi = l.continuous() ? kPi : l.upper;
        sq(i) = lo + (hi - lo) * unit(rng);
        sqd(i) = vbound(i) * (2 * unit(rng) - 1);
      }
    }
    int nearest = 0;
    double best_d = kInf;
    for (std::size_t k = 0; k < tree.size(); ++k) {
      const double dd = detail::state_distance(model, params, tree[k].q, tree[k].qd, sq, sqd);
      if (dd < best_d) best_d = dd, nearest = static_cast<int>(k);
    }
    if (tries < static_cast<int>(prims.size())) {
      // Partial Fisher-Yates draws a fresh random subset.
      for (int k = 0; k < tries; ++k) {
        const int j = k + static_cast<int>(unit(rng) * static_cast<double>(prims.size() - k));
        std::swap(subset[k], subset[std::min<std::size_t>(j, prims.size() - 1)]);
      }
    }
    const detail::PlanNode& from = tree[static_cast<std::size_t>(nearest)];
    const double t0 = from.t;
    auto shift_allowed = [&](const Primitive& prim) {
      for (int i = 0; i < n; ++i) {
        if (prim.gears[i] != from.primitive.gears[i] &&
            t0 - from.engaged_since[i] < params.min_gear_hold - 1e-9)
          return false;
      }
      return true;
    };
    double best_score = kInf, best_cost = 0;
    int best_prim = -1;
    for (int k = 0; k < tries; ++k) {
      const Primitive& prim = prims[static_cast<std::size_t>(subset[k])];
      if (!shift_allowed(prim)) continue;
      if (!rollout(model, bank, params, prim, t0, from.q, from.qd, edge_steps, edge, goal_test)) {
        ++st.rejected_edges;
        continue;
      }
      const double dt = edge.back().t - t0;
      const double cost = prim.tau.squaredNorm() * dt;
      const auto& end = edge.back();
      const double score = detail::state_distance(model, params, end.q, end.qd, sq, sqd) +
                           params.torque_weight * cost;
      if (score < best_score) {
        best_score = score;
        best_cost = cost;
        best_prim = subset[k];
        best_edge.swap(edge);
      }
    }
    if (best_prim < 0) continue;
    detail::PlanNode node;
    node.parent = nearest;
    node.q = best_edge.back().q;
    node.qd = best_edge.back().qd;
    node.cost = from.cost + best_cost;
    node.primitive = prims[static_cast<std::size_t>(best_prim)];
    node.edge = best_edge;
    node.t = best_edge.back().t;
    node.engaged_since = from.engaged_since;
    for (int i = 0; i < n; ++i)
      if (node.primitive.gears[i] != from.primitive.gears[i]) node.engaged_since[i] = t0;
    tree.push_back(std::move(node));
    const int id = static_cast<int>(tree.size()) - 1;
    st.closest_goal = std::min(
        st.closest_goal, detail::goal_distance(model, params, goal_qd, tree.back().q, tree.back().qd));
    if (goal_test(tree.back().q, tree.back().qd)) {
      ++st.goal_hits;
      if (best_goal < 0 || tree.back().cost < tree[static_cast<std::size_t>(best_goal)].cost)
        best_goal = id;
    }
  }
  st.nodes = static_cast<int>(tree.size());
  if (stats) *stats = st;
  if (best_goal < 0)
    throw NoPlanFoundError("no plan reached the goal region within " +
                           std::to_string(params.max_nodes) + " nodes (closest approach " +
                           std::to_string(st.closest_goal) + " tolerances)");

  // Walk back to the root and emit samples with accelerations.
  std::vector<int> chain;
  for (int k = best_goal; k >= 0; k = tree[static_cast<std::size_t>(k)].parent) chain.push_back(k);
  std::reverse(chain.begin(), chain.end());
  Trajectory traj;
  traj.robot = model.name();
  const Vec zero = Vec::Zero(n);
  auto push = [&](double t, const Vec& q, const Vec& qd, const Primitive& prim) {
    TrajectorySample s;
    s.t = t;
    s.q = q;
    s.qd = qd;
    s.tau = prim.tau;
    s.gears = prim.gears;
    s.qdd = forward_dynamics(model, bank, GearRatios::select(bank, prim.gears), prim.tau, qd, q, zero);
    traj.samples.push_back(std::move(s));
  };
  // Each sample carries the primitive applied after it; the final sample
  // keeps the last primitive so the arrival acceleration is defined.
  for (std::size_t c = 0; c < chain.size(); ++c) {
    const auto& node = tree[static_cast<std::size_t>(chain[c])];
    const Primitive* next =
        c + 1 < chain.size() ? &tree[static_cast<std::size_t>(chain[c + 1])].primitive : nullptr;
    if (c == 0) {
      Primitive hold{next ? next->tau : Vec::Zero(n), next ? next->gears : start_gears};
      push(0.0, node.q, node.qd, hold);
      continue;
    }
    for (std::size_t e = 0; e < node.edge.size(); ++e) {
      const auto& s = node.edge[e];
      const bool last = e + 1 == node.edge.size();
      push(s.t, s.q, s.qd, last && next ? *next : node.primitive);
    }
  }
  return traj;
}

/// Open-loop replay of a trajectory's held primitives with the planner's
/// integrator; returns the final state.
inline std::pair<Vec, Vec> replay_open_loop(const RobotModel& model, const ActuatorBank& bank,
                                            const Trajectory& traj, double substep,
                                            Integrator integrator = Integrator::rk4) {
  traj.validate();
  Vec q = traj.samples.front().q, qd = traj.samples.front().qd;
  const Vec zero = Vec::Zero(model.dof());
  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    const GearRatios r = GearRatios::select(bank, s.gears);
    const double h = traj.samples[k + 1].t - s.t;
    const int steps = std::max(1, static_cast<int>(std::lround(h / substep)));
    auto accel = [&](double, const Vec& x, const Vec& v) {
      return forward_dynamics(model, bank, r, s.tau, v, x, zero);
    };
    for (int j = 0; j < steps; ++j) integrate_step(integrator, accel, s.t + j * h / steps, h / steps, q, qd);
  }
  return {q, qd};
}

}  // namespace vga
