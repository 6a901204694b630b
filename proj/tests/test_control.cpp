#include "test_util.hpp"

#include "vga/control.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace vga {
namespace {

using test::Rng;

Vec v1(double x) { return Vec::Constant(1, x); }

State make_state(const Vec& q, const Vec& qd, std::vector<int> gears, double t = 0) {
  return State{q, qd, std::move(gears), t};
}

ReferenceSample make_ref(const Vec& q, const Vec& qd, const Vec& qdd) {
  return ReferenceSample{0.0, q, qd, qdd};
}

ActuatorBank unlimited(const ActuatorBank& bank) {
  std::vector<Actuator> axes = bank.axes();
  for (auto& a : axes) a.torque_limit = kInf;
  return ActuatorBank(axes);
}

// ---------------------------------------------------------------------------
// Computed torque

TEST(ComputedTorque, ZeroErrorUsesDesiredAcceleration) {
  Rng rng(1);
  for (const auto& robot : test::default_robots()) {
    const int n = robot.model.dof();
    const auto gains = ControllerGains::defaults(n);
    for (int it = 0; it < 50; ++it) {
      const Vec q = rng.vec(n, -3, 3), qd = rng.vec(n, -1, 1), qdd = rng.vec(n, -5, 5);
      HysteresisPolicy policy = HysteresisPolicy::defaults(robot.bank);
      const auto cmd = computed_torque_step(robot.model, robot.bank,
                                            make_state(q, qd, rng.gears(robot.bank)),
                                            make_ref(q, qd, qdd), gains, policy);
      for (int i = 0; i < n; ++i) EXPECT_EQ(cmd.qdd_r(i), qdd(i));
    }
  }
}

TEST(ComputedTorque, UnsaturatedCommandRealizesReferenceAcceleration) {
  Rng rng(2);
  for (const auto& robot : test::default_robots()) {
    const int n = robot.model.dof();
    const ActuatorBank bank = unlimited(robot.bank);
    const auto gains = ControllerGains::defaults(n);
    for (int it = 0; it < 200; ++it) {
      HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
      const State st = make_state(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.gears(bank));
      const auto ref = make_ref(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.vec(n, -5, 5));
      const auto cmd = computed_torque_step(robot.model, bank, st, ref, gains, policy);
      const Vec qdd = forward_dynamics(robot.model, bank, GearRatios::select(bank, cmd.gears),
                                       cmd.tau, st.qd, st.q, Vec::Zero(n));
      EXPECT_LT((qdd - cmd.qdd_r).norm(), 1e-8 * (1 + cmd.qdd_r.norm()));
    }
  }
}

TEST(ComputedTorque, TorqueIsSaturated) {
  Rng rng(3);
  for (const auto& robot : test::default_robots()) {
    const int n = robot.model.dof();
    const auto gains = ControllerGains::defaults(n);
    int saturated = 0;
    for (int it = 0; it < 300; ++it) {
      HysteresisPolicy policy = HysteresisPolicy::defaults(robot.bank);
      const auto cmd = computed_torque_step(
          robot.model, robot.bank, make_state(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.gears(robot.bank)),
          make_ref(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.vec(n, -5, 5)), gains, policy);
      for (int i = 0; i < n; ++i) EXPECT_LE(std::abs(cmd.tau(i)), robot.bank.axis(i).torque_limit);
      saturated += cmd.saturated;
    }
    EXPECT_GT(saturated, 0);
  }
}

TEST(ComputedTorque, FixedGearModeNeverShifts) {
  Rng rng(4);
  const auto robot = test::default_robots()[1];
  GearControl fixed;
  fixed.active = false;
  for (int it = 0; it < 100; ++it) {
    HysteresisPolicy policy = HysteresisPolicy::defaults(robot.bank);
    const auto gears = rng.gears(robot.bank);
    const auto cmd = computed_torque_step(
        robot.model, robot.bank, make_state(rng.vec(3, -3, 3), rng.vec(3, -1, 1), gears),
        make_ref(rng.vec(3, -3, 3), rng.vec(3, -1, 1), rng.vec(3, -5, 5)),
        ControllerGains::defaults(3), policy, fixed);
    EXPECT_EQ(cmd.gears, gears);
  }
}

TEST(ComputedTorque, DisturbedNearUprightEngagesLargeGear) {
  const RobotModel model = robots::pendulum();
  const ActuatorBank bank = robots::pendulum_actuators();
  HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
  const auto cmd = computed_torque_step(model, bank, make_state(v1(0.3), v1(0), {0}, 2.0),
                                        make_ref(v1(0), v1(0), v1(0)),
                                        ControllerGains::defaults(1), policy);
  EXPECT_EQ(cmd.proposed, std::vector<int>{1});
  EXPECT_EQ(cmd.gears, std::vector<int>{1});
  EXPECT_EQ(policy.last_shift[0], 2.0);
}

TEST(ComputedTorque, OverspeedForcesDownshiftDespiteDwell) {
  const RobotModel model = robots::pendulum();
  const ActuatorBank bank = robots::pendulum_actuators();
  HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
  policy.last_shift = {0.99};
  const auto cmd = computed_torque_step(model, bank, make_state(v1(-1.0), v1(3.0), {1}, 1.0),
                                        make_ref(v1(-1.0), v1(3.0), v1(0)),
                                        ControllerGains::defaults(1), policy);
  EXPECT_EQ(cmd.gears, std::vector<int>{0});
  EXPECT_TRUE(cmd.forced_shift);
  EXPECT_EQ(policy.last_shift[0], 1.0);
}

TEST(ComputedTorque, CandidateDiagnostics) {
  const RobotModel model = robots::pendulum();
  const ActuatorBank bank = robots::pendulum_actuators();
  HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
  const auto cmd = computed_torque_step(model, bank, make_state(v1(-kPi / 2), v1(0), {0}),
                                        make_ref(v1(-kPi / 2), v1(0), v1(0)),
                                        ControllerGains::defaults(1), policy);
  ASSERT_EQ(cmd.candidate_torque.size(), 1u);
  ASSERT_EQ(cmd.candidate_torque[0].size(), 2u);
  EXPECT_NEAR(cmd.candidate_torque[0][0], 4.905, 1e-12);
  EXPECT_NEAR(cmd.candidate_torque[0][1], 0.4905, 1e-12);
}

// ---------------------------------------------------------------------------
// Sliding mode

TEST(SlidingMode, OnSurfaceWithoutBoundMatchesComputedTorque) {
  Rng rng(5);
  for (const auto& robot : test::default_robots()) {
    const int n = robot.model.dof();
    const auto gains = ControllerGains::defaults(n);
    for (int it = 0; it < 100; ++it) {
      const Vec q = rng.vec(n, -3, 3), qd = rng.vec(n, -1, 1), qdd = rng.vec(n, -5, 5);
      const State st = make_state(q, qd, rng.gears(robot.bank));
      HysteresisPolicy p1 = HysteresisPolicy::defaults(robot.bank), p2 = p1;
      const auto ct = computed_torque_step(robot.model, robot.bank, st, make_ref(q, qd, qdd), gains, p1);
      const auto sm = sliding_mode_step(robot.model, robot.bank, st, make_ref(q, qd, qdd), gains,
                                        Vec::Zero(n), p2);
      EXPECT_EQ(sm.gears, ct.gears);
      EXPECT_LT((sm.tau - ct.tau).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(SlidingMode, ReducesToComputedTorqueWithoutRobustTerm) {
  Rng rng(6);
  for (const auto& robot : test::default_robots()) {
    const int n = robot.model.dof();
    const ActuatorBank bank = unlimited(robot.bank);
    ControllerGains sliding = ControllerGains::defaults(n);
    sliding.phi = kInf;
    ControllerGains ct = ControllerGains::defaults(n);
    ct.kd = Vec::Constant(n, sliding.lambda);
    ct.kp = Vec::Constant(n, 1e-300);
    for (int it = 0; it < 200; ++it) {
      const State st = make_state(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.gears(bank));
      const auto ref = make_ref(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.vec(n, -5, 5));
      HysteresisPolicy p1 = HysteresisPolicy::defaults(bank), p2 = p1;
      const auto a = sliding_mode_step(robot.model, bank, st, ref, sliding, Vec::Zero(n), p1);
      const auto b = computed_torque_step(robot.model, bank, st, ref, ct, p2);
      EXPECT_EQ(a.gears, b.gears);
      EXPECT_LT((a.tau - b.tau).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(SlidingMode, ScalarGain) {
  const RobotModel model = RobotModel("p", robots::pendulum().links(), Vec3::Zero());
  const ActuatorBank bank = unlimited(robots::pendulum_actuators());
  ControllerGains gains = ControllerGains::defaults(1);
  gains.phi = 0;
  HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
  GearControl fixed;
  fixed.active = false;
  // Joint lags the set-point: s > 0.
  const auto cmd = sliding_mode_step(model, bank, make_state(v1(0), v1(0), {1}),
                                     make_ref(v1(0.1), v1(0), v1(0)), gains, v1(1.0), policy, fixed);
  const double m = 0.25 + 100 * 0.0025;
  EXPECT_DOUBLE_EQ(m, 0.5);
  EXPECT_GT(cmd.robust_gain(0), 2.0);
  EXPECT_NEAR(cmd.robust_gain(0), 1.2 * 2.0 + gains.reaching, 1e-12);
  const double g = m * cmd.robust_gain(0);
  EXPECT_GT(g, 1.0);
  EXPECT_NEAR(cmd.tau(0), g / 10, 1e-12);
}

TEST(SlidingMode, LiteralReferenceOption) {
  const RobotModel model = robots::pendulum();
  const ActuatorBank bank = robots::pendulum_actuators();
  ControllerGains gains = ControllerGains::defaults(1);
  HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
  const State st = make_state(v1(0.2), v1(0.5), {0});
  const auto ref = make_ref(v1(0.1), v1(0.1), v1(1.0));
  auto cmd = sliding_mode_step(model, bank, st, ref, gains, v1(0), policy);
  EXPECT_NEAR(cmd.qdd_r(0), 1.0 + 5 * (0.1 - 0.5), 1e-15);
  EXPECT_NEAR(cmd.sliding(0), (0.1 - 0.5) + 5 * (0.1 - 0.2), 1e-15);
  gains.literal_reference = true;
  cmd = sliding_mode_step(model, bank, st, ref, gains, v1(0), policy);
  EXPECT_NEAR(cmd.qdd_r(0), 1.0 + (0.1 - 0.5), 1e-15);
}

// Outside the boundary layer s_i ds_i/dt <= -reaching |s_i| for any load force
// within the declared bound, whatever gears are engaged.
TEST(SlidingMode, SlidingConditionHoldsPointwise) {
  Rng rng(7);
  for (const auto& robot : test::default_robots()) {
    const int n = robot.model.dof();
    const ActuatorBank bank = unlimited(robot.bank);
    const ControllerGains gains = ControllerGains::defaults(n);
    int audited = 0;
    for (int it = 0; it < 2000; ++it) {
      const Vec bound = rng.vec(n, 0, 3);
      Vec d(n);
      for (int i = 0; i < n; ++i) d(i) = rng.uniform(-bound(i), bound(i));
      const State st = make_state(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.gears(bank));
      const auto ref = make_ref(rng.vec(n, -3, 3), rng.vec(n, -1, 1), rng.vec(n, -5, 5));
      HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
      const auto cmd = sliding_mode_step(robot.model, bank, st, ref, gains, bound, policy);
      const Vec qdd = forward_dynamics(robot.model, bank, GearRatios::select(bank, cmd.gears),
                                       cmd.tau, st.qd, st.q, d);
      const Vec sdot = cmd.qdd_r - qdd;
      for (int i = 0; i < n; ++i) {
        const double s = cmd.sliding(i);
        if (std::abs(s) <= gains.phi) continue;
        ++audited;
        EXPECT_LE(s * sdot(i), -gains.reaching * std::abs(s) + 1e-8 * (1 + std::abs(s * sdot(i))));
      }
    }
    EXPECT_GT(audited, 1000);
  }
}

TEST(SlidingMode, LargerBoundEngagesLargerGearAtRest) {
  const RobotModel model = RobotModel("p", robots::pendulum().links(), Vec3::Zero());
  const ActuatorBank bank = robots::pendulum_actuators();
  const ControllerGains gains = ControllerGains::defaults(1);
  const State st = make_state(v1(0), v1(0), {0});
  const auto ref = make_ref(v1(0.01), v1(0), v1(0));
  HysteresisPolicy p1 = HysteresisPolicy::disabled(1), p2 = p1;
  EXPECT_EQ(sliding_mode_step(model, bank, st, ref, gains, v1(0), p1).gears[0], 0);
  EXPECT_EQ(sliding_mode_step(model, bank, st, ref, gains, v1(2), p2).gears[0], 1);
}

TEST(SlidingMode, RejectsBadBound) {
  const RobotModel model = robots::pendulum();
  const ActuatorBank bank = robots::pendulum_actuators();
  HysteresisPolicy policy = HysteresisPolicy::defaults(bank);
  const State st = make_state(v1(0), v1(0), {0});
  const auto ref = make_ref(v1(0), v1(0), v1(0));
  const auto gains = ControllerGains::defaults(1);
  EXPECT_THROW(sliding_mode_step(model, bank, st, ref, gains, v1(-1), policy), UserError);
  EXPECT_THROW(sliding_mode_step(model, bank, st, ref, gains, Vec::Zero(2), policy), UserError);
  ControllerGains bad = gains;
  bad.lambda = 0;
  EXPECT_THROW(sliding_mode_step(model, bank, st, ref, bad, v1(0), policy), UserError);
  bad = gains;
  bad.phi = -1;
  EXPECT_THROW(sliding_mode_step(model, bank, st, ref, bad, v1(0), policy), UserError);
  bad = gains;
  bad.kp = v1(0);
  EXPECT_THROW(computed_torque_step(model, bank, st, ref, bad, policy), UserError);
}

TEST(BoundaryLayer, Saturation) {
  EXPECT_EQ(boundary_sat(0.05, 0.1), 0.5);
  EXPECT_EQ(boundary_sat(-3, 0.1), -1.0);
  EXPECT_EQ(boundary_sat(1e-9, 0), 1.0);
  EXPECT_EQ(boundary_sat(0, 0), 0.0);
  EXPECT_EQ(boundary_sat(5, kInf), 0.0);
}

// ---------------------------------------------------------------------------
// Reference sampler

Trajectory two_samples() {
  Trajectory t;
  t.samples.push_back({0.0, v1(0.0), v1(1.0), v1(2.0), v1(0), {0}});
  t.samples.push_back({0.1, v1(0.3), v1(3.0), v1(-4.0), v1(0), {0}});
  return t;
}

TEST(ReferenceSampler, SingleSampleIsSetPoint) {
  const ReferenceSampler ref(set_point(v1(0.4)));
  for (double t : {0.0, 0.5, 10.0}) {
    const auto s = ref(t);
    EXPECT_EQ(s.q(0), 0.4);
    EXPECT_EQ(s.qd(0), 0.0);
    EXPECT_EQ(s.qdd(0), 0.0);
  }
}

TEST(ReferenceSampler, ExactAtSampleTimes) {
  const ReferenceSampler ref(two_samples());
  EXPECT_EQ(ref(0.0).q(0), 0.0);
  EXPECT_EQ(ref(0.0).qdd(0), 2.0);
  EXPECT_EQ(ref(0.1).q(0), 0.3);
  EXPECT_EQ(ref(0.1).qd(0), 3.0);
}

TEST(ReferenceSampler, MidpointInterpolation) {
  const ReferenceSampler ref(two_samples());
  const auto s = ref(0.05);
  EXPECT_NEAR(s.q(0), 0.15, 1e-15);
  EXPECT_NEAR(s.qd(0), 2.0, 1e-15);
  EXPECT_EQ(s.qdd(0), 2.0);
}

TEST(ReferenceSampler, HoldsFinalPositionAtRest) {
  const ReferenceSampler ref(two_samples());
  const auto s = ref(0.2);
  EXPECT_EQ(s.q(0), 0.3);
  EXPECT_EQ(s.qd(0), 0.0);
  EXPECT_EQ(s.qdd(0), 0.0);
}

TEST(ReferenceSampler, RejectsBadTrajectories) {
  EXPECT_THROW(ReferenceSampler(Trajectory{}), UserError);
  Trajectory t = two_samples();
  t.samples[1].t = 0.0;
  EXPECT_THROW(ReferenceSampler{t}, UserError);
  t = two_samples();
  t.samples[1].q = Vec::Zero(2);
  EXPECT_THROW(ReferenceSampler{t}, UserError);
}

TEST(Controller, OwnsHysteresisState) {
  ControllerConfig cfg;
  Controller c(robots::pendulum(), robots::pendulum_actuators(), cfg);
  const auto cmd = c.step(make_state(v1(0.3), v1(0), {0}, 1.0), make_ref(v1(0), v1(0), v1(0)));
  EXPECT_EQ(cmd.gears, std::vector<int>{1});
  EXPECT_EQ(c.policy().last_shift[0], 1.0);
  c.reset();
  EXPECT_TRUE(std::isinf(c.policy().last_shift[0]));
  EXPECT_EQ(parse_control_law("sliding"), ControlLaw::sliding);
  EXPECT_THROW(parse_control_law("pid"), UserError);
}

}  // namespace
}  // namespace vga
