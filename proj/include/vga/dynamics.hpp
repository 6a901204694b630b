#pragma once

// Serial-chain rigid-body dynamics coupled to geared actuators.
//
// Load side:     tau_E = H(q) qdd + C(q, qd) qd + D qd + g(q)
// Actuator side: tau_I = I qdd + B qd            (joint coordinates)
// Coupling:      tau_E = R^T (tau - I wd - B w) + d,   w = R qd
//
// For a diagonal R this gives tau = R^-1 (tau_E - d) + R tau_I, where d is a
// generalized force acting on the load (positive d assists the motion).
//
// Spatial quantities are 6-vectors [angular; linear] expressed in the world
// frame at the world origin.

#include "vga/model.hpp"

#include <vector>

namespace vga {

namespace spatial {

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Motion cross-product operator v x (.)
inline Mat6 crm(const Vec6& v) {
  Mat6 m = Mat6::Zero();
  const Mat3 w = skew(v.head<3>());
  m.topLeftCorner<3, 3>() = w;
  m.bottomRightCorner<3, 3>() = w;
  m.bottomLeftCorner<3, 3>() = skew(v.tail<3>());
  return m;
}

// Force cross-product operator v x* (.)
inline Mat6 crf(const Vec6& v) { return -crm(v).transpose(); }

// Spatial inertia at the world origin of a body with mass m, COM c and
// rotational inertia ic about the COM (all world frame).
inline Mat6 inertia(double m, const Vec3& c, const Mat3& ic) {
  const Mat3 cx = skew(c);
  Mat6 out;
  out.topLeftCorner<3, 3>() = ic + m * cx * cx.transpose();
  out.topRightCorner<3, 3>() = m * cx;
  out.bottomLeftCorner<3, 3>() = m * cx.transpose();
  out.bottomRightCorner<3, 3>() = m * Mat3::Identity();
  return out;
}

}  // namespace spatial

struct Kinematics {
  std::vector<Mat3> rotation;  // link frames in world
  std::vector<Vec3> origin;    // joint positions
  std::vector<Vec3> axis;      // joint axes (unit)
  std::vector<Vec3> com;       // link COMs
  std::vector<Vec6> motion;    // joint motion subspaces S_i
  std::vector<Mat6> inertia;   // link spatial inertias
  Vec3 end_effector = Vec3::Zero();
};

inline Kinematics forward_kinematics(const RobotModel& model, const Vec& q) {
  const int n = model.dof();
  Kinematics k;
  k.rotation.resize(n);
  k.origin.resize(n);
  k.axis.resize(n);
  k.com.resize(n);
  k.motion.resize(n);
  k.inertia.resize(n);
  Mat3 parent_rot = Mat3::Identity();
  Vec3 joint_pos = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Link& l = model.link(i);
    const Mat3 rot = parent_rot * Eigen::AngleAxisd(q(i), l.axis).toRotationMatrix();
    k.rotation[i] = rot;
    k.origin[i] = joint_pos;
    k.axis[i] = parent_rot * l.axis;
    k.com[i] = joint_pos + rot * l.com;
    k.motion[i] << k.axis[i], joint_pos.cross(k.axis[i]);
    k.inertia[i] = spatial::inertia(l.mass, k.com[i], rot * l.inertia * rot.transpose());
    joint_pos = joint_pos + rot * l.tip;
    parent_rot = rot;
  }
  k.end_effector = joint_pos;
  return k;
}

namespace detail {

// Composite inertias Ic_i = sum_{j >= i} I_j.
inline std::vector<Mat6> composite_inertias(const Kinematics& k) {
  const int n = static_cast<int>(k.inertia.size());
  std::vector<Mat6> ic(n);
  Mat6 acc = Mat6::Zero();
  for (int i = n - 1; i >= 0; --i) {
    acc += k.inertia[i];
    ic[i] = acc;
  }
  return ic;
}

inline Mat mass_matrix(const Kinematics& k) {
  const int n = static_cast<int>(k.inertia.size());
  const auto ic = composite_inertias(k);
  Mat h(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      h(i, j) = k.motion[i].dot(ic[j] * k.motion[j]);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

// Recursive Newton-Euler; returns H qdd + C qd + g (g only if with_gravity).
inline Vec rnea(const Kinematics& k, const Vec3& gravity, const Vec& qd, const Vec& qdd,
                bool with_gravity) {
  const int n = static_cast<int>(k.inertia.size());
  std::vector<Vec6> f(n);
  Vec6 v = Vec6::Zero();
  Vec6 a = Vec6::Zero();
  if (with_gravity) a.tail<3>() = -gravity;
  for (int i = 0; i < n; ++i) {
    const Vec6& s = k.motion[i];
    v = v + s * qd(i);
    a = a + s * qdd(i) + spatial::crm(v) * s * qd(i);
    f[i] = k.inertia[i] * a + spatial::crf(v) * (k.inertia[i] * v);
  }
  Vec tau(n);
  Vec6 fc = Vec6::Zero();
  for (int i = n - 1; i >= 0; --i) {
    fc += f[i];
    tau(i) = k.motion[i].dot(fc);
  }
  return tau;
}

}  // namespace detail

/// Joint-space inertia H(q) by the composite-rigid-body algorithm.
inline Mat mass_matrix(const RobotModel& model, const Vec& q) {
  return detail::mass_matrix(forward_kinematics(model, q));
}

/// Partial derivatives dH/dq_k, k = 0..n-1.
inline std::vector<Mat> mass_matrix_partials(const RobotModel& model, const Vec& q) {
  const Kinematics k = forward_kinematics(model, q);
  const int n = model.dof();
  const auto ic = detail::composite_inertias(k);
  std::vector<Mat> out(n, Mat::Zero(n, n));
  for (int m = 0; m < n; ++m) {
    const Mat6 sx = spatial::crm(k.motion[m]);
    // Moving joint m rigidly rotates every body (and joint axis) distal to it.
    std::vector<Vec6> ds(n, Vec6::Zero());
    for (int j = m; j < n; ++j) ds[j] = sx * k.motion[j];
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const int c = std::max(j, m);
        const Mat6 dic = spatial::crf(k.motion[m]) * ic[c] - ic[c] * sx;
        const double v = ds[i].dot(ic[j] * k.motion[j]) + k.motion[i].dot(dic * k.motion[j]) +
                         k.motion[i].dot(ic[j] * ds[j]);
        out[m](i, j) = v;
        out[m](j, i) = v;
      }
    }
  }
  return out;
}

/// Coriolis/centrifugal matrix built from Christoffel symbols, so that
/// Hdot - 2C is skew-symmetric.
inline Mat coriolis_matrix(const RobotModel& model, const Vec& q, const Vec& qd) {
  const int n = model.dof();
  const auto dh = mass_matrix_partials(model, q);
  Mat c = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        c(i, j) += 0.5 * (dh[k](i, j) + dh[j](i, k) - dh[i](j, k)) * qd(k);
  return c;
}

/// Hdot = sum_k dH/dq_k qd_k.
inline Mat mass_matrix_rate(const RobotModel& model, const Vec& q, const Vec& qd) {
  const auto dh = mass_matrix_partials(model, q);
  Mat out = Mat::Zero(model.dof(), model.dof());
  for (int k = 0; k < model.dof(); ++k) out += dh[k] * qd(k);
  return out;
}

inline Vec gravity_torque(const RobotModel& model, const Vec& q) {
  const Vec zero = Vec::Zero(model.dof());
  return detail::rnea(forward_kinematics(model, q), model.gravity(), zero, zero, true);
}

/// C(q, qd) qd + g(q).
inline Vec bias_torque(const RobotModel& model, const Vec& q, const Vec& qd) {
  return detail::rnea(forward_kinematics(model, q), model.gravity(), qd,
                      Vec::Zero(model.dof()), true);
}

/// tau_E = H qdd + C qd + D qd + g.
inline Vec extrinsic_torque(const RobotModel& model, const Vec& qdd, const Vec& qd,
                            const Vec& q) {
  const Kinematics k = forward_kinematics(model, q);
  Vec tau = detail::rnea(k, model.gravity(), qd, qdd, true);
  for (int i = 0; i < model.dof(); ++i) tau(i) += model.link(i).damping * qd(i);
  return tau;
}

/// tau_I = I qdd + B qd, in joint coordinates before any gear scaling.
inline Vec intrinsic_torque(const ActuatorBank& bank, const Vec& qdd, const Vec& qd) {
  Vec tau(bank.size());
  for (int i = 0; i < bank.size(); ++i)
    tau(i) = bank.axis(i).rotor_inertia * qdd(i) + bank.axis(i).damping * qd(i);
  return tau;
}

/// Motor torques realizing qdd: tau = R^-1 (tau_E - d) + R tau_I.
inline Vec inverse_dynamics(const RobotModel& model, const ActuatorBank& bank,
                            const GearRatios& r, const Vec& qdd, const Vec& qd, const Vec& q,
                            const Vec& d) {
  const Vec te = extrinsic_torque(model, qdd, qd, q);
  const Vec ti = intrinsic_torque(bank, qdd, qd);
  Vec tau(model.dof());
  for (int i = 0; i < model.dof(); ++i) tau(i) = (te(i) - d(i)) / r(i) + r(i) * ti(i);
  return tau;
}

inline Vec inverse_dynamics(const RobotModel& model, const ActuatorBank& bank, const Mat& r,
                            const Vec& qdd, const Vec& qd, const Vec& q, const Vec& d) {
  return inverse_dynamics(model, bank, GearRatios::from_matrix(r), qdd, qd, q, d);
}

/// H + R^T I R.
inline Mat effective_inertia(const Mat& h, const ActuatorBank& bank, const GearRatios& r) {
  Mat m = h;
  for (int i = 0; i < bank.size(); ++i) m(i, i) += r(i) * r(i) * bank.axis(i).rotor_inertia;
  return m;
}

inline Mat effective_inertia(const RobotModel& model, const ActuatorBank& bank,
                             const GearRatios& r, const Vec& q) {
  return effective_inertia(mass_matrix(model, q), bank, r);
}

/// qdd = [H + R^T I R]^-1 (R^T tau - R^T B R qd - C qd - D qd - g + d).
inline Vec forward_dynamics(const RobotModel& model, const ActuatorBank& bank,
                            const GearRatios& r, const Vec& tau, const Vec& qd, const Vec& q,
                            const Vec& d) {
  const int n = model.dof();
  const Kinematics k = forward_kinematics(model, q);
  const Mat m = effective_inertia(detail::mass_matrix(k), bank, r);
  Vec rhs = d - detail::rnea(k, model.gravity(), qd, Vec::Zero(n), true);
  for (int i = 0; i < n; ++i) {
    const double ri = r(i);
    rhs(i) += ri * tau(i) - ri * ri * bank.axis(i).damping * qd(i) - model.link(i).damping * qd(i);
  }
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError("effective inertia H + R^T I R is not positive definite");
  return llt.solve(rhs);
}

inline Vec forward_dynamics(const RobotModel& model, const ActuatorBank& bank, const Mat& r,
                            const Vec& tau, const Vec& qd, const Vec& q, const Vec& d) {
  return forward_dynamics(model, bank, GearRatios::from_matrix(r), tau, qd, q, d);
}

/// Acceleration error caused by an unmodelled load-side force d:
/// qdd_e = [H + R^T I R]^-1 d.
inline Vec acceleration_sensitivity(const RobotModel& model, const ActuatorBank& bank,
                                    const GearRatios& r, const Vec& q, const Vec& d) {
  const Mat m = effective_inertia(model, bank, r, q);
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError("effective inertia H + R^T I R is not positive definite");
  return llt.solve(d);
}

/// Linear velocity Jacobian of the end effector (3 x n).
inline Mat position_jacobian(const RobotModel& model, const Vec& q) {
  const Kinematics k = forward_kinematics(model, q);
  Mat j(3, model.dof());
  for (int i = 0; i < model.dof(); ++i)
    j.col(i) = k.axis[i].cross(k.end_effector - k.origin[i]);
  return j;
}

inline Vec3 end_effector_position(const RobotModel& model, const Vec& q) {
  return forward_kinematics(model, q).end_effector;
}

/// Task-space Jacobian used for end-point inertia.
inline Mat task_jacobian(const RobotModel& model, const Vec& q) {
  switch (model.task_space()) {
    case TaskSpace::joint:
      return Mat::Identity(model.dof(), model.dof());
    case TaskSpace::position:
      return position_jacobian(model, q);
  }
  return {};
}

/// M = J^-T [R^T I R + H] J^-1 for a square, non-singular J.
inline Mat endpoint_inertia(const Mat& h, const ActuatorBank& bank, const GearRatios& r,
                            const Mat& jac) {
  if (jac.rows() != jac.cols())
    throw UserError("end-point inertia needs a square task Jacobian");
  Eigen::JacobiSVD<Mat> svd(jac);
  const Vec sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-9 * std::max(1.0, sv(0)))
    throw SingularJacobianError("task Jacobian is singular at this configuration");
  const Mat jinv = jac.inverse();
  return jinv.transpose() * effective_inertia(h, bank, r) * jinv;
}

inline Mat endpoint_inertia(const RobotModel& model, const ActuatorBank& bank,
                            const GearRatios& r, const Vec& q) {
  return endpoint_inertia(mass_matrix(model, q), bank, r, task_jacobian(model, q));
}

inline double potential_energy(const RobotModel& model, const Vec& q) {
  const Kinematics k = forward_kinematics(model, q);
  double v = 0;
  for (int i = 0; i < model.dof(); ++i) v -= model.link(i).mass * model.gravity().dot(k.com[i]);
  return v;
}

/// Load kinetic energy plus rotor kinetic energy with rotor speeds w = R qd.
inline double kinetic_energy(const RobotModel& model, const ActuatorBank& bank,
                             const GearRatios& r, const Vec& q, const Vec& qd) {
  return 0.5 * qd.dot(effective_inertia(model, bank, r, q) * qd);
}

inline double total_energy(const RobotModel& model, const ActuatorBank& bank,
                           const GearRatios& r, const Vec& q, const Vec& qd) {
  return kinetic_energy(model, bank, r, q, qd) + potential_energy(model, q);
}

}  // namespace vga
