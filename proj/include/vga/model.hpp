#pragma once

#include "vga/types.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace vga {

// One revolute joint plus the rigid link it drives.
//
// Frames: link i's frame has its origin at joint i. At q_i = 0 it is aligned
// with the frame of link i-1; joint i rotates it about `axis` (expressed in
// the parent frame). Joint i+1 sits at `tip` in link i's frame.
struct Link {
  std::string name;
  Vec3 axis = Vec3::UnitZ();
  Vec3 tip = Vec3::Zero();
  double mass = 1.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about the COM, link frame
  double damping = 0.0;         // joint-side viscous damping (diagonal of D)
  double lower = -kInf;
  double upper = kInf;

  bool continuous() const { return !std::isfinite(lower) && !std::isfinite(upper); }
};

enum class TaskSpace { joint, position };

class RobotModel {
 public:
  RobotModel() = default;

  RobotModel(std::string name, std::vector<Link> links, Vec3 gravity = Vec3(0, 0, -9.81),
             TaskSpace task = TaskSpace::joint)
      : name_(std::move(name)), links_(std::move(links)), gravity_(gravity), task_(task) {
    validate();
    for (auto& l : links_) l.axis.normalize();
  }

  const std::string& name() const { return name_; }
  int dof() const { return static_cast<int>(links_.size()); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(int i) const { return links_.at(static_cast<std::size_t>(i)); }
  const Vec3& gravity() const { return gravity_; }
  TaskSpace task_space() const { return task_; }

  Mat damping_matrix() const {
    Vec d(dof());
    for (int i = 0; i < dof(); ++i) d(i) = links_[i].damping;
    return d.asDiagonal();
  }

  // Copy of the model with a point mass rigidly attached at the last link's tip.
  RobotModel with_payload(double payload_mass) const {
    if (payload_mass < 0) throw UserError("payload mass must be non-negative");
    RobotModel out = *this;
    if (payload_mass == 0 || links_.empty()) return out;
    Link& last = out.links_.back();
    const double m = last.mass + payload_mass;
    const Vec3 c = (last.mass * last.com + payload_mass * last.tip) / m;
    // Parallel-axis shift of both bodies to the combined COM.
    auto shift = [](double mass, const Vec3& r) {
      return Mat3(mass * (r.squaredNorm() * Mat3::Identity() - r * r.transpose()));
    };
    out.links_.back().inertia = last.inertia + shift(last.mass, last.com - c) +
                                shift(payload_mass, last.tip - c);
    out.links_.back().com = c;
    out.links_.back().mass = m;
    return out;
  }

 private:
  void validate() const {
    if (links_.empty()) throw UserError("robot model needs at least one link");
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const Link& l = links_[i];
      std::ostringstream where;
      where << "link " << i << " ('" << l.name << "')";
      if (!(l.mass > 0) || !std::isfinite(l.mass))
        throw UserError(where.str() + ": mass must be strictly positive");
      if (!l.inertia.allFinite() || (l.inertia - l.inertia.transpose()).norm() > 1e-12)
        throw UserError(where.str() + ": inertia must be finite and symmetric");
      Eigen::SelfAdjointEigenSolver<Mat3> eig(l.inertia);
      if (eig.eigenvalues().minCoeff() < 0)
        throw UserError(where.str() + ": inertia must be positive semi-definite");
      if (l.axis.norm() < 1e-12) throw UserError(where.str() + ": joint axis is zero");
      if (!l.tip.allFinite() || !l.com.allFinite())
        throw UserError(where.str() + ": geometry must be finite");
      if (l.damping < 0) throw UserError(where.str() + ": damping must be non-negative");
      if (!(l.lower < l.upper)) throw UserError(where.str() + ": joint limits are empty");
    }
    if (!gravity_.allFinite()) throw UserError("gravity must be finite");
  }

  std::string name_;
  std::vector<Link> links_;
  Vec3 gravity_ = Vec3(0, 0, -9.81);
  TaskSpace task_ = TaskSpace::joint;
};

struct Actuator {
  double rotor_inertia = 2.5e-3;  // I_i, kg m^2
  double damping = 1e-3;          // B_i, N m s/rad
  double torque_limit = kInf;     // N m
  double speed_limit = kInf;      // rad/s at the rotor
  std::vector<double> gears{1.0};
};

class ActuatorBank {
 public:
  ActuatorBank() = default;

  explicit ActuatorBank(std::vector<Actuator> axes) : axes_(std::move(axes)) {
    for (std::size_t i = 0; i < axes_.size(); ++i) {
      const Actuator& a = axes_[i];
      const std::string where = "actuator " + std::to_string(i);
      if (!(a.rotor_inertia > 0)) throw UserError(where + ": rotor inertia must be > 0");
      if (!(a.damping >= 0)) throw UserError(where + ": damping must be >= 0");
      if (!(a.torque_limit > 0)) throw UserError(where + ": torque limit must be > 0");
      if (!(a.speed_limit > 0)) throw UserError(where + ": speed limit must be > 0");
      if (a.gears.empty()) throw UserError(where + ": gear set is empty");
      for (std::size_t k = 0; k < a.gears.size(); ++k) {
        if (!(a.gears[k] > 0) || !std::isfinite(a.gears[k]))
          throw UserError(where + ": gear ratios must be finite and > 0");
        if (k > 0 && !(a.gears[k] > a.gears[k - 1]))
          throw UserError(where + ": gear set must be sorted ascending without duplicates");
      }
    }
  }

  // Same actuator on every axis.
  static ActuatorBank uniform(int n, const Actuator& a) {
    return ActuatorBank(std::vector<Actuator>(static_cast<std::size_t>(n), a));
  }

  int size() const { return static_cast<int>(axes_.size()); }
  const Actuator& axis(int i) const { return axes_.at(static_cast<std::size_t>(i)); }
  const std::vector<Actuator>& axes() const { return axes_; }
  int gear_count(int i) const { return static_cast<int>(axis(i).gears.size()); }

  Vec rotor_inertia() const { return collect(&Actuator::rotor_inertia); }
  Vec damping() const { return collect(&Actuator::damping); }
  Vec torque_limit() const { return collect(&Actuator::torque_limit); }
  Vec speed_limit() const { return collect(&Actuator::speed_limit); }

  bool valid_indices(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != size()) return false;
    for (int i = 0; i < size(); ++i)
      if (idx[i] < 0 || idx[i] >= gear_count(i)) return false;
    return true;
  }

  // Same gear set on every axis, replacing the current ones.
  ActuatorBank with_gears(const std::vector<double>& gears) const {
    std::vector<Actuator> axes = axes_;
    for (auto& a : axes) a.gears = gears;
    return ActuatorBank(std::move(axes));
  }

 private:
  Vec collect(double Actuator::*field) const {
    Vec v(size());
    for (int i = 0; i < size(); ++i) v(i) = axes_[i].*field;
    return v;
  }

  std::vector<Actuator> axes_;
};

// Diagonal gear-ratio matrix, stored as its diagonal.
class GearRatios {
 public:
  GearRatios() = default;
  explicit GearRatios(Vec diagonal) : d_(std::move(diagonal)) {
    for (int i = 0; i < d_.size(); ++i)
      if (!(d_(i) != 0) || !std::isfinite(d_(i)))
        throw UserError("gear-ratio matrix is singular");
  }

  // Rejects anything that is not an invertible diagonal matrix.
  static GearRatios from_matrix(const Mat& r) {
    if (r.rows() != r.cols()) throw UserError("gear-ratio matrix must be square");
    for (int i = 0; i < r.rows(); ++i)
      for (int j = 0; j < r.cols(); ++j)
        if (i != j && r(i, j) != 0) throw UserError("gear-ratio matrix must be diagonal");
    return GearRatios(r.diagonal());
  }

  static GearRatios select(const ActuatorBank& bank, const std::vector<int>& idx) {
    if (!bank.valid_indices(idx)) throw UserError("gear indices invalid for actuator bank");
    Vec d(bank.size());
    for (int i = 0; i < bank.size(); ++i) d(i) = bank.axis(i).gears[idx[i]];
    return GearRatios(d);
  }

  int size() const { return static_cast<int>(d_.size()); }
  const Vec& diagonal() const { return d_; }
  double operator()(int i) const { return d_(i); }
  Mat matrix() const { return d_.asDiagonal(); }

 private:
  Vec d_;
};

struct State {
  Vec q;
  Vec qd;
  std::vector<int> gears;
  double t = 0.0;
};

// Generalized joint force acting on the load side, plus the bound a
// controller is told about. The bound is not required to hold.
struct Disturbance {
  std::function<Vec(double, const Vec&, const Vec&)> force;
  Vec declared_bound;

  Vec operator()(double t, const Vec& q, const Vec& qd) const {
    return force ? force(t, q, qd) : Vec::Zero(q.size());
  }

  static Disturbance none(int n) { return {nullptr, Vec::Zero(n)}; }
  static Disturbance constant(const Vec& d, const Vec& bound) {
    if ((bound.array() < 0).any()) throw UserError("disturbance bound must be non-negative");
    return {[d](double, const Vec&, const Vec&) { return d; }, bound};
  }
};

}  // namespace vga
