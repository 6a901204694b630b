#pragma once

// Built-in robots. The numbers are engineering defaults (no published
// parameters exist for the original machines); configs/ ships the same
// values as editable files.

#include "vga/model.hpp"

namespace vga::robots {

// Solid cylinder of radius r and length len along the link's z axis.
inline Mat3 cylinder_inertia(double mass, double radius, double len) {
  const double t = mass * (3 * radius * radius + len * len) / 12.0;
  return Vec3(t, t, 0.5 * mass * radius * radius).asDiagonal();
}

inline Actuator default_actuator() {
  Actuator a;
  a.rotor_inertia = 2.5e-3;
  a.damping = 1e-3;
  a.torque_limit = 0.25;
  a.speed_limit = 20.0;
  a.gears = {1.0, 10.0};
  return a;
}

// 1-DoF pendulum, point mass 1 kg at 0.5 m. q = 0 is upright; the joint
// rotates about +y so q > 0 tips the mass toward +x.
inline RobotModel pendulum() {
  Link l;
  l.name = "link";
  l.axis = Vec3::UnitY();
  l.tip = Vec3(0, 0, 0.5);
  l.com = Vec3(0, 0, 0.5);
  l.mass = 1.0;
  l.inertia = Mat3::Zero();
  return RobotModel("pendulum", {l});
}

inline ActuatorBank pendulum_actuators() { return ActuatorBank::uniform(1, default_actuator()); }

// Yaw base plus two pitch links. q = 0 points the whole arm straight up.
inline RobotModel arm3() {
  const double radius = 0.03;
  auto make = [&](std::string name, Vec3 axis, double mass, double len) {
    Link l;
    l.name = std::move(name);
    l.axis = axis;
    l.tip = Vec3(0, 0, len);
    l.com = Vec3(0, 0, 0.5 * len);
    l.mass = mass;
    l.inertia = cylinder_inertia(mass, radius, len);
    return l;
  };
  return RobotModel("arm3",
                    {make("base", Vec3::UnitZ(), 1.0, 0.3), make("upper", Vec3::UnitY(), 0.7, 0.3),
                     make("fore", Vec3::UnitY(), 0.4, 0.25)},
                    Vec3(0, 0, -9.81), TaskSpace::position);
}

inline Actuator arm3_actuator() {
  Actuator a = default_actuator();
  a.speed_limit = 40.0;
  return a;
}

inline ActuatorBank arm3_actuators() { return ActuatorBank::uniform(3, arm3_actuator()); }

}  // namespace vga::robots
