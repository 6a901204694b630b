#pragma once

#include "vga/types.hpp"

#include <string>

namespace vga {

enum class Integrator { rk4, euler };

inline Integrator parse_integrator(const std::string& s) {
  if (s == "rk4") return Integrator::rk4;
  if (s == "euler") return Integrator::euler;
  throw UserError("unknown integrator '" + s + "' (expected rk4 or euler)");
}

inline const char* to_string(Integrator i) { return i == Integrator::rk4 ? "rk4" : "euler"; }

// One step of a second-order system qdd = accel(t, q, qd).
template <class Accel>
void integrate_step(Integrator method, Accel&& accel, double t, double h, Vec& q, Vec& qd) {
  if (method == Integrator::euler) {
    // Semi-implicit (symplectic) Euler.
    const Vec a = accel(t, q, qd);
    qd += h * a;
    q += h * qd;
    return;
  }
  const Vec a1 = accel(t, q, qd);
  const Vec q2 = q + 0.5 * h * qd;
  const Vec v2 = qd + 0.5 * h * a1;
  const Vec a2 = accel(t + 0.5 * h, q2, v2);
  const Vec q3 = q + 0.5 * h * v2;
  const Vec v3 = qd + 0.5 * h * a2;
  const Vec a3 = accel(t + 0.5 * h, q3, v3);
  const Vec q4 = q + h * v3;
  const Vec v4 = qd + h * a3;
  const Vec a4 = accel(t + h, q4, v4);
  q += (h / 6.0) * (qd + 2.0 * v2 + 2.0 * v3 + v4);
  qd += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
}

}  // namespace vga
