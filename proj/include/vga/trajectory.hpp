#pragma once

#include "vga/model.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace vga {

struct TrajectorySample {
  double t = 0.0;
  Vec q;
  Vec qd;
  Vec qdd;
  Vec tau;                 // motor torque applied over [t, t_next)
  std::vector<int> gears;  // gears engaged over [t, t_next)
};

struct Trajectory {
  std::string robot;
  std::vector<TrajectorySample> samples;

  bool empty() const { return samples.empty(); }
  double start_time() const { return samples.empty() ? 0.0 : samples.front().t; }
  double end_time() const { return samples.empty() ? 0.0 : samples.back().t; }
  double duration() const { return end_time() - start_time(); }

  void validate() const {
    if (samples.empty()) throw UserError("trajectory is empty");
    const auto n = samples.front().q.size();
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto& s = samples[k];
      if (s.q.size() != n || s.qd.size() != n || s.qdd.size() != n)
        throw UserError("trajectory sample " + std::to_string(k) + " has inconsistent dimensions");
      if (!s.q.allFinite() || !s.qd.allFinite() || !s.qdd.allFinite() || !std::isfinite(s.t))
        throw UserError("trajectory sample " + std::to_string(k) + " is not finite");
      if (k > 0 && !(s.t > samples[k - 1].t))
        throw UserError("trajectory time must be strictly increasing (sample " +
                        std::to_string(k) + ")");
    }
  }
};

struct TorqueMetrics {
  double max_abs = 0.0;   // N m
  double integral = 0.0;  // N^2 m^2 s
};

// Peak and squared-integral torque of a piecewise-constant trajectory; the
// integral is exact for the held torques.
inline TorqueMetrics trajectory_cost(const Trajectory& traj) {
  TorqueMetrics m;
  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    if (s.tau.size() == 0) continue;
    m.integral += s.tau.squaredNorm() * (traj.samples[k + 1].t - s.t);
    m.max_abs = std::max(m.max_abs, s.tau.cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace vga
