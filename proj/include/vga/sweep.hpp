#pragma once

// Parameter grids run in parallel. Each grid point is an isolated job; the
// result order is the grid order regardless of scheduling.

#include "vga/io.hpp"
#include "vga/scenario.hpp"

#include <atomic>
#include <thread>

namespace vga {

// Empty lists leave the experiment's own value in place.
struct SweepGrid {
  std::vector<std::string> controllers;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> gears;
  std::vector<double> d_max;
  std::vector<double> payload;
  std::vector<double> dwell;
  std::vector<double> min_improvement;
};

struct SweepPoint {
  int index = 0;
  Overrides overrides;
};

struct SweepResult {
  SweepPoint point;
  std::string status;  // ok (tracked), failed (not tracked) or error
  SimMetrics metrics;
  std::string message;
  Experiment experiment;  // as run
};

// Cartesian product; the last parameter varies fastest.
inline std::vector<SweepPoint> expand_grid(const SweepGrid& g) {
  auto opt = [](const auto& v) {
    using T = typename std::decay_t<decltype(v)>::value_type;
    std::vector<std::optional<T>> out;
    if (v.empty()) out.emplace_back();
    for (const auto& x : v) out.emplace_back(x);
    return out;
  };
  std::vector<SweepPoint> pts;
  for (const auto& c : opt(g.controllers))
    for (const auto& s : opt(g.seeds))
      for (const auto& gs : opt(g.gears))
        for (const auto& d : opt(g.d_max))
          for (const auto& p : opt(g.payload))
            for (const auto& w : opt(g.dwell))
              for (const auto& m : opt(g.min_improvement)) {
                SweepPoint pt;
                pt.index = static_cast<int>(pts.size());
                pt.overrides.controller = c;
                pt.overrides.seed = s;
                pt.overrides.gears = gs;
                pt.overrides.d_max = d;
                pt.overrides.payload = p;
                pt.overrides.dwell = w;
                pt.overrides.min_improvement = m;
                pts.push_back(std::move(pt));
              }
  return pts;
}

// A fixed reference is shared by every point; otherwise each point builds
// its own (planning with its own seed and gears).
inline SweepResult run_sweep_point(const Experiment& base, const SweepPoint& pt,
                                   const std::optional<Trajectory>& reference) {
  SweepResult r;
  r.point = pt;
  r.experiment = base;
  try {
    apply_overrides(r.experiment, pt.overrides);
    const Trajectory ref = reference ? *reference : make_reference(r.experiment);
    const SimLog log = run_track(r.experiment, ref);
    r.metrics = log.metrics;
    r.status = log.metrics.tracked ? "ok" : "failed";
    if (log.metrics.aborted) r.message = log.metrics.abort_reason;
  } catch (const std::exception& e) {
    r.status = "error";
    r.message = e.what();
  }
  return r;
}

inline std::vector<SweepResult> run_sweep(const Experiment& base, const SweepGrid& grid,
                                          const std::optional<Trajectory>& reference = std::nullopt,
                                          int jobs = 0) {
  const std::vector<SweepPoint> pts = expand_grid(grid);
  std::vector<SweepResult> out(pts.size());
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min<int>(jobs, static_cast<int>(pts.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < pts.size(); k = next++) out[k] = run_sweep_point(base, pts[k], reference);
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

inline std::string sweep_to_csv(const std::vector<SweepResult>& results) {
  std::string out = join(sweep_columns()) + "\n";
  auto clean = [](std::string s) {
    for (char& c : s)
      if (c == ',' || c == '\n' || c == '\r') c = ' ';
    return s;
  };
  for (const SweepResult& r : results) {
    const Experiment& e = r.experiment;
    const SimMetrics& m = r.metrics;
    std::string ratios;
    for (double g : e.bank.axis(0).gears) ratios += (ratios.empty() ? "" : ";") + format_number(g);
    const double dmax = e.controller.d_bound.size() ? e.controller.d_bound(0) : 0.0;
    const double payload =
        e.sim.disturbance.kind == DisturbanceKind::payload ? e.sim.disturbance.payload_mass : 0.0;
    const HysteresisPolicy h = e.controller.hysteresis ? *e.controller.hysteresis : HysteresisPolicy::defaults(e.bank);
    const bool err = r.status == "error";
    auto metric = [&](const std::string& v) { return err ? std::string() : v; };
    out += join({std::to_string(r.point.index), e.scenario, controller_name(e),
                 std::to_string(e.planner ? e.planner->seed : e.sim.seed), ratios, format_number(dmax),
                 format_number(payload), format_number(h.dwell), format_number(h.min_improvement(0)),
                 r.status, metric(format_number(m.max_abs_torque)),
                 metric(format_number(m.torque_sq_integral)), metric(format_number(m.final_error)),
                 metric(format_number(m.max_error)), metric(std::to_string(m.shift_count)),
                 metric(format_number(m.saturated_fraction)), metric(m.tracked ? "1" : "0"),
                 metric(m.aborted ? "1" : "0"), clean(r.message)}) +
           "\n";
  }
  return out;
}

}  // namespace vga
