// vgasim: plan, track, compare and sweep variable-gear experiments.
//
// Exit codes: 0 success, 1 user error (bad flags, config or file),
// 2 numerical failure (no plan found, simulation diverged).

#include "vga/config.hpp"
#include "vga/io.hpp"
#include "vga/sweep.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>

namespace {

using namespace vga;

struct Options {
  std::string scenario;
  std::vector<std::string> configs;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> controller;
  std::optional<double> dmax;
  std::optional<double> payload;
  std::vector<double> gears;
  std::optional<double> impulse_time;
  std::vector<double> impulse;
  std::optional<double> dwell;
  std::optional<double> threshold;
  std::string trajectory;
  bool svg = false;
  // compare
  bool enforce_speed = false;
  bool enforce_torque = false;
  // sweep
  std::string sweep_controllers, sweep_seeds, sweep_gears, sweep_dmax, sweep_payload, sweep_dwell,
      sweep_threshold;
  int jobs = 0;
  // validate
  std::vector<std::string> files;
};

std::filesystem::path output_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("VGA_OUT_DIR"); env && *env) return env;
  return "out";
}

Experiment build_experiment(const Options& o) {
  if (o.scenario.empty() && o.configs.empty())
    throw UserError("choose an experiment with --scenario or --config");
  Experiment e = o.scenario.empty() ? Experiment{} : make_scenario(o.scenario);
  e = load_experiment(o.configs, e);
  Overrides ov;
  ov.seed = o.seed;
  ov.controller = o.controller;
  ov.d_max = o.dmax;
  ov.payload = o.payload;
  if (!o.gears.empty()) ov.gears = o.gears;
  ov.dwell = o.dwell;
  ov.min_improvement = o.threshold;
  ov.impulse_time = o.impulse_time;
  if (!o.impulse.empty()) ov.impulse = o.impulse;
  apply_overrides(e, ov);
  return e;
}

std::uint64_t experiment_seed(const Experiment& e) { return e.planner ? e.planner->seed : e.sim.seed; }

std::filesystem::path stem(const Options& o, const Experiment& e, const std::string& what) {
  return output_dir(o) / (e.scenario + "-seed" + std::to_string(experiment_seed(e)) + "-" + what);
}

std::filesystem::path with_ext(std::filesystem::path p, const char* ext) {
  p += ext;
  return p;
}

Trajectory reference_for(const Options& o, const Experiment& e, std::string& source) {
  if (!o.trajectory.empty()) {
    source = o.trajectory;
    return load_trajectory(o.trajectory);
  }
  if (e.target) {
    source = "set-point";
    return make_reference(e);
  }
  source = "planned";
  PlanStats stats;
  Trajectory t = make_reference(e, &stats);
  std::cout << "planned " << std::fixed << std::setprecision(3) << t.duration() << " s reference ("
            << stats.nodes << " nodes)\n";
  return t;
}

std::string num(double v, int digits = 4) { return format_fixed(v, digits); }

int cmd_plan(const Options& o) {
  Experiment e = build_experiment(o);
  if (!e.planner) throw UserError("scenario '" + e.scenario + "' has a fixed target and nothing to plan");
  PlanStats stats;
  const Trajectory traj = make_reference(e, &stats);
  const TorqueMetrics cost = trajectory_cost(traj);
  const auto path = with_ext(stem(o, e, "trajectory"), ".json");
  save_trajectory(path, traj, TrajectoryMeta{e.scenario, e.planner->seed, e.planner});
  if (o.svg)
    write_file_atomic(with_ext(stem(o, e, "trajectory"), ".svg"),
                      render_svg(trajectory_figure(traj, e.bank, e.scenario + " planned trajectory")));
  std::cout << "trajectory  " << path.string() << "\n"
            << "duration    " << num(traj.duration(), 3) << " s\n"
            << "nodes       " << stats.nodes << " (goal hits " << stats.goal_hits << ")\n"
            << "max|tau|    " << num(cost.max_abs) << " N m\n"
            << "int tau^2   " << num(cost.integral) << " N^2 m^2 s\n";
  return 0;
}

int cmd_track(const Options& o) {
  Experiment e = build_experiment(o);
  std::string source;
  const Trajectory ref = reference_for(o, e, source);
  const SimLog log = run_track(e, ref);
  const std::string name = "track-" + controller_name(e);
  RunInfo info{e.scenario, experiment_seed(e), controller_name(e), source, track_config(e, ref)};
  save_log(stem(o, e, name), log, e.bank, info);
  if (o.svg)
    write_file_atomic(with_ext(stem(o, e, name), ".svg"),
                      render_svg(log_figure(log, e.bank, e.scenario + " tracking (" + controller_name(e) + ")")));
  const SimMetrics& m = log.metrics;
  std::cout << "log         " << with_ext(stem(o, e, name), ".csv").string() << "\n"
            << "max|tau|    " << num(m.max_abs_torque) << " N m\n"
            << "int tau^2   " << num(m.torque_sq_integral) << " N^2 m^2 s\n"
            << "final error " << num(m.final_error) << " rad\n"
            << "shifts      " << m.shift_count << "\n"
            << "tracked     " << (m.tracked ? "yes" : "no (tracking failed)") << "\n";
  if (m.aborted) {
    std::cerr << "simulation aborted at t = " << num(m.abort_time, 3) << " s: " << m.abort_reason << "\n";
    return 2;
  }
  return 0;
}

int cmd_compare(const Options& o) {
  Experiment e = build_experiment(o);
  e.compare.enforce_speed_limit = e.compare.enforce_speed_limit || o.enforce_speed;
  e.compare.enforce_torque_limit = e.compare.enforce_torque_limit || o.enforce_torque;
  std::string source;
  const Trajectory ref = reference_for(o, e, source);
  const auto rows = run_compare(e, ref);
  const auto path = with_ext(stem(o, e, "compare"), ".csv");
  write_file_atomic(path, compare_to_csv(rows));
  std::cout << compare_table(rows) << "table       " << path.string() << "\n";
  return 0;
}

std::vector<std::string> list_arg(const std::string& s, char sep) {
  std::vector<std::string> out;
  for (auto& c : split(s, sep))
    if (!c.empty()) out.push_back(c);
  return out;
}

std::vector<double> number_list(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& c : list_arg(s, ',')) {
    const auto v = parse_number(c);
    if (!v) throw UserError(flag + ": '" + c + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

int cmd_sweep(const Options& o) {
  const Experiment e = build_experiment(o);
  SweepGrid grid;
  grid.controllers = list_arg(o.sweep_controllers, ',');
  for (double s : number_list(o.sweep_seeds, "--sweep-seeds")) {
    if (s < 0 || s != std::floor(s)) throw UserError("--sweep-seeds: seeds are non-negative integers");
    grid.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  for (const auto& set : list_arg(o.sweep_gears, ';')) grid.gears.push_back(number_list(set, "--sweep-gears"));
  grid.d_max = number_list(o.sweep_dmax, "--sweep-dmax");
  grid.payload = number_list(o.sweep_payload, "--sweep-payload");
  grid.dwell = number_list(o.sweep_dwell, "--sweep-dwell");
  grid.min_improvement = number_list(o.sweep_threshold, "--sweep-threshold");
  for (const auto& c : grid.controllers) parse_control_law(c);

  std::optional<Trajectory> ref;
  if (!o.trajectory.empty()) ref = load_trajectory(o.trajectory);
  const auto results = run_sweep(e, grid, ref, o.jobs);
  const auto path = with_ext(stem(o, e, "sweep"), ".csv");
  write_file_atomic(path, sweep_to_csv(results));
  int errors = 0;
  for (const auto& r : results) {
    std::cout << std::setw(4) << r.point.index << "  " << std::left << std::setw(7) << r.status << std::right;
    if (r.status == "error") {
      ++errors;
      std::cout << "  " << r.message << "\n";
    } else {
      std::cout << "  final error " << num(r.metrics.final_error) << "  max|tau| "
                << num(r.metrics.max_abs_torque) << "  shifts " << r.metrics.shift_count << "\n";
    }
  }
  std::cout << results.size() << " points, " << errors << " errors\ntable       " << path.string() << "\n";
  return 0;
}

int cmd_validate(const Options& o) {
  int bad = 0;
  for (const auto& f : o.files) {
    const SchemaReport r = check_output_file(f);
    if (r.ok()) {
      std::cout << f << ": ok (" << r.kind << ", " << r.rows << " rows)\n";
    } else {
      ++bad;
      std::cout << f << ": invalid (" << r.kind << ")\n";
      for (const auto& p : r.problems) std::cout << "  " << p << "\n";
    }
  }
  return bad ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Variable-gear actuator planning and simulation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(
      "Scenarios: pendulum-swingup, arm3-reach, disturbance-rejection.\n"
      "Outputs go to --out, else $VGA_OUT_DIR, else ./out; names embed scenario and seed.\n"
      "Exit codes: 0 success, 1 user error, 2 numerical failure.");

  app.add_option("--scenario", o.scenario, "Built-in scenario");
  app.add_option("--config", o.configs, "YAML experiment file, applied after --scenario (repeatable)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "Planner and simulation seed");
  app.add_option("--controller", o.controller, "Controller")
      ->check(CLI::IsMember({"ct", "rstar", "sliding"}));
  app.add_option("--dmax", o.dmax, "Sliding-mode disturbance bound per axis [N m]");
  app.add_option("--payload", o.payload, "Unknown end-effector payload [kg]");
  app.add_option("--gears", o.gears, "Gear ratio set for every axis, e.g. 1,10")->delimiter(',');
  app.add_option("--impulse-time", o.impulse_time, "Impulse disturbance time [s]");
  app.add_option("--impulse", o.impulse, "Impulse per axis [N m s], e.g. -0.2")->delimiter(',');
  app.add_option("--dwell", o.dwell, "Gear-shift dwell time [s]");
  app.add_option("--threshold", o.threshold, "Minimum torque improvement for a shift [N m]");

  auto* plan = app.add_subcommand("plan", "Plan a low-torque trajectory and write it as JSON");
  plan->add_flag("--svg", o.svg, "Also write an SVG plot");

  auto* track = app.add_subcommand("track", "Track a reference and write the CSV log and JSON metrics");
  track->add_option("--trajectory", o.trajectory, "Trajectory JSON to track instead of planning")
      ->check(CLI::ExistingFile);
  track->add_flag("--svg", o.svg, "Also write an SVG plot");

  auto* compare = app.add_subcommand("compare", "Compare fixed gears with active gear shifting");
  compare->add_option("--trajectory", o.trajectory, "Trajectory JSON to compare on")->check(CLI::ExistingFile);
  compare->add_flag("--enforce-speed-limit", o.enforce_speed, "Respect the rotor speed limit");
  compare->add_flag("--enforce-torque-limit", o.enforce_torque, "Saturate at the motor torque limit");

  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid in parallel and write one CSV row per point");
  sweep->add_option("--sweep-controllers", o.sweep_controllers, "e.g. ct,rstar,sliding");
  sweep->add_option("--sweep-seeds", o.sweep_seeds, "e.g. 1,2,3");
  sweep->add_option("--sweep-gears", o.sweep_gears, "Gear sets separated by ';', e.g. \"1,10;1,5,10\"");
  sweep->add_option("--sweep-dmax", o.sweep_dmax, "e.g. 0,0.5,1,2,4");
  sweep->add_option("--sweep-payload", o.sweep_payload, "e.g. 0,0.2,0.4");
  sweep->add_option("--sweep-dwell", o.sweep_dwell, "e.g. 0,0.05,0.1,0.2");
  sweep->add_option("--sweep-threshold", o.sweep_threshold, "e.g. 0,0.005,0.01");
  sweep->add_option("--trajectory", o.trajectory, "Shared reference for every point")->check(CLI::ExistingFile);
  sweep->add_option("--jobs", o.jobs, "Worker threads (default: all cores)");

  auto* validate = app.add_subcommand("validate", "Check output files against their documented schema");
  validate->add_option("files", o.files, "CSV or JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*plan) return cmd_plan(o);
    if (*track) return cmd_track(o);
    if (*compare) return cmd_compare(o);
    if (*sweep) return cmd_sweep(o);
    if (*validate) return cmd_validate(o);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
