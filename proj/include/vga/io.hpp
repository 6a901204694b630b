#pragma once

// File formats: trajectory JSON, simulation log CSV with a JSON metrics
// sidecar, comparison and sweep tables, a schema checker for all of them,
// and a dependency-free SVG line-plot writer. Every writer is deterministic
// (no timestamps, shortest round-trip number formatting) and replaces its
// target atomically.

#include "vga/planner.hpp"
#include "vga/sim.hpp"

#include "json.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace vga {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kTrajectoryVersion = 1;
inline constexpr int kMetricsVersion = 1;
inline constexpr const char* kTrajectoryFormat = "vga-trajectory";
inline constexpr const char* kMetricsFormat = "vga-metrics";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- basics

// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) return std::nullopt;
  return v;
}

inline std::string join_indices(const std::vector<int>& v, char sep = ';') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UserError("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Writes next to the target and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw UserError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw UserError("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw UserError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw UserError("cannot move output into place at " + path.string());
  }
}

inline std::string string_field(const Json& j, const char* key) {
  if (!j.is_object()) return {};
  const auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

inline Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vec json_vec(const Json& j, const std::string& what) {
  if (!j.is_array()) throw UserError(what + " must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw UserError(what + " must be an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// ------------------------------------------------------------ trajectory

struct TrajectoryMeta {
  std::string scenario = "custom";
  std::uint64_t seed = 0;
  std::optional<PlannerParams> planner;
};

inline Json planner_json(const PlannerParams& p) {
  Json j;
  j["goal_q"] = vec_json(p.goal_q);
  j["goal_qd"] = vec_json(p.goal_qd);
  j["tol_q"] = p.tol_q;
  j["tol_qd"] = p.tol_qd;
  j["edge_duration"] = p.edge_duration;
  j["substep"] = p.substep;
  j["max_nodes"] = p.max_nodes;
  j["seed"] = p.seed;
  j["goal_bias"] = p.goal_bias;
  j["weight_q"] = p.weight_q;
  j["weight_qd"] = p.weight_qd;
  j["torque_weight"] = p.torque_weight;
  j["min_gear_hold"] = p.min_gear_hold;
  j["torque_levels"] = p.torque_levels;
  j["primitives_per_extension"] = p.primitives_per_extension;
  j["velocity_bound"] = vec_json(p.velocity_bound);
  j["integrator"] = to_string(p.integrator);
  return j;
}

// Consecutive samples with the same torque and gears form one primitive.
inline Json primitives_json(const Trajectory& traj) {
  Json out = Json::array();
  const auto& s = traj.samples;
  std::size_t k = 0;
  while (k + 1 < s.size()) {
    std::size_t end = k + 1;
    while (end + 1 < s.size() && s[end].tau == s[k].tau && s[end].gears == s[k].gears) ++end;
    Json p;
    p["t"] = s[k].t;
    p["duration"] = s[end].t - s[k].t;
    p["tau"] = vec_json(s[k].tau.size() ? s[k].tau : Vec::Zero(s[k].q.size()));
    p["gears"] = s[k].gears;
    out.push_back(std::move(p));
    k = end;
  }
  return out;
}

inline Json trajectory_json(const Trajectory& traj, const TrajectoryMeta& meta) {
  traj.validate();
  const TorqueMetrics cost = trajectory_cost(traj);
  Json j;
  j["format"] = kTrajectoryFormat;
  j["version"] = kTrajectoryVersion;
  j["robot"] = traj.robot;
  j["dof"] = traj.samples.front().q.size();
  j["scenario"] = meta.scenario;
  j["seed"] = meta.seed;
  j["duration"] = traj.duration();
  j["cost"] = {{"max_abs_torque", cost.max_abs}, {"torque_sq_integral", cost.integral}};
  if (meta.planner) j["planner"] = planner_json(*meta.planner);
  j["primitives"] = primitives_json(traj);
  Json samples = Json::array();
  for (const auto& s : traj.samples) {
    Json r;
    r["t"] = s.t;
    r["q"] = vec_json(s.q);
    r["qd"] = vec_json(s.qd);
    r["qdd"] = vec_json(s.qdd);
    if (s.tau.size()) r["tau"] = vec_json(s.tau);
    if (!s.gears.empty()) r["gears"] = s.gears;
    samples.push_back(std::move(r));
  }
  j["samples"] = std::move(samples);
  return j;
}

inline std::string trajectory_to_string(const Trajectory& traj, const TrajectoryMeta& meta) {
  return trajectory_json(traj, meta).dump(1) + "\n";
}

inline Trajectory trajectory_from_json(const Json& j, const std::string& source = "trajectory") {
  auto need = [&](const char* key) -> const Json& {
    if (!j.contains(key)) throw UserError(source + ": missing '" + key + "'");
    return j.at(key);
  };
  if (!j.is_object() || string_field(j, "format") != kTrajectoryFormat)
    throw UserError(source + ": not a trajectory file (format must be '" + kTrajectoryFormat + "')");
  const Json& version = need("version");
  if (!version.is_number_integer() || version.get<int>() != kTrajectoryVersion)
    throw UserError(source + ": unsupported trajectory version " + version.dump() + " (expected " +
                    std::to_string(kTrajectoryVersion) + ")");
  Trajectory traj;
  traj.robot = string_field(j, "robot");
  const Json& samples = need("samples");
  if (!samples.is_array()) throw UserError(source + ": 'samples' must be an array");
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Json& r = samples[k];
    const std::string where = source + ": sample " + std::to_string(k);
    if (!r.is_object() || !r.contains("t") || !r.at("t").is_number())
      throw UserError(where + " needs a numeric 't'");
    TrajectorySample s;
    s.t = r.at("t").get<double>();
    for (const char* key : {"q", "qd", "qdd"})
      if (!r.contains(key)) throw UserError(where + " is missing '" + key + "'");
    s.q = json_vec(r.at("q"), where + " q");
    s.qd = json_vec(r.at("qd"), where + " qd");
    s.qdd = json_vec(r.at("qdd"), where + " qdd");
    if (r.contains("tau")) s.tau = json_vec(r.at("tau"), where + " tau");
    if (r.contains("gears")) {
      if (!r.at("gears").is_array()) throw UserError(where + " gears must be an array");
      for (const auto& g : r.at("gears")) {
        if (!g.is_number_integer()) throw UserError(where + " gears must be integers");
        s.gears.push_back(g.get<int>());
      }
    }
    traj.samples.push_back(std::move(s));
  }
  traj.validate();
  return traj;
}

inline Trajectory load_trajectory(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UserError("trajectory file not found: " + path.string());
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw UserError(path.string() + ": invalid JSON: " + e.what());
  }
  return trajectory_from_json(j, path.string());
}

inline void save_trajectory(const std::filesystem::path& path, const Trajectory& traj,
                            const TrajectoryMeta& meta) {
  write_file_atomic(path, trajectory_to_string(traj, meta));
}

// ------------------------------------------------------------ sim log CSV

// Columns for an n-axis log, axes numbered from 0:
//   t                  s
//   q<i>, qd<i>        rad, rad/s (plant)
//   q_ref<i>, qd_ref<i>
//   tau<i>             N m, motor torque held until the next row
//   gear<i>            engaged gear index
//   ratio<i>           engaged reduction ratio
//   d<i>               N m, load-side disturbance force
//   tau_e<i>, tau_i<i> N m, extrinsic and intrinsic torque of the controller model
//   energy             J, plant kinetic plus potential energy
inline std::vector<std::string> log_columns(int n) {
  std::vector<std::string> cols{"t"};
  for (const char* group :
       {"q", "qd", "q_ref", "qd_ref", "tau", "gear", "ratio", "d", "tau_e", "tau_i"})
    for (int i = 0; i < n; ++i) cols.push_back(group + std::to_string(i));
  cols.push_back("energy");
  return cols;
}

inline std::string join(const std::vector<std::string>& cells, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? std::string(1, sep) : "") + cells[i];
  return s;
}

inline std::string log_to_csv(const SimLog& log, const ActuatorBank& bank) {
  const int n = log.dof;
  std::string out = join(log_columns(n)) + "\n";
  out.reserve(log.rows.size() * static_cast<std::size_t>(40 + 120 * n));
  auto put = [&](const Vec& v) {
    for (int i = 0; i < n; ++i) {
      out += ',';
      out += format_number(v.size() ? v(i) : 0.0);
    }
  };
  for (const SimRow& r : log.rows) {
    out += format_number(r.t);
    put(r.q);
    put(r.qd);
    put(r.q_ref);
    put(r.qd_ref);
    put(r.tau);
    for (int i = 0; i < n; ++i) out += "," + std::to_string(r.gears[i]);
    for (int i = 0; i < n; ++i) out += "," + format_number(bank.axis(i).gears[r.gears[i]]);
    put(r.d);
    put(r.tau_extrinsic);
    put(r.tau_intrinsic);
    out += "," + format_number(r.energy) + "\n";
  }
  return out;
}

struct RunInfo {
  std::string scenario = "custom";
  std::uint64_t seed = 0;
  std::string controller;  // ct, rstar or sliding
  std::string reference;   // "planned", "set-point" or the trajectory file
  SimConfig sim;
};

inline Json metrics_json(const SimMetrics& m) {
  Json j;
  j["max_abs_torque"] = m.max_abs_torque;
  j["torque_sq_integral"] = m.torque_sq_integral;
  j["final_error"] = m.final_error;
  j["max_error"] = m.max_error;
  j["shift_count"] = m.shift_count;
  j["saturated_fraction"] = m.saturated_fraction;
  j["tracked"] = m.tracked;
  j["aborted"] = m.aborted;
  j["abort_time"] = m.abort_time;
  j["abort_reason"] = m.abort_reason;
  return j;
}

inline Json sidecar_json(const SimLog& log, const RunInfo& info) {
  const DisturbanceSpec& d = info.sim.disturbance;
  Json dist;
  dist["kind"] = to_string(d.kind);
  if (d.kind == DisturbanceKind::payload) dist["payload_mass"] = d.payload_mass;
  if (d.kind == DisturbanceKind::impulse) {
    dist["impulse_time"] = d.impulse_time;
    dist["impulse"] = vec_json(d.impulse);
  }
  if (d.kind == DisturbanceKind::random) dist["bound"] = vec_json(d.bound);
  if (d.kind == DisturbanceKind::constant) dist["force"] = vec_json(d.force);

  Json j;
  j["format"] = kMetricsFormat;
  j["version"] = kMetricsVersion;
  j["generator"] = std::string("vgasim ") + kVersion;
  j["run"] = {{"scenario", info.scenario},
              {"seed", info.seed},
              {"robot", log.robot},
              {"dof", log.dof},
              {"controller", info.controller},
              {"reference", info.reference},
              {"duration", info.sim.duration},
              {"dt", info.sim.dt},
              {"control_period", info.sim.control_period},
              {"integrator", to_string(info.sim.integrator)},
              {"tolerance", info.sim.tolerance},
              {"disturbance", dist}};
  j["metrics"] = metrics_json(log.metrics);
  Json events = Json::array();
  for (const GearEvent& e : log.events)
    events.push_back({{"t", e.t},
                      {"axis", e.axis},
                      {"from", e.from},
                      {"to", e.to},
                      {"rotor_energy_jump", e.rotor_energy_jump},
                      {"forced", e.forced}});
  j["events"] = std::move(events);
  return j;
}

// Writes <stem>.csv and <stem>.json.
inline void save_log(const std::filesystem::path& stem, const SimLog& log, const ActuatorBank& bank,
                     const RunInfo& info) {
  std::filesystem::path csv = stem, json = stem;
  csv += ".csv";
  json += ".json";
  write_file_atomic(csv, log_to_csv(log, bank));
  write_file_atomic(json, sidecar_json(log, info).dump(1) + "\n");
}

// --------------------------------------------------------- compare table

inline const std::vector<std::string>& compare_columns() {
  static const std::vector<std::string> c{"mode",        "gears",        "max_abs_torque",
                                          "torque_sq_integral", "final_error", "max_error",
                                          "shift_count", "saturated_fraction", "tracked",
                                          "aborted"};
  return c;
}

inline std::string compare_to_csv(const std::vector<CompareRow>& rows) {
  std::string out = join(compare_columns()) + "\n";
  for (const CompareRow& r : rows) {
    const SimMetrics& m = r.metrics;
    out += join({r.mode, r.gears.empty() ? "rstar" : join_indices(r.gears),
                 format_number(m.max_abs_torque), format_number(m.torque_sq_integral),
                 format_number(m.final_error), format_number(m.max_error),
                 std::to_string(m.shift_count), format_number(m.saturated_fraction),
                 m.tracked ? "1" : "0", m.aborted ? "1" : "0"}) +
           "\n";
  }
  return out;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Printed table; values are the CSV values rounded to 4 decimals.
inline std::string compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream s;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %14s %16s %12s %8s %7s\n", "mode", "max|tau| N m",
                "int tau^2 dt", "final err", "tracked", "shifts");
  s << line;
  for (const CompareRow& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %14s %16s %12s %8s %7d\n", r.mode.c_str(),
                  format_fixed(r.metrics.max_abs_torque, 4).c_str(),
                  format_fixed(r.metrics.torque_sq_integral, 4).c_str(),
                  format_fixed(r.metrics.final_error, 4).c_str(), r.metrics.tracked ? "yes" : "no",
                  r.metrics.shift_count);
    s << line;
  }
  return s.str();
}

inline std::vector<CompareRow> compare_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split(line) != compare_columns())
    throw UserError("not a comparison table (header mismatch)");
  std::vector<CompareRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != compare_columns().size()) throw UserError("comparison row has the wrong column count");
    auto num = [&](std::size_t i) {
      const auto v = parse_number(c[i]);
      if (!v) throw UserError("comparison cell '" + c[i] + "' is not a number");
      return *v;
    };
    CompareRow r;
    r.mode = c[0];
    if (c[1] != "rstar")
      for (const auto& g : split(c[1], ';')) r.gears.push_back(static_cast<int>(std::stol(g)));
    r.metrics.max_abs_torque = num(2);
    r.metrics.torque_sq_integral = num(3);
    r.metrics.final_error = num(4);
    r.metrics.max_error = num(5);
    r.metrics.shift_count = static_cast<int>(num(6));
    r.metrics.saturated_fraction = num(7);
    r.metrics.tracked = c[8] == "1";
    r.metrics.aborted = c[9] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

// ------------------------------------------------------------ sweep table

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> c{
      "index",       "scenario",       "controller",         "seed",           "gears",
      "d_max",       "payload",        "dwell",              "min_improvement", "status",
      "max_abs_torque", "torque_sq_integral", "final_error",  "max_error",      "shift_count",
      "saturated_fraction", "tracked", "aborted",            "message"};
  return c;
}

// ----------------------------------------------------------- schema check

struct SchemaReport {
  std::string kind;  // log, compare, sweep, trajectory, metrics or unknown
  std::vector<std::string> problems;
  int rows = 0;
  bool ok() const { return problems.empty() && kind != "unknown"; }
};

namespace detail {

inline void check_csv_rows(std::istream& in, std::size_t cols, SchemaReport& rep,
                           const std::function<void(const std::vector<std::string>&, int)>& row_check) {
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      rep.problems.push_back("line " + std::to_string(lineno) + ": empty line");
      continue;
    }
    const auto c = split(line);
    if (c.size() != cols) {
      rep.problems.push_back("line " + std::to_string(lineno) + ": " + std::to_string(c.size()) +
                             " columns, header has " + std::to_string(cols));
    } else {
      row_check(c, lineno);
    }
    ++rep.rows;
    if (rep.problems.size() > 20) {
      rep.problems.push_back("too many problems, stopping");
      return;
    }
  }
}

inline void check_log_csv(std::istream& in, int n, SchemaReport& rep) {
  const std::size_t cols = log_columns(n).size();
  double t_prev = 0, dt = 0;
  int k = 0;
  check_csv_rows(in, cols, rep, [&](const std::vector<std::string>& c, int line) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto v = parse_number(c[i]);
      if (!v) {
        rep.problems.push_back("line " + std::to_string(line) + ": column " + log_columns(n)[i] +
                               " is not a number");
        return;
      }
      if (i >= 1 + 5 * static_cast<std::size_t>(n) && i < 1 + 6 * static_cast<std::size_t>(n) &&
          (*v != std::floor(*v) || *v < 0))
        rep.problems.push_back("line " + std::to_string(line) + ": gear index is not a non-negative integer");
    }
    const double t = *parse_number(c[0]);
    if (k == 1) dt = t - t_prev;
    if (k >= 1 && !(t > t_prev)) rep.problems.push_back("line " + std::to_string(line) + ": time does not increase");
    if (k >= 2 && std::abs((t - t_prev) - dt) > 1e-6 * std::max(dt, 1e-12) + 1e-12)
      rep.problems.push_back("line " + std::to_string(line) + ": time step is not uniform");
    t_prev = t;
    ++k;
  });
}

}  // namespace detail

inline SchemaReport check_csv_text(const std::string& text) {
  SchemaReport rep;
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) {
    rep.kind = "unknown";
    rep.problems.push_back("file is empty");
    return rep;
  }
  const auto cols = split(header);
  if (cols == compare_columns()) {
    rep.kind = "compare";
    detail::check_csv_rows(in, cols.size(), rep, [&](const std::vector<std::string>& c, int line) {
      for (std::size_t i = 2; i < c.size(); ++i)
        if (!parse_number(c[i]))
          rep.problems.push_back("line " + std::to_string(line) + ": " + cols[i] + " is not a number");
    });
    return rep;
  }
  if (cols == sweep_columns()) {
    rep.kind = "sweep";
    detail::check_csv_rows(in, cols.size(), rep, [&](const std::vector<std::string>& c, int line) {
      if (c[9] != "ok" && c[9] != "failed" && c[9] != "error")
        rep.problems.push_back("line " + std::to_string(line) + ": status must be ok, failed or error");
      if (c[9] == "error") return;
      for (std::size_t i = 10; i + 1 < c.size(); ++i)
        if (!parse_number(c[i]))
          rep.problems.push_back("line " + std::to_string(line) + ": " + cols[i] + " is not a number");
    });
    return rep;
  }
  if (cols.size() >= 12 && (cols.size() - 2) % 10 == 0) {
    const int n = static_cast<int>((cols.size() - 2) / 10);
    if (cols == log_columns(n)) {
      rep.kind = "log";
      detail::check_log_csv(in, n, rep);
      return rep;
    }
  }
  rep.kind = "unknown";
  rep.problems.push_back("header matches no known table (log, compare or sweep)");
  return rep;
}

inline SchemaReport check_json_text(const std::string& text) {
  SchemaReport rep;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    rep.kind = "unknown";
    rep.problems.push_back(std::string("invalid JSON: ") + e.what());
    return rep;
  }
  const std::string format = string_field(j, "format");
  if (format == kTrajectoryFormat) {
    rep.kind = "trajectory";
    try {
      rep.rows = static_cast<int>(trajectory_from_json(j).samples.size());
    } catch (const UserError& e) {
      rep.problems.push_back(e.what());
    }
    return rep;
  }
  if (format == kMetricsFormat) {
    rep.kind = "metrics";
    if (!j.contains("version") || j["version"] != kMetricsVersion) rep.problems.push_back("unsupported metrics version");
    for (const char* key : {"run", "metrics", "events"})
      if (!j.contains(key)) rep.problems.push_back(std::string("missing '") + key + "'");
    if (j.contains("metrics")) {
      const Json expected = metrics_json(SimMetrics{});
      for (const auto& [key, value] : expected.items())
        if (!j["metrics"].contains(key)) rep.problems.push_back("metrics is missing '" + key + "'");
    }
    if (j.contains("events")) rep.rows = static_cast<int>(j["events"].size());
    return rep;
  }
  rep.kind = "unknown";
  rep.problems.push_back("JSON has no known 'format' (expected vga-trajectory or vga-metrics)");
  return rep;
}

inline SchemaReport check_output_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UserError("file not found: " + path.string());
  const std::string text = read_text_file(path);
  const std::string ext = path.extension().string();
  if (ext == ".json") return check_json_text(text);
  if (ext == ".csv") return check_csv_text(text);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return check_json_text(text);
  return check_csv_text(text);
}

// ------------------------------------------------------------------- SVG

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct PlotPanel {
  std::string ylabel;
  std::vector<PlotSeries> series;
  bool step = false;  // staircase, for gear ratios
};

struct Figure {
  std::string title;
  std::string xlabel = "t [s]";
  std::vector<PlotPanel> panels;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    if (ch == '<') o += "&lt;";
    else if (ch == '>') o += "&gt;";
    else if (ch == '&') o += "&amp;";
    else if (ch == '"') o += "&quot;";
    else o += ch;
  }
  return o;
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

inline std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace detail

inline std::string render_svg(const Figure& fig) {
  using detail::fmt2;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double width = 820, left = 80, right = 150, top = 40, panel_h = 170, gap = 40;
  const double plot_w = width - left - right;
  const double height = top + static_cast<double>(fig.panels.size()) * (panel_h + gap) + 20;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::svg_escape(fig.title) << "</text>\n";

  double x0 = kInf, x1 = -kInf;
  for (const auto& p : fig.panels)
    for (const auto& ser : p.series)
      for (double x : ser.x) x0 = std::min(x0, x), x1 = std::max(x1, x);
  if (!(x1 > x0)) x0 = 0, x1 = 1;

  for (std::size_t pi = 0; pi < fig.panels.size(); ++pi) {
    const PlotPanel& p = fig.panels[pi];
    const double py = top + static_cast<double>(pi) * (panel_h + gap);
    double y0 = kInf, y1 = -kInf;
    for (const auto& ser : p.series)
      for (double y : ser.y)
        if (std::isfinite(y)) y0 = std::min(y0, y), y1 = std::max(y1, y);
    if (!(y1 > y0)) {
      const double c = std::isfinite(y0) ? y0 : 0.0;
      y0 = c - 1, y1 = c + 1;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;
    auto X = [&](double x) { return left + (x - x0) / (x1 - x0) * plot_w; };
    auto Y = [&](double y) { return py + panel_h - (y - y0) / (y1 - y0) * panel_h; };

    s << "<rect x=\"" << left << "\" y=\"" << py << "\" width=\"" << plot_w << "\" height=\"" << panel_h
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double t : detail::nice_ticks(y0, y1)) {
      s << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << fmt2(Y(t)) << "\" y2=\""
        << fmt2(Y(t)) << "\" stroke=\"#ddd\"/>\n";
      s << "<text x=\"" << left - 6 << "\" y=\"" << fmt2(Y(t) + 4) << "\" text-anchor=\"end\">"
        << detail::tick_label(t) << "</text>\n";
    }
    for (double t : detail::nice_ticks(x0, x1)) {
      s << "<line x1=\"" << fmt2(X(t)) << "\" x2=\"" << fmt2(X(t)) << "\" y1=\"" << py << "\" y2=\""
        << py + panel_h << "\" stroke=\"#eee\"/>\n";
      s << "<text x=\"" << fmt2(X(t)) << "\" y=\"" << py + panel_h + 14 << "\" text-anchor=\"middle\">"
        << detail::tick_label(t) << "</text>\n";
    }
    s << "<text transform=\"translate(" << 18 << "," << fmt2(py + panel_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << detail::svg_escape(p.ylabel) << "</text>\n";

    for (std::size_t si = 0; si < p.series.size(); ++si) {
      const PlotSeries& ser = p.series[si];
      const char* color = palette[si % 6];
      const std::size_t m = std::min(ser.x.size(), ser.y.size());
      const std::size_t stride = std::max<std::size_t>(1, m / 2000);
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.3\" points=\"";
      double prev_y = 0;
      for (std::size_t k = 0; k < m; k += (k + stride < m || k + 1 == m) ? stride : m - 1 - k) {
        if (!std::isfinite(ser.y[k])) continue;
        if (p.step && k > 0) s << fmt2(X(ser.x[k])) << "," << fmt2(Y(prev_y)) << " ";
        s << fmt2(X(ser.x[k])) << "," << fmt2(Y(ser.y[k])) << " ";
        prev_y = ser.y[k];
        if (k + 1 == m) break;
      }
      s << "\"/>\n";
      const double ly = py + 14 + 16 * static_cast<double>(si);
      s << "<line x1=\"" << left + plot_w + 10 << "\" x2=\"" << left + plot_w + 30 << "\" y1=\"" << ly - 4
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      s << "<text x=\"" << left + plot_w + 34 << "\" y=\"" << ly << "\">" << detail::svg_escape(ser.label)
        << "</text>\n";
    }
  }
  if (!fig.panels.empty())
    s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">"
      << detail::svg_escape(fig.xlabel) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

// States, torques and engaged ratios of a closed-loop run.
inline Figure log_figure(const SimLog& log, const ActuatorBank& bank, const std::string& title) {
  Figure f;
  f.title = title;
  const int n = log.dof;
  PlotPanel q{"q [rad]", {}, false}, qd{"qd [rad/s]", {}, false}, tau{"tau [N m]", {}, false},
      ratio{"ratio", {}, true};
  std::vector<double> t;
  for (const auto& r : log.rows) t.push_back(r.t);
  for (int i = 0; i < n; ++i) {
    PlotSeries sq{"q" + std::to_string(i), t, {}}, sr{"q_ref" + std::to_string(i), t, {}},
        sv{"qd" + std::to_string(i), t, {}}, st{"tau" + std::to_string(i), t, {}},
        sg{"ratio" + std::to_string(i), t, {}};
    for (const auto& r : log.rows) {
      sq.y.push_back(r.q(i));
      sr.y.push_back(r.q_ref(i));
      sv.y.push_back(r.qd(i));
      st.y.push_back(r.tau(i));
      sg.y.push_back(bank.axis(i).gears[r.gears[i]]);
    }
    q.series.push_back(std::move(sq));
    q.series.push_back(std::move(sr));
    qd.series.push_back(std::move(sv));
    tau.series.push_back(std::move(st));
    ratio.series.push_back(std::move(sg));
  }
  f.panels = {q, qd, tau, ratio};
  return f;
}

// Planned states, torques and ratios.
inline Figure trajectory_figure(const Trajectory& traj, const ActuatorBank& bank,
                                const std::string& title) {
  Figure f;
  f.title = title;
  const int n = static_cast<int>(traj.samples.front().q.size());
  PlotPanel q{"q [rad]", {}, false}, qd{"qd [rad/s]", {}, false}, tau{"tau [N m]", {}, true},
      ratio{"ratio", {}, true};
  std::vector<double> t;
  for (const auto& s : traj.samples) t.push_back(s.t);
  for (int i = 0; i < n; ++i) {
    PlotSeries sq{"q" + std::to_string(i), t, {}}, sv{"qd" + std::to_string(i), t, {}},
        st{"tau" + std::to_string(i), t, {}}, sg{"ratio" + std::to_string(i), t, {}};
    for (const auto& s : traj.samples) {
      sq.y.push_back(s.q(i));
      sv.y.push_back(s.qd(i));
      st.y.push_back(s.tau.size() ? s.tau(i) : 0.0);
      sg.y.push_back(s.gears.empty() ? 1.0 : bank.axis(i).gears[s.gears[i]]);
    }
    q.series.push_back(std::move(sq));
    qd.series.push_back(std::move(sv));
    tau.series.push_back(std::move(st));
    ratio.series.push_back(std::move(sg));
  }
  f.panels = {q, qd, tau, ratio};
  return f;
}

}  // namespace vga
