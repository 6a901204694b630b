#include "vga/io.hpp"
#include "vga/sweep.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace vga;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vga-io-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const Trajectory& short_plan() {
  static const Trajectory t = [] {
    PlannerParams p;
    p.goal_q = Vec::Constant(1, -2.8);
    p.max_nodes = 800;
    p.seed = 4;
    return plan_low_torque(robots::pendulum(), robots::pendulum_actuators(),
                           State{Vec::Constant(1, -kPi), Vec::Zero(1), {0}, 0.0}, p);
  }();
  return t;
}

Experiment quick_set_point() {
  Experiment e = disturbance_rejection();
  e.sim.duration = 0.5;
  return e;
}

const SimLog& quick_log() {
  static const SimLog log = [] {
    const Experiment e = quick_set_point();
    return run_track(e, make_reference(e));
  }();
  return log;
}

std::string replace_line(const std::string& text, int line, const std::string& with) {
  std::istringstream in(text);
  std::string out, l;
  for (int k = 0; std::getline(in, l); ++k) out += (k == line ? with : l) + "\n";
  return out;
}

std::string nth_line(const std::string& text, int line) {
  std::istringstream in(text);
  std::string l;
  for (int k = 0; k <= line; ++k) std::getline(in, l);
  return l;
}

bool mentions(const SchemaReport& r, const std::string& what) {
  for (const auto& p : r.problems)
    if (p.find(what) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Numbers, ShortestFormRoundTrips) {
  test::Rng rng(11);
  std::vector<double> values{0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 5e-324, 1.7976931348623157e308, -2.5};
  for (int k = 0; k < 2000; ++k) {
    std::uint64_t bits = rng.gen();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (std::isfinite(v)) values.push_back(v);
  }
  for (double v : values) {
    const auto back = parse_number(format_number(v));
    ASSERT_TRUE(back.has_value()) << format_number(v);
    EXPECT_EQ(std::memcmp(&v, &*back, sizeof v), 0) << format_number(v);
  }
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(2.0), "2");
}

TEST(Numbers, ParseRejectsJunk) {
  for (const char* s : {"", "1e", "1,2", "abc", "1.0 ", " 1", "--1"}) EXPECT_FALSE(parse_number(s).has_value()) << s;
  EXPECT_EQ(*parse_number("+1.5"), 1.5);
  EXPECT_EQ(*parse_number("-3e-2"), -0.03);
}

TEST(TrajectoryFile, RoundTripIsExact) {
  TempDir dir;
  const Trajectory& t = short_plan();
  PlannerParams p;
  p.goal_q = Vec::Constant(1, -2.8);
  const auto path = dir.path / "t.json";
  save_trajectory(path, t, {"short", 4, p});
  const Trajectory back = load_trajectory(path);
  ASSERT_EQ(back.samples.size(), t.samples.size());
  EXPECT_EQ(back.robot, t.robot);
  for (std::size_t k = 0; k < t.samples.size(); ++k) {
    EXPECT_EQ(back.samples[k].t, t.samples[k].t);
    EXPECT_EQ(back.samples[k].q, t.samples[k].q);
    EXPECT_EQ(back.samples[k].qd, t.samples[k].qd);
    EXPECT_EQ(back.samples[k].qdd, t.samples[k].qdd);
    EXPECT_EQ(back.samples[k].tau, t.samples[k].tau);
    EXPECT_EQ(back.samples[k].gears, t.samples[k].gears);
  }
  EXPECT_EQ(trajectory_to_string(back, {"short", 4, p}), read_text_file(path));
  const SchemaReport rep = check_output_file(path);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.kind, "trajectory");
  EXPECT_EQ(rep.rows, static_cast<int>(t.samples.size()));
}

TEST(TrajectoryFile, HeaderFields) {
  const Json j = Json::parse(trajectory_to_string(short_plan(), {"short", 4, std::nullopt}));
  EXPECT_EQ(j["format"], "vga-trajectory");
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["scenario"], "short");
  EXPECT_EQ(j["seed"], 4);
  EXPECT_EQ(j["dof"], 1);
  EXPECT_DOUBLE_EQ(j["duration"].get<double>(), short_plan().duration());
  // Primitives cover the samples run by run.
  double span = 0;
  for (const auto& p : j["primitives"]) span += p["duration"].get<double>();
  EXPECT_NEAR(span, short_plan().duration(), 1e-12);
}

TEST(TrajectoryFile, RejectsOtherVersionsAndBrokenSamples) {
  Json j = Json::parse(trajectory_to_string(short_plan(), {}));
  j["version"] = 2;
  EXPECT_THROW(trajectory_from_json(j), UserError);
  EXPECT_TRUE(mentions(check_json_text(j.dump()), "version"));
  j["version"] = 1;
  j["samples"][1]["t"] = -1.0;
  EXPECT_THROW(trajectory_from_json(j), UserError);
  j = Json::parse(trajectory_to_string(short_plan(), {}));
  j["samples"][0].erase("qd");
  EXPECT_THROW(trajectory_from_json(j), UserError);
  j["format"] = "something-else";
  EXPECT_EQ(check_json_text(j.dump()).kind, "unknown");
  EXPECT_THROW(load_trajectory("/nonexistent/t.json"), UserError);
}

TEST(LogFile, ColumnsAndRows) {
  const SimLog& log = quick_log();
  const std::string csv = log_to_csv(log, disturbance_rejection().bank);
  EXPECT_EQ(nth_line(csv, 0), "t,q0,qd0,q_ref0,qd_ref0,tau0,gear0,ratio0,d0,tau_e0,tau_i0,energy");
  const SchemaReport rep = check_csv_text(csv);
  EXPECT_TRUE(rep.ok()) << (rep.problems.empty() ? "" : rep.problems.front());
  EXPECT_EQ(rep.kind, "log");
  EXPECT_EQ(rep.rows, static_cast<int>(log.rows.size()));
  EXPECT_EQ(log_columns(3).size(), 32u);
}

TEST(LogFile, SchemaCheckCatchesTampering) {
  const std::string csv = log_to_csv(quick_log(), disturbance_rejection().bank);
  auto cells = split(nth_line(csv, 5));

  auto bad_gear = cells;
  bad_gear[6] = "0.5";
  EXPECT_TRUE(mentions(check_csv_text(replace_line(csv, 5, join(bad_gear))), "gear index"));

  auto bad_number = cells;
  bad_number[2] = "fast";
  EXPECT_TRUE(mentions(check_csv_text(replace_line(csv, 5, join(bad_number))), "qd0"));

  auto short_row = cells;
  short_row.pop_back();
  EXPECT_TRUE(mentions(check_csv_text(replace_line(csv, 5, join(short_row))), "columns"));

  std::string gap = csv;
  const auto at = gap.find(nth_line(csv, 7));
  gap.erase(at, nth_line(csv, 7).size() + 1);
  EXPECT_TRUE(mentions(check_csv_text(gap), "not uniform"));

  auto backwards = cells;
  backwards[0] = "0";
  EXPECT_TRUE(mentions(check_csv_text(replace_line(csv, 5, join(backwards))), "does not increase"));

  EXPECT_EQ(check_csv_text(replace_line(csv, 0, "time,q0")).kind, "unknown");
  EXPECT_FALSE(check_csv_text("").ok());
}

TEST(MetricsFile, SidecarMatchesLog) {
  TempDir dir;
  const SimLog& log = quick_log();
  const Experiment e = quick_set_point();
  save_log(dir.path / "run", log, e.bank, {e.scenario, 1, "sliding", "set-point", e.sim});
  const SchemaReport rep = check_output_file(dir.path / "run.json");
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.kind, "metrics");
  EXPECT_TRUE(check_output_file(dir.path / "run.csv").ok());
  const Json j = Json::parse(read_text_file(dir.path / "run.json"));
  EXPECT_EQ(j["run"]["controller"], "sliding");
  EXPECT_EQ(j["run"]["disturbance"]["kind"], "payload");
  EXPECT_EQ(j["run"]["disturbance"]["payload_mass"], 0.4);
  EXPECT_EQ(j["metrics"]["max_abs_torque"].get<double>(), log.metrics.max_abs_torque);
  EXPECT_EQ(j["metrics"]["shift_count"], log.metrics.shift_count);
  EXPECT_EQ(j["events"].size(), log.events.size());

  Json broken = j;
  broken["metrics"].erase("final_error");
  EXPECT_TRUE(mentions(check_json_text(broken.dump()), "final_error"));
  broken = j;
  broken["version"] = 7;
  EXPECT_TRUE(mentions(check_json_text(broken.dump()), "version"));
  EXPECT_FALSE(check_json_text("{not json").ok());
}

TEST(CompareFile, CsvRoundTripAndPrintedTable) {
  std::vector<CompareRow> rows(3);
  rows[0].mode = "fixed-1";
  rows[0].gears = {0};
  rows[0].metrics.max_abs_torque = 1.0 / 3.0;
  rows[0].metrics.torque_sq_integral = 12.345678912345;
  rows[0].metrics.final_error = 1e-300;
  rows[1].mode = "fixed-10";
  rows[1].gears = {1};
  rows[1].metrics.tracked = true;
  rows[1].metrics.saturated_fraction = 0.25;
  rows[2].mode = "active";
  rows[2].metrics.shift_count = 41;
  rows[2].metrics.max_error = 2.0 / 7.0;
  rows[2].metrics.aborted = true;

  const std::string csv = compare_to_csv(rows);
  EXPECT_EQ(check_csv_text(csv).kind, "compare");
  EXPECT_TRUE(check_csv_text(csv).ok());
  const auto back = compare_from_csv(csv);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(back[k].mode, rows[k].mode);
    EXPECT_EQ(back[k].gears, rows[k].gears);
    EXPECT_EQ(back[k].metrics.max_abs_torque, rows[k].metrics.max_abs_torque);
    EXPECT_EQ(back[k].metrics.torque_sq_integral, rows[k].metrics.torque_sq_integral);
    EXPECT_EQ(back[k].metrics.final_error, rows[k].metrics.final_error);
    EXPECT_EQ(back[k].metrics.max_error, rows[k].metrics.max_error);
    EXPECT_EQ(back[k].metrics.shift_count, rows[k].metrics.shift_count);
    EXPECT_EQ(back[k].metrics.saturated_fraction, rows[k].metrics.saturated_fraction);
    EXPECT_EQ(back[k].metrics.tracked, rows[k].metrics.tracked);
    EXPECT_EQ(back[k].metrics.aborted, rows[k].metrics.aborted);
  }
  EXPECT_EQ(nth_line(csv, 3).substr(0, 13), "active,rstar,");

  // The printed table shows the same numbers to 4 decimals.
  const std::string table = compare_table(rows);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::istringstream line(nth_line(table, static_cast<int>(k) + 1));
    std::string mode, tracked;
    double peak, integral, final_err;
    int shifts;
    line >> mode >> peak >> integral >> final_err >> tracked >> shifts;
    EXPECT_EQ(mode, back[k].mode);
    EXPECT_NEAR(peak, back[k].metrics.max_abs_torque, 5e-5);
    EXPECT_NEAR(integral, back[k].metrics.torque_sq_integral, 5e-5);
    EXPECT_NEAR(final_err, back[k].metrics.final_error, 5e-5);
    EXPECT_EQ(tracked, back[k].metrics.tracked ? "yes" : "no");
    EXPECT_EQ(shifts, back[k].metrics.shift_count);
  }
  EXPECT_THROW(compare_from_csv("mode,gears\n"), UserError);
}

TEST(AtomicWrite, LeavesOnlyTheTarget) {
  TempDir dir;
  const auto target = dir.path / "a" / "b" / "out.txt";
  write_file_atomic(target, "first");
  write_file_atomic(target, "second");
  EXPECT_EQ(read_text_file(target), "second");
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir.path)) files += entry.is_regular_file();
  EXPECT_EQ(files, 1);
}

TEST(Svg, DeterministicAndEscaped) {
  const SimLog& log = quick_log();
  const auto bank = disturbance_rejection().bank;
  const std::string a = render_svg(log_figure(log, bank, "payload <0.4>"));
  const std::string b = render_svg(log_figure(log, bank, "payload <0.4>"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("payload &lt;0.4&gt;"), std::string::npos);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  const std::string t = render_svg(trajectory_figure(short_plan(), robots::pendulum_actuators(), "plan"));
  EXPECT_NE(t.find("<polyline"), std::string::npos);
}

TEST(Sweep, GridOrderLastParameterFastest) {
  SweepGrid g;
  g.controllers = {"ct", "rstar"};
  g.d_max = {0.5, 1.0, 2.0};
  const auto pts = expand_grid(g);
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_EQ(*pts[1].overrides.controller, "ct");
  EXPECT_EQ(*pts[1].overrides.d_max, 1.0);
  EXPECT_EQ(*pts[3].overrides.controller, "rstar");
  EXPECT_EQ(*pts[3].overrides.d_max, 0.5);
  EXPECT_FALSE(pts[0].overrides.seed.has_value());
  EXPECT_EQ(expand_grid({}).size(), 1u);
}

TEST(Sweep, SinglePointEqualsDirectRun) {
  Experiment base = quick_set_point();
  SweepGrid g;
  g.d_max = {2.0};
  const auto res = run_sweep(base, g, std::nullopt, 1);
  ASSERT_EQ(res.size(), 1u);
  Overrides o;
  o.d_max = 2.0;
  apply_overrides(base, o);
  const SimLog log = run_track(base, make_reference(base));
  EXPECT_EQ(res[0].metrics.torque_sq_integral, log.metrics.torque_sq_integral);
  EXPECT_EQ(res[0].metrics.final_error, log.metrics.final_error);
  EXPECT_EQ(res[0].metrics.shift_count, log.metrics.shift_count);
}

TEST(Sweep, LargerDisturbanceBoundLowersFinalError) {
  SweepGrid g;
  g.d_max = {0.0, 0.5, 1.0, 2.0, 4.0};
  const auto res = run_sweep(disturbance_rejection(), g);
  ASSERT_EQ(res.size(), 5u);
  EXPECT_EQ(res[0].status, "failed");
  for (std::size_t k = 1; k < res.size(); ++k) {
    EXPECT_EQ(res[k].status, "ok");
    EXPECT_LE(res[k].metrics.final_error, res[k - 1].metrics.final_error) << "d_max " << g.d_max[k];
  }
  const std::string csv = sweep_to_csv(res);
  const SchemaReport rep = check_csv_text(csv);
  EXPECT_EQ(rep.kind, "sweep");
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.rows, 5);
}

TEST(Sweep, LongerDwellNeverAddsShifts) {
  SweepGrid g;
  g.dwell = {0.0, 0.05, 0.1, 0.2};
  const auto res = run_sweep(pendulum_swingup(), g, test::chatter_reference());
  ASSERT_EQ(res.size(), 4u);
  for (std::size_t k = 1; k < res.size(); ++k)
    EXPECT_LE(res[k].metrics.shift_count, res[k - 1].metrics.shift_count) << "dwell " << g.dwell[k];
  EXPECT_GT(res[0].metrics.shift_count, 4 * res[2].metrics.shift_count);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  SweepGrid g;
  g.controllers = {"ct", "sliding"};
  g.d_max = {0.5, 1.0};
  g.payload = {0.0, 0.4};
  Experiment base = quick_set_point();
  const std::string serial = sweep_to_csv(run_sweep(base, g, std::nullopt, 1));
  const std::string parallel = sweep_to_csv(run_sweep(base, g, std::nullopt, 4));
  EXPECT_EQ(serial, parallel);
}

TEST(Sweep, BadPointBecomesErrorRow) {
  SweepGrid g;
  g.d_max = {-1.0, 1.0};
  const auto res = run_sweep(quick_set_point(), g, std::nullopt, 2);
  EXPECT_EQ(res[0].status, "error");
  EXPECT_FALSE(res[0].message.empty());
  EXPECT_NE(res[1].status, "error");
  const std::string csv = sweep_to_csv(res);
  EXPECT_TRUE(check_csv_text(csv).ok());
  EXPECT_EQ(split(nth_line(csv, 1))[10], "");
}
