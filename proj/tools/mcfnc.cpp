// mcfnc: simulate, optimize, compare and calibrate freeway scenarios.
//
// Exit codes: 0 ok, 2 invalid input, 3 runtime failure, 4 infeasible
// relaxation, 5 tightness verification failed.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mcfnc/calibration.hpp"
#include "mcfnc/config.hpp"
#include "mcfnc/lp.hpp"
#include "mcfnc/relaxation.hpp"
#include "mcfnc/simulator.hpp"

namespace fs = std::filesystem;
using namespace mcfnc;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kRuntime = 3;
constexpr int kInfeasible = 4;
constexpr int kNotTight = 5;

// Files are collected in memory and written together once every input check
// has passed.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  std::ostream& file(const std::string& name) { return files_[name]; }
  void json(const std::string& name, const Json& j) { files_[name] << j.dump(2) << '\n'; }
  void extra(const fs::path& path, std::string content) { extra_[path] = std::move(content); }

  void commit() const {
    fs::create_directories(dir_);
    for (const auto& [name, s] : files_) write(dir_ / name, s.str());
    for (const auto& [path, s] : extra_) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write(path, s);
    }
  }

 private:
  static void write(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
    if (!out) throw RuntimeFailure("cannot write '" + p.string() + "'");
  }
  fs::path dir_;
  std::map<std::string, std::ostringstream> files_;
  std::map<fs::path, std::string> extra_;
};

std::string num(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

Json volume_json(const VolumeReport& r) {
  return Json{{"onramps", r.onramps}, {"mainline", r.mainline}, {"offramps", r.offramps}, {"total", r.total}};
}

void print_volumes(const std::string& title, const VolumeReport& r) {
  std::cout << title << "\n"
            << "  onramps   " << fixed(r.onramps) << "\n"
            << "  mainline  " << fixed(r.mainline) << "\n"
            << "  offramps  " << fixed(r.offramps) << "\n"
            << "  total     " << fixed(r.total) << "\n";
}

void write_volume_csv(std::ostream& out, const std::vector<std::pair<std::string, VolumeReport>>& runs) {
  out << "category";
  for (const auto& [name, r] : runs) out << ',' << name;
  out << '\n';
  const char* labels[] = {"onramps", "mainline", "offramps", "total"};
  for (int c = 0; c < 4; ++c) {
    out << labels[c];
    for (const auto& [name, r] : runs) {
      const double v = c == 0 ? r.onramps : c == 1 ? r.mainline : c == 2 ? r.offramps : r.total;
      out << ',' << num(v);
    }
    out << '\n';
  }
}

std::vector<bool> parse_commodity_mask(const std::string& list, const CommoditySet& ks) {
  std::vector<bool> mask(ks.size(), false);
  std::stringstream in(list);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (name.empty()) continue;
    const auto k = ks.find(name);
    if (!k) throw ModelError("--control-only: unknown commodity '" + name + "'");
    mask[k->index] = true;
  }
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw ModelError("--control-only: no commodity selected");
  }
  return mask;
}

std::string join(const std::vector<std::string>& v, std::size_t limit) {
  std::string s;
  for (std::size_t i = 0; i < v.size() && i < limit; ++i) s += (i ? ", " : "") + v[i];
  if (v.size() > limit) s += ", ... (" + std::to_string(v.size()) + " rows)";
  return s;
}

int cmd_simulate(const fs::path& scenario_path, const fs::path& out_dir) {
  const Scenario sc = load_scenario(scenario_path);
  const Trajectory traj = simulate(sc);
  const double cost = evaluate_cost(traj, sc.cost, sc.graph);
  const VolumeReport vol = total_volume_report(traj, sc.graph);

  Outputs out(out_dir);
  write_trajectory_csv(out.file("trajectory.csv"), traj, sc.graph, sc.commodities);
  write_flows_csv(out.file("flows.csv"), traj, sc.graph, sc.commodities);
  write_totals_csv(out.file("totals.csv"), total_volume_series(traj));
  write_volume_csv(out.file("summary.csv"), {{"volume", vol}});
  out.json("summary.json", Json{{"scenario", scenario_path.filename().string()},
                                {"steps", sc.steps},
                                {"step_hours", sc.step_hours},
                                {"cost", cost},
                                {"volume", volume_json(vol)}});
  out.commit();
  print_volumes("total volume by cell type", vol);
  std::cout << "cost " << fixed(cost, 4) << "\n";
  return kOk;
}

int cmd_optimize(const fs::path& scenario_path, const fs::path& out_dir, double tol,
                 const std::string& export_lp) {
  const Scenario sc = load_scenario(scenario_path);
  const RelaxationProblem problem = assemble_relaxation(sc, sc.cost);
  Outputs out(out_dir);
  if (!export_lp.empty()) {
    std::ostringstream lp;
    write_lp_text(problem.lp(), lp);
    out.extra(export_lp, lp.str());
  }

  const RelaxationSolution sol = solve_relaxation(problem, tol);
  const RecoveredControls ctl = recover_controls(sol.point, sc.fd, tol);
  const TightnessReport tr = verify_tightness(sc, sol.point, ctl.schedule, kDefaultTightnessTolerance);
  const Trajectory traj = simulate(sc, ctl.schedule);
  const Trajectory base = simulate(sc);
  const VolumeReport vol_opt = total_volume_report(traj, sc.graph);
  const VolumeReport vol_unc = total_volume_report(base, sc.graph);

  write_relaxation_csv(out.file("relaxation.csv"), sol.point, sc.graph, sc.commodities);
  write_totals_csv(out.file("totals.csv"), total_volume_series(traj));
  write_volume_csv(out.file("summary.csv"), {{"uncontrolled", vol_unc}, {"optimal", vol_opt}});
  out.json("controls.json", control_to_json(ctl.schedule, sc.graph, sc.commodities));
  Json t = tightness_to_json(tr);
  t["max_clamp"] = ctl.max_clamp;
  out.json("tightness.json", t);
  out.json("solution.json", Json{{"status", to_string(sol.status)},
                                 {"objective", sol.objective},
                                 {"iterations", sol.iterations},
                                 {"variables", problem.lp().num_variables()},
                                 {"rows", problem.lp().num_rows()},
                                 {"residuals", residuals_to_json(sol.residuals)},
                                 {"uncontrolled_cost", evaluate_cost(base, sc.cost, sc.graph)}});
  out.commit();

  print_volumes("total volume by cell type (optimal)", vol_opt);
  std::cout << "objective " << fixed(sol.objective, 4) << ", simulated " << fixed(tr.simulated_cost, 4)
            << ", max state deviation " << tr.max_state_deviation << ", min gamma " << tr.min_gamma << "\n";
  if (!tr.pass) {
    std::cerr << "tightness verification failed: " << tr.failure << "\n";
    return kNotTight;
  }
  std::cout << "tightness: pass\n";
  return kOk;
}

struct Run {
  std::string name;
  double cost{0.0};
  std::vector<double> totals;
  Json detail = Json::object();
};

int cmd_compare(const fs::path& scenario_path, const fs::path& out_dir, double tol,
                const std::string& control_only) {
  const Scenario sc = load_scenario(scenario_path);
  const std::size_t kc = sc.num_commodities();
  std::vector<bool> mask;
  if (kc > 1) mask = parse_commodity_mask(control_only.empty() ? sc.commodities.name(CommodityId{0}) : control_only,
                                          sc.commodities);

  std::vector<Run> runs;
  {
    const Trajectory base = simulate(sc);
    runs.push_back({"uncontrolled", evaluate_cost(base, sc.cost, sc.graph), total_volume_series(base)});
  }
  const OptimizationResult full = optimize(sc, sc.cost, tol);
  {
    const Trajectory traj = simulate(sc, full.controls.schedule);
    Run r{"optimal", evaluate_cost(traj, sc.cost, sc.graph), total_volume_series(traj)};
    r.detail = Json{{"lp_objective", full.solution.objective}, {"tight", full.tightness.pass}};
    runs.push_back(std::move(r));
  }
  if (kc > 1) {
    const PartialControlResult part = partial_control(sc, sc.cost, mask, full, tol);
    const Trajectory traj = simulate(sc, part.schedule);
    std::string label = "partial";
    for (std::size_t k = 0; k < kc; ++k) {
      if (mask[k]) label += "_" + sc.commodities.name(CommodityId{k});
    }
    Run r{label, evaluate_cost(traj, sc.cost, sc.graph), total_volume_series(traj)};
    Json cands = Json::array();
    for (const auto& c : part.evaluated) cands.push_back(Json{{"source", c.source}, {"blend", c.blend}, {"cost", c.cost}});
    r.detail = Json{{"source", part.source}, {"blend", part.blend}, {"candidates", cands}};
    if (!part.restricted_failure.empty()) r.detail["restricted_failure"] = part.restricted_failure;
    runs.push_back(std::move(r));

    const Scenario agg = aggregate_single_commodity(sc);
    const OptimizationResult single = optimize(agg, agg.cost, tol);
    const ControlSchedule broadcast = broadcast_controls(single.controls.schedule, kc);
    const Trajectory st = simulate(sc, broadcast);
    Run s{"single", evaluate_cost(st, sc.cost, sc.graph), total_volume_series(st)};
    s.detail = Json{{"aggregated_objective", single.solution.objective}, {"aggregated_tight", single.tightness.pass}};
    runs.push_back(std::move(s));
  }

  Outputs out(out_dir);
  for (const auto& r : runs) write_totals_csv(out.file("totals_" + r.name + ".csv"), r.totals);
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return runs[a].cost < runs[b].cost; });
  const double base = runs.front().cost;
  auto& csv = out.file("summary.csv");
  csv << "rank,run,cost,improvement_pct\n";
  Json summary = Json::array();
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Run& run = runs[order[r]];
    const double imp = base > 0.0 ? 100.0 * (1.0 - run.cost / base) : 0.0;
    csv << r + 1 << ',' << run.name << ',' << num(run.cost) << ',' << num(imp) << '\n';
    Json e{{"rank", r + 1}, {"run", run.name}, {"cost", run.cost}, {"improvement_pct", imp}};
    e.update(run.detail);
    summary.push_back(e);
    std::cout << r + 1 << ". " << run.name << "  " << fixed(run.cost, 2) << "  (" << fixed(imp, 2) << "%)\n";
  }
  out.json("summary.json", summary);
  out.commit();
  if (!full.tightness.pass) {
    std::cerr << "tightness verification failed: " << full.tightness.failure << "\n";
    return kNotTight;
  }
  return kOk;
}

int cmd_calibrate(const fs::path& roads_path, const fs::path& sensors_path, const fs::path& out_dir,
                  CalibrationSettings st) {
  const auto roads = load_road_csv(roads_path);
  const auto series = load_sensor_csv(sensors_path);
  const CalibrationResult res = calibrate(roads, series, st);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";

  const long step_s = std::lround(res.step_hours * 3600.0);
  Outputs out(out_dir);
  out.json("network.json", network_to_json(res.network));
  Json scenario{{"network", "network.json"}};
  if (std::abs(step_s - res.step_hours * 3600.0) < 1e-9) {
    scenario["step_seconds"] = step_s;
  } else {
    scenario["step_hours"] = res.step_hours;
  }
  scenario["steps"] = res.steps;
  scenario["inflow"] = res.inflow;
  scenario["initial"] = res.initial;
  scenario["cost"] = cost_to_json(CostSpec::ttt());
  out.json("scenario.json", scenario);
  Json warnings = Json::array();
  for (const auto& w : res.warnings) warnings.push_back(w);
  out.json("calibration.json", Json{{"cells", res.network.cells.size()},
                                    {"split_p", st.car_split},
                                    {"stable_bound_hours", res.stable_bound_hours},
                                    {"step_hours", res.step_hours},
                                    {"step_seconds", res.step_hours * 3600.0},
                                    {"steps", res.steps},
                                    {"start", format_iso8601(series.t0)},
                                    {"warnings", warnings}});
  // Validates the emitted files through the ordinary loader before writing.
  {
    Json net = network_to_json(res.network);
    NetworkConfig back = parse_network(net, "calibrated network");
    check_cfl(NetworkGraph(back.cells), back.fd, res.step_hours);
  }
  out.commit();
  std::cout << res.network.cells.size() << " cells, stability bound " << res.stable_bound_hours
            << " h, recommended h = " << res.step_hours << " h (" << fixed(res.step_hours * 3600.0, 0)
            << " s), " << res.steps << " steps\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-commodity freeway network control"};
  app.require_subcommand(1);

  std::string scenario, out_dir = "out", export_lp, control_only, roads, sensors;
  double tol = kDefaultSolveTolerance;
  CalibrationSettings cal;

  auto* sim = app.add_subcommand("simulate", "Run a scenario under its control schedule");
  sim->add_option("scenario", scenario, "Scenario JSON")->required();
  sim->add_option("--out", out_dir, "Output directory");

  auto* opt = app.add_subcommand("optimize", "Solve the relaxation, recover and verify controls");
  opt->add_option("scenario", scenario, "Scenario JSON")->required();
  opt->add_option("--out", out_dir, "Output directory");
  opt->add_option("--tol", tol, "LP/recovery tolerance")->check(CLI::PositiveNumber);
  opt->add_option("--export-lp", export_lp, "Also write the LP in text form to this path");

  auto* cmp = app.add_subcommand("compare", "Uncontrolled, optimal, partial and single-commodity control");
  cmp->add_option("scenario", scenario, "Scenario JSON")->required();
  cmp->add_option("--out", out_dir, "Output directory");
  cmp->add_option("--tol", tol, "LP/recovery tolerance")->check(CLI::PositiveNumber);
  cmp->add_option("--control-only", control_only, "Commodities controlled in the partial run (comma separated)");

  auto* calc = app.add_subcommand("calibrate", "Build a network and scenario from roads and sensor flows");
  calc->add_option("roads", roads, "Road list CSV")->required();
  calc->add_option("sensors", sensors, "Sensor CSV")->required();
  calc->add_option("--out", out_dir, "Output directory");
  calc->add_option("--split-p", cal.car_split, "Share of the first commodity in the supply calibration")
      ->check(CLI::Range(0.0, 1.0));
  calc->add_option("--cell-length", cal.cell_length_mi, "Mainline cell length, miles")->check(CLI::PositiveNumber);
  calc->add_option("--horizon", cal.horizon_hours, "Horizon, hours")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*sim) return cmd_simulate(scenario, out_dir);
    if (*opt) return cmd_optimize(scenario, out_dir, tol, export_lp);
    if (*cmp) return cmd_compare(scenario, out_dir, tol, control_only);
    if (*calc) return cmd_calibrate(roads, sensors, out_dir, cal);
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const InfeasibleRelaxation& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    if (!e.violated_rows().empty()) std::cerr << "  violated rows: " << join(e.violated_rows(), 10) << "\n";
    return kInfeasible;
  } catch (const RuntimeFailure& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kRuntime;
  }
  return kInvalid;
}
