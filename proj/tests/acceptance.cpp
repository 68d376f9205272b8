// Acceptance checks. Prints one PASS/FAIL line per criterion; with a number
// as argument runs only that criterion. Exit status is nonzero if any
// selected criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcfnc/calibration.hpp"
#include "mcfnc/config.hpp"
#include "mcfnc/relaxation.hpp"
#include "mcfnc/simulator.hpp"

using namespace mcfnc;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MCFNC_SOURCE_DIR;
const fs::path kBinary = MCFNC_BINARY;

// Tolerances.
constexpr double kStateTol = 1e-6;       // tightness: max state deviation (absolute)
constexpr double kGammaTol = 1e-6;       // tightness: 1 - min gamma
constexpr double kCostRelTol = 1e-6;     // LP objective vs simulated cost
constexpr double kGridTol = 1e-6;        // LP and recovered cost vs grid minimum, relative
constexpr double kMassRelTol = 1e-9;     // mass balance
constexpr double kFifoRelTol = 1e-12;    // common gamma and split ratios
constexpr double kInstanceSeconds = 10.0;
constexpr double kExample2Seconds = 60.0;
constexpr double kPemsSeconds = 300.0;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

const char* kNames[] = {"car", "truck", "bus"};

// Random small network: one or two onramps merging into a mainline chain that
// ends in one offramp or a diverge into two. 2 to 6 cells, 1 to 3 commodities.
Scenario random_scenario(std::mt19937& rng) {
  std::uniform_int_distribution<int> cells_d(2, 6), comm_d(1, 3), steps_d(10, 50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = cells_d(rng);
  const int kc = comm_d(rng);
  int on = 1, off = 1;
  if (n >= 4 && u(rng) < 0.5) on = 2;
  if (n - on - 1 >= 2 && u(rng) < 0.5) off = 2;
  const int mainline = n == 2 ? 0 : n - on - off;

  std::vector<CellSpec> specs;
  for (int r = 0; r < on; ++r) specs.push_back({"r" + std::to_string(r), "", "n0", 0.5, 1.0, true, false, 1.0});
  for (int m = 0; m < mainline; ++m) {
    specs.push_back({"m" + std::to_string(m), "n" + std::to_string(m), "n" + std::to_string(m + 1), 0.5, 1.0,
                     false, false, 1.0});
  }
  const std::string last = "n" + std::to_string(mainline);
  for (int s = 0; s < off; ++s) specs.push_back({"s" + std::to_string(s), last, "", 0.5, 1.0, false, true, 1.0});
  const NetworkGraph g(specs);

  std::vector<std::string> names(kNames, kNames + kc);
  const CommoditySet ks(names);
  std::vector<double> weights;
  for (int k = 0; k < kc; ++k) weights.push_back(0.002 + 0.006 * u(rng));

  FundamentalDiagram fd(g.num_cells(), kc);
  for (std::size_t i = 0; i < g.num_cells(); ++i) {
    for (int k = 0; k < kc; ++k) {
      const double slope = 60.0 + 120.0 * u(rng);
      if (u(rng) < 0.5) {
        fd.demand(CellId{i}, CommodityId{std::size_t(k)}) = DemandFunction::linear(slope);
      } else {
        fd.demand(CellId{i}, CommodityId{std::size_t(k)}) =
            DemandFunction({{slope, 0.0}, {0.0, 800.0 + 1500.0 * u(rng)}});
      }
    }
    if (g.cells()[i].is_onramp || (g.cells()[i].is_offramp && u(rng) < 0.5)) {
      fd.supply(CellId{i}) = SupplyFunction::unbounded(weights);
    } else {
      const double rate = 3000.0 + 4000.0 * u(rng);
      const double jam = 0.3 + 0.3 * u(rng);
      fd.supply(CellId{i}) = SupplyFunction({{-rate, rate * jam}, {0.0, 600.0 + 2000.0 * u(rng)}}, weights);
    }
  }

  RoutingSchedule rs(kc);
  for (int k = 0; k < kc; ++k) {
    const CommodityId kid{std::size_t(k)};
    const CellId first = mainline > 0 ? g.cell_id("m0") : g.cell_id("s0");
    for (int r = 0; r < on; ++r) rs.set(0, kid, g.cell_id("r" + std::to_string(r)), first, 1.0);
    for (int m = 0; m + 1 < mainline; ++m) {
      rs.set(0, kid, g.cell_id("m" + std::to_string(m)), g.cell_id("m" + std::to_string(m + 1)), 1.0);
    }
    if (mainline > 0) {
      const CellId tail = g.cell_id("m" + std::to_string(mainline - 1));
      if (off == 2) {
        const double p = u(rng);
        rs.set(0, kid, tail, g.cell_id("s0"), p);
        rs.set(0, kid, tail, g.cell_id("s1"), 1.0 - p);
      } else {
        rs.set(0, kid, tail, g.cell_id("s0"), 1.0);
      }
    }
  }
  const RoutingTable table(rs, g);

  const std::size_t steps = steps_d(rng);
  const std::size_t cells = g.num_cells();
  InflowProfile inflow = InflowProfile::zero(steps, cells, kc);
  const std::size_t stop = steps / 3 + static_cast<std::size_t>(u(rng) * steps / 2);
  for (int r = 0; r < on; ++r) {
    const CellId id = g.cell_id("r" + std::to_string(r));
    for (int k = 0; k < kc; ++k) {
      const double rate = 3000.0 * u(rng) / kc;
      for (std::size_t t = 0; t < stop; ++t) inflow.rate[t](id.index, k) = rate;
    }
  }
  CommodityState initial(cells, kc);
  for (std::size_t i = 0; i < cells; ++i) {
    for (int k = 0; k < kc; ++k) initial(i, k) = 30.0 * u(rng) / kc;
  }
  Scenario sc{g, ks, fd, table, std::move(inflow), ControlSchedule::uniform(steps, cells, kc), std::move(initial),
              5.0 / 3600.0, steps, CostSpec::ttt()};
  sc.validate();
  return sc;
}

ControlSchedule random_controls(const Scenario& sc, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto c = ControlSchedule::uniform(sc.steps, sc.num_cells(), sc.num_commodities());
  for (auto& a : c.alpha) {
    for (std::size_t i = 0; i < sc.num_cells(); ++i) {
      for (std::size_t k = 0; k < sc.num_commodities(); ++k) a(i, k) = u(rng);
    }
  }
  return c;
}

Scenario load_example2(const std::string& name) { return load_scenario(kSource / "scenarios/example2" / name); }

// ---------------------------------------------------------------- 1

struct TightnessCheck {
  bool ok{false};
  double state_dev{0.0}, gamma{1.0}, cost_rel{0.0}, seconds{0.0};
  std::string failure;
};

TightnessCheck round_trip(const Scenario& sc) {
  TightnessCheck c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto res = optimize(sc, CostSpec::ttt());
    const double obj = res.solution.objective;
    c.state_dev = res.tightness.max_state_deviation;
    c.gamma = res.tightness.min_gamma;
    c.cost_rel = std::abs(res.tightness.simulated_cost - obj) / std::max(1.0, std::abs(obj));
    c.ok = c.state_dev <= kStateTol && c.gamma >= 1.0 - kGammaTol && c.cost_rel <= kCostRelTol;
    if (!c.ok) c.failure = res.tightness.failure;
  } catch (const std::exception& e) {
    c.failure = e.what();
  }
  c.seconds = seconds_since(t0);
  c.ok = c.ok && c.seconds <= kInstanceSeconds;
  return c;
}

Outcome criterion1() {
  std::mt19937 rng(1);
  int passed = 0, total = 0;
  double worst_dev = 0.0, worst_gamma = 1.0, worst_cost = 0.0, slowest = 0.0;
  std::string first_failure;
  auto record = [&](const std::string& label, const TightnessCheck& c) {
    ++total;
    passed += c.ok;
    worst_dev = std::max(worst_dev, c.state_dev);
    worst_gamma = std::min(worst_gamma, c.gamma);
    worst_cost = std::max(worst_cost, c.cost_rel);
    slowest = std::max(slowest, c.seconds);
    if (!c.ok && first_failure.empty()) first_failure = label + ": " + c.failure;
  };
  for (int trial = 0; trial < 25; ++trial) record("random " + std::to_string(trial), round_trip(random_scenario(rng)));
  record("example 2", round_trip(load_example2("uncontrolled.json")));
  std::string d = std::to_string(passed) + "/" + std::to_string(total) + " instances, max state dev " +
                  fmt(worst_dev, 3) + ", min gamma " + fmt(worst_gamma, 12) + ", max cost rel " + fmt(worst_cost, 3) +
                  ", slowest " + fmt(slowest, 3) + " s";
  if (!first_failure.empty()) d += "; " + first_failure;
  return {passed == total, d};
}

// ---------------------------------------------------------------- 2

// Onramp -> mainline -> offramp, one commodity, a capacity drop at the exit.
Scenario three_cell(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<CellSpec> specs{{"r", "", "n0", 0.5, 1.0, true, false, 1.0},
                                    {"m", "n0", "n1", 0.5, 1.0, false, false, 1.0},
                                    {"s", "n1", "", 0.5, 1.0, false, true, 1.0}};
  const NetworkGraph g(specs);
  const CommoditySet ks(std::vector<std::string>{"car"});
  FundamentalDiagram fd(3, 1);
  for (std::size_t i = 0; i < 3; ++i) fd.demand(CellId{i}, CommodityId{0}) = DemandFunction::linear(120.0);
  const std::vector<double> w{0.003};
  fd.supply(CellId{0}) = SupplyFunction::unbounded(w);
  fd.supply(CellId{1}) = SupplyFunction({{-6000.0, 6000.0 * 0.5}, {0.0, 2000.0 + 600.0 * u(rng)}}, w);
  fd.supply(CellId{2}) = SupplyFunction({{-6000.0, 6000.0 * (0.15 + 0.2 * u(rng))}}, w);
  RoutingSchedule rs(1);
  rs.set(0, CommodityId{0}, g.cell_id("r"), g.cell_id("m"), 1.0);
  rs.set(0, CommodityId{0}, g.cell_id("m"), g.cell_id("s"), 1.0);
  const std::size_t steps = 24;
  InflowProfile inflow = InflowProfile::zero(steps, 3, 1);
  const double rate = 1500.0 + 1500.0 * u(rng);
  for (std::size_t t = 0; t < steps / 2; ++t) inflow.rate[t](0, 0) = rate;
  CommodityState initial(3, 1);
  initial(1, 0) = 20.0 * u(rng);
  initial(2, 0) = 40.0 * u(rng);
  Scenario sc{g, ks, fd, RoutingTable(rs, g), std::move(inflow), ControlSchedule::uniform(steps, 3, 1),
              std::move(initial), 5.0 / 3600.0, steps, CostSpec::ttt()};
  sc.validate();
  return sc;
}

Outcome criterion2() {
  std::mt19937 rng(2);
  const double levels[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  bool ok = true;
  std::string d;
  for (int trial = 0; trial < 3; ++trial) {
    const Scenario sc = three_cell(rng);
    const std::size_t half = sc.steps / 2;
    double grid_min = kInf;
    auto u = ControlSchedule::uniform(sc.steps, 3, 1);
    // Six digits base 5: (cell, block) pairs.
    for (int code = 0; code < 15625; ++code) {
      int c = code;
      double a[3][2];
      for (int i = 0; i < 3; ++i) {
        for (int b = 0; b < 2; ++b) {
          a[i][b] = levels[c % 5];
          c /= 5;
        }
      }
      for (std::size_t t = 0; t < sc.steps; ++t) {
        for (int i = 0; i < 3; ++i) u.alpha[t](i, 0) = a[i][t < half ? 0 : 1];
      }
      grid_min = std::min(grid_min, evaluate_cost(simulate(sc, u), CostSpec::ttt(), sc.graph));
    }
    const auto res = optimize(sc, CostSpec::ttt());
    const double recovered = evaluate_cost(simulate(sc, res.controls.schedule), CostSpec::ttt(), sc.graph);
    const double slack = kGridTol * std::max(1.0, grid_min);
    const bool good = res.solution.objective <= grid_min + slack && recovered <= grid_min + slack;
    ok = ok && good;
    d += (trial ? "; " : "") + std::string("grid ") + fmt(grid_min, 10) + " lp " + fmt(res.solution.objective, 10) +
         " recovered " + fmt(recovered, 10);
  }
  return {ok, d};
}

// ---------------------------------------------------------------- 3

struct Conservation {
  double worst_mass{0.0};
  double min_state{kInf};
  long trajectories{0};

  void observe(const Scenario& sc, const Trajectory& tr) {
    ++trajectories;
    const auto& g = sc.graph;
    const std::size_t n = sc.num_cells(), kc = sc.num_commodities();
    for (std::size_t t = 0; t <= tr.steps(); ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < kc; ++k) min_state = std::min(min_state, tr.states[t](i, k));
      }
    }
    for (std::size_t t = 0; t < tr.steps(); ++t) {
      const auto& fl = tr.flows[t];
      for (std::size_t i = 0; i < n; ++i) {
        const CellId id{i};
        for (std::size_t k = 0; k < kc; ++k) {
          double in = 0.0, out_pairs = 0.0;
          for (std::size_t p : g.in_pairs(id)) in += fl.flow(p, k, kc);
          for (std::size_t p : g.out_pairs(id)) out_pairs += fl.flow(p, k, kc);
          const double lambda = sc.inflow.rate[t](i, k);
          const double z = fl.outflow(i, k);
          const double x0 = tr.states[t](i, k), x1 = tr.states[t + 1](i, k);
          const double expect = x0 + sc.step_hours * (lambda + in - z);
          const double scale = std::max(1.0, std::abs(x0) + std::abs(x1) + sc.step_hours * (lambda + in + z));
          worst_mass = std::max(worst_mass, std::abs(x1 - expect) / scale);
          // Everything leaving a non-offramp cell arrives somewhere.
          if (!g.is_offramp(id)) worst_mass = std::max(worst_mass, std::abs(out_pairs - z) / std::max(1.0, z));
        }
      }
    }
  }
};

// Onramp -> u, which diverges into mainline cells a and b (bounded, preloaded),
// each ending in an offramp.
Scenario diverge(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> comm_d(1, 3);
  const int kc = comm_d(rng);
  const std::vector<CellSpec> specs{{"r", "", "n0", 0.5, 1.0, true, false, 1.0},
                                    {"u", "n0", "n1", 0.5, 1.0, false, false, 1.0},
                                    {"a", "n1", "na", 0.5, 1.0, false, false, 1.0},
                                    {"b", "n1", "nb", 0.5, 1.0, false, false, 1.0},
                                    {"sa", "na", "", 0.5, 1.0, false, true, 1.0},
                                    {"sb", "nb", "", 0.5, 1.0, false, true, 1.0}};
  const NetworkGraph g(specs);
  std::vector<std::string> names(kNames, kNames + kc);
  const CommoditySet ks(names);
  std::vector<double> w;
  for (int k = 0; k < kc; ++k) w.push_back(0.002 + 0.006 * u(rng));
  FundamentalDiagram fd(6, kc);
  for (std::size_t i = 0; i < 6; ++i) {
    for (int k = 0; k < kc; ++k) {
      fd.demand(CellId{i}, CommodityId{std::size_t(k)}) =
          DemandFunction({{80.0 + 100.0 * u(rng), 0.0}, {0.0, 1500.0 + 1500.0 * u(rng)}});
    }
    fd.supply(CellId{i}) = SupplyFunction::unbounded(w);
  }
  for (const char* c : {"a", "b"}) {
    const double rate = 3000.0 + 3000.0 * u(rng);
    fd.supply(g.cell_id(c)) = SupplyFunction({{-rate, rate * 0.4}, {0.0, 1200.0 + 1000.0 * u(rng)}}, w);
  }
  RoutingSchedule rs(kc);
  for (int k = 0; k < kc; ++k) {
    const CommodityId kid{std::size_t(k)};
    const double p = u(rng);
    rs.set(0, kid, g.cell_id("r"), g.cell_id("u"), 1.0);
    rs.set(0, kid, g.cell_id("u"), g.cell_id("a"), p);
    rs.set(0, kid, g.cell_id("u"), g.cell_id("b"), 1.0 - p);
    rs.set(0, kid, g.cell_id("a"), g.cell_id("sa"), 1.0);
    rs.set(0, kid, g.cell_id("b"), g.cell_id("sb"), 1.0);
  }
  const std::size_t steps = 20;
  InflowProfile inflow = InflowProfile::zero(steps, 6, kc);
  for (std::size_t t = 0; t < steps; ++t) {
    for (int k = 0; k < kc; ++k) inflow.rate[t](0, k) = 2500.0 / kc;
  }
  CommodityState initial(6, kc);
  // Weighted volumes near jam on a and b; u heavily loaded.
  for (int k = 0; k < kc; ++k) {
    initial(1, k) = (20.0 + 40.0 * u(rng)) / kc;
    initial(2, k) = (0.25 + 0.14 * u(rng)) / w[k] / kc;
    initial(3, k) = (0.25 + 0.14 * u(rng)) / w[k] / kc;
  }
  Scenario sc{g, ks, fd, RoutingTable(rs, g), std::move(inflow), ControlSchedule::uniform(steps, 6, kc),
              std::move(initial), 5.0 / 3600.0, steps, CostSpec::ttt()};
  sc.validate();
  return sc;
}

Outcome criterion3() {
  Conservation c;
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Scenario sc = random_scenario(rng);
    c.observe(sc, simulate(sc));
    c.observe(sc, simulate(sc, random_controls(sc, rng)));
    const auto res = optimize(sc, CostSpec::ttt());
    c.observe(sc, simulate(sc, res.controls.schedule));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Scenario sc = diverge(rng);
    c.observe(sc, simulate(sc));
    c.observe(sc, simulate(sc, random_controls(sc, rng)));
  }
  for (const char* name : {"uncontrolled.json", "heuristic.json"}) {
    const Scenario sc = load_example2(name);
    c.observe(sc, simulate(sc));
  }
  const bool ok = c.worst_mass <= kMassRelTol && c.min_state >= 0.0;
  return {ok, std::to_string(c.trajectories) + " trajectories, max mass-balance rel " + fmt(c.worst_mass, 3) +
                  ", min state " + fmt(c.min_state, 6)};
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, min_gamma = 1.0;
  int congested = 0, cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Scenario sc = diverge(rng);
    const std::size_t kc = sc.num_commodities();
    const auto& g = sc.graph;
    const CellId cu = g.cell_id("u");
    const DynamicsView dyn{g, sc.fd, sc.routing};
    CellCommodityArray alpha(6, kc);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t k = 0; k < kc; ++k) alpha(i, k) = trial % 2 ? 0.3 + 0.7 * u(rng) : 1.0;
    }
    const StepResult res = step(dyn, sc.initial, sc.inflow.rate[0], alpha, 0, sc.step_hours);
    ++cases;

    // Oracle: gamma = min(1, s_j / D_j) over the two receiving cells, with
    // only u sending into a and b.
    double oracle = 1.0;
    for (const char* c : {"a", "b"}) {
      const CellId j = g.cell_id(c);
      const std::size_t p = *g.pair_index(cu, j);
      double demand = 0.0, weighted = 0.0;
      for (std::size_t k = 0; k < kc; ++k) {
        demand += sc.routing.ratio(0, CommodityId{k}, p) * alpha(cu.index, k) *
                  sc.fd.demand(cu, CommodityId{k})(sc.initial(cu.index, k));
        weighted += sc.fd.supply(j).weights()[k] * sc.initial(j.index, k);
      }
      if (demand > 0.0) oracle = std::min(oracle, sc.fd.supply(j)(weighted) / demand);
    }
    const double gamma = res.flows.gamma[cu.index];
    worst = std::max(worst, std::abs(gamma - oracle) / std::max(oracle, 1e-300));
    min_gamma = std::min(min_gamma, gamma);
    congested += gamma < 1.0 - 1e-9;

    for (std::size_t k = 0; k < kc; ++k) {
      const double d = alpha(cu.index, k) * sc.fd.demand(cu, CommodityId{k})(sc.initial(cu.index, k));
      const double z = res.flows.outflow(cu.index, k);
      worst = std::max(worst, std::abs(z - gamma * d) / std::max(gamma * d, 1e-300));
      for (std::size_t p : g.out_pairs(cu)) {
        const double r = sc.routing.ratio(0, CommodityId{k}, p);
        const double f = res.flows.flow(p, k, kc);
        worst = std::max(worst, std::abs(f - r * z) / std::max(r * z, 1e-300));
      }
    }
  }
  const bool ok = worst <= kFifoRelTol && congested >= cases / 2;
  return {ok, std::to_string(cases) + " diverge states, " + std::to_string(congested) +
                  " congested, min gamma " + fmt(min_gamma, 4) + ", max rel deviation " + fmt(worst, 3)};
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario unc = load_example2("uncontrolled.json");
  const Scenario heu = load_example2("heuristic.json");
  const double c_unc = evaluate_cost(simulate(unc), unc.cost, unc.graph);
  const double c_heu = evaluate_cost(simulate(heu), heu.cost, heu.graph);
  const auto res = optimize(unc, unc.cost);
  const double c_opt = evaluate_cost(simulate(unc, res.controls.schedule), unc.cost, unc.graph);
  const double secs = seconds_since(t0);
  const double imp_heu = 100.0 * (1.0 - c_heu / c_unc);
  const double imp_opt = 100.0 * (1.0 - c_opt / c_unc);
  const bool order = c_opt < c_heu && c_heu < c_unc;
  const bool band_heu = imp_heu >= 3.0 && imp_heu <= 10.0;
  const bool band_opt = imp_opt >= 30.0 && imp_opt <= 50.0;
  const bool ok = order && band_heu && band_opt && res.tightness.pass && secs <= kExample2Seconds;
  std::string d = "uncontrolled " + fmt(c_unc, 8) + ", heuristic " + fmt(c_heu, 8) + " (" + fmt(imp_heu, 3) +
                  "%), optimal " + fmt(c_opt, 8) + " (" + fmt(imp_opt, 3) + "%), ordering " +
                  (order ? "ok" : "wrong") + ", heuristic band [3,10] " + (band_heu ? "ok" : "missed") +
                  ", optimal band [30,50] " + (band_opt ? "ok" : "missed") + ", tight " +
                  (res.tightness.pass ? "yes" : "no") + ", " + fmt(secs, 3) + " s";
  return {ok, d};
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
  const fs::path scenario = kSource / "scenarios/pems_synthetic/scenario.json";
  const Json sc = read_json_file(scenario);
  const bool shape = sc["steps"].get<int>() == 200 && sc["step_seconds"].get<double>() == 72.0;
  const fs::path out = fs::temp_directory_path() / "mcfnc_acceptance_pems";
  fs::remove_all(out);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cmd = kBinary.string() + " compare " + scenario.string() + " --control-only car --out " +
                          out.string() + " > " + (fs::temp_directory_path() / "mcfnc_acceptance_pems.log").string() +
                          " 2>&1";
  const int status = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    return {false, "compare exited with status " + std::to_string(WEXITSTATUS(status))};
  }
  double unc = -1, opt = -1, part = -1, single = -1;
  for (const auto& e : read_json_file(out / "summary.json")) {
    const std::string run = e["run"];
    const double c = e["cost"];
    if (run == "uncontrolled") unc = c;
    if (run == "optimal") opt = c;
    if (run == "partial_car") part = c;
    if (run == "single") single = c;
  }
  fs::remove_all(out);
  const bool order = opt >= 0 && part >= 0 && unc >= 0 && single >= 0 && opt <= part && part <= unc;
  const bool single_ok = single >= opt;
  const bool ok = shape && order && single_ok && secs <= kPemsSeconds;
  return {ok, "uncontrolled " + fmt(unc, 9) + ", partial(car) " + fmt(part, 9) + ", optimal " + fmt(opt, 9) +
                  ", single->multi " + fmt(single, 9) + ", N=200 h=72 s " + (shape ? "yes" : "no") + ", " +
                  fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 7

Outcome criterion7() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int feasible = 0, total = 0;
  while (total < 100) {
    const Scenario sc = random_scenario(rng);
    const auto problem = assemble_relaxation(sc, CostSpec::ttt());
    const auto opt = solve_relaxation(problem).point;
    const auto sim_a = point_from_trajectory(simulate(sc, random_controls(sc, rng)));
    const auto sim_b = point_from_trajectory(simulate(sc, random_controls(sc, rng)));
    const std::pair<const RelaxationPoint*, const RelaxationPoint*> pairs[] = {
        {&opt, &sim_a}, {&sim_a, &sim_b}, {&opt, &sim_b}, {&sim_b, &opt}, {&sim_a, &opt}};
    for (const auto& [a, b] : pairs) {
      if (total == 100) break;
      ++total;
      feasible += convexity_probe(*a, *b, u(rng), problem, 1e-7);
    }
  }
  return {feasible == total, std::to_string(feasible) + "/" + std::to_string(total) + " convex combinations feasible"};
}

// ---------------------------------------------------------------- 8

Outcome criterion8() {
  bool ok = true;
  std::string d;
  // Two-mile mainline cells at 60/40 mph and half-mile ramps at 20 mph.
  const std::vector<RoadSpec> roads{{"a", "I-1", 0.0, 4.0, "", "", 6.0}};
  std::istringstream csv(
      "timestamp,cell_id,commodity,flow_vph\n"
      "2012-02-08T06:00,a_1,car,3000\n2012-02-08T06:00,a_1,truck,120\n"
      "2012-02-08T06:00,a_2,car,2800\n2012-02-08T06:00,a_2,truck,100\n"
      "2012-02-08T06:00,a_1_on,car,1200\n2012-02-08T06:00,a_1_off,car,300\n");
  const auto series = parse_sensor_csv(csv, "ramps.csv");
  const auto res = calibrate(roads, series, CalibrationSettings{});
  const NetworkGraph g(res.network.cells);
  const auto& fd = res.network.fd;
  const double car = fd.demand(g.cell_id("a_1"), CommodityId{0}).free_flow_slope();
  const double truck = fd.demand(g.cell_id("a_1"), CommodityId{1}).free_flow_slope();
  const double on_car = fd.demand(g.cell_id("a_1_on"), CommodityId{0}).free_flow_slope();
  const double on_truck = fd.demand(g.cell_id("a_1_on"), CommodityId{1}).free_flow_slope();
  const double off_car = fd.demand(g.cell_id("a_2_off"), CommodityId{0}).free_flow_slope();
  const bool constants = res.step_hours == 0.02 && car == 30.0 && truck == 20.0 && on_car == 40.0 &&
                         on_truck == 40.0 && off_car == 40.0;
  ok = ok && constants;
  d += "h " + fmt(res.step_hours) + " (" + fmt(res.step_hours * 3600.0) + " s), mainline slopes " + fmt(car) + "/" +
       fmt(truck) + ", ramp slopes " + fmt(on_car) + "/" + fmt(on_truck) + "/" + fmt(off_car);

  // Routing is invariant under scaling every series by one positive factor.
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto net = segment_roads({{"p", "I-2", 0.0, 7.0, "", "x", 6.0},
                                  {"q", "I-3", 0.0, 5.0, "x", "", 6.0},
                                  {"r", "I-4", 0.0, 3.0, "x", "", 6.0}},
                                 2.0, 0.5);
  const NetworkGraph gn(net.cells);
  const auto support = routing_support(gn);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double scale = std::exp(6.0 * u(rng) - 3.0);
    std::ostringstream a, b;
    a << "timestamp,cell_id,commodity,flow_vph\n";
    b << "timestamp,cell_id,commodity,flow_vph\n";
    for (const auto& c : gn.cells()) {
      for (int m = 0; m < 6; ++m) {
        const double v = 2000.0 * u(rng);
        char stamp[32];
        std::snprintf(stamp, sizeof stamp, "2012-02-08T%02d:%02d", 6 + m / 12, (m % 12) * 5);
        a << stamp << ',' << c.id << ",car," << fmt(v, 17) << '\n';
        b << stamp << ',' << c.id << ",car," << fmt(v * scale, 17) << '\n';
      }
    }
    std::istringstream ia(a.str()), ib(b.str());
    const auto ea = estimate_routing(gn, support, parse_sensor_csv(ia, "a"), "car");
    const auto eb = estimate_routing(gn, support, parse_sensor_csv(ib, "b"), "car");
    if (ea.entries.size() != eb.entries.size()) {
      worst = kInf;
      break;
    }
    for (std::size_t e = 0; e < ea.entries.size(); ++e) {
      worst = std::max(worst, std::abs(ea.entries[e].ratio - eb.entries[e].ratio));
    }
  }
  const bool invariant = worst <= 1e-12;
  ok = ok && invariant;
  d += ", routing scale invariance max diff " + fmt(worst, 3) + " over 50 series";
  return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tightness round-trip", criterion1},
      {"relaxation lower bound vs alpha grid", criterion2},
      {"conservation and nonnegativity", criterion3},
      {"FIFO proportionality", criterion4},
      {"Example 2 ordering and bands", criterion5},
      {"synthetic PeMS compare", criterion6},
      {"convexity witness", criterion7},
      {"calibration constants", criterion8},
  };
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) selected.push_back(std::atoi(argv[a]));
  if (selected.empty()) {
    for (int c = 1; c <= static_cast<int>(criteria.size()); ++c) selected.push_back(c);
  }
  bool all = true;
  for (int c : selected) {
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << c << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = criteria[c - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c << " " << criteria[c - 1].first << ": " << o.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
