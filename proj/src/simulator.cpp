#include "mcfnc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mcfnc {

namespace {

CellCommodityArray controlled_demand(const DynamicsView& dyn, const CommodityState& state,
                                     const CellCommodityArray& alpha) {
  const std::size_t n = dyn.graph.num_cells();
  const std::size_t kc = dyn.fd.commodities();
  CellCommodityArray dem(n, kc);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kc; ++k) {
      dem(i, k) = demand(dyn.fd.demand(CellId{i}, CommodityId{k}), state(i, k), alpha(i, k));
    }
  }
  return dem;
}

// D_j: controlled demand directed into each cell by all its upstream cells.
std::vector<double> directed_demand(const DynamicsView& dyn, const CellCommodityArray& dem,
                                    std::size_t t) {
  const auto& pairs = dyn.graph.adjacency();
  const std::size_t kc = dyn.fd.commodities();
  const std::size_t seg = dyn.routing.segment_at(t);
  std::vector<double> into(dyn.graph.num_cells(), 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    for (std::size_t k = 0; k < kc; ++k) {
      into[j.index] += dyn.routing.ratio_in_segment(seg, CommodityId{k}, p) * dem(i.index, k);
    }
  }
  return into;
}

double gamma_of(const DynamicsView& dyn, const CommodityState& state,
                const std::vector<double>& into, std::size_t seg, CellId cell, SupplyMode mode) {
  if (dyn.graph.is_offramp(cell)) return 1.0;
  const auto& pairs = dyn.graph.adjacency();
  const std::size_t kc = dyn.fd.commodities();
  double gamma = 1.0;
  for (std::size_t p : dyn.graph.out_pairs(cell)) {
    bool routed = false;
    for (std::size_t k = 0; k < kc && !routed; ++k) {
      routed = dyn.routing.ratio_in_segment(seg, CommodityId{k}, p) > 0.0;
    }
    if (!routed) continue;
    const CellId j = pairs[p].second;
    const double incoming = into[j.index];
    if (incoming <= 0.0) continue;
    const auto& s = dyn.fd.supply(j);
    if (s.is_unbounded()) continue;
    const double avail = supply(s, weighted_volume(s.weights(), state, j), mode);
    if (avail < 0.0) {
      throw RuntimeFailure("negative supply " + std::to_string(avail) + " at cell '" +
                           dyn.graph.cell(j).id + "' (volume above jam)");
    }
    gamma = std::min(gamma, avail / incoming);
  }
  return std::clamp(gamma, 0.0, 1.0);
}

}  // namespace

double gamma_fifo(const DynamicsView& dyn, const CommodityState& state,
                  const CellCommodityArray& alpha, std::size_t t, CellId cell, SupplyMode mode) {
  if (cell.index >= dyn.graph.num_cells()) throw ModelError("unknown cell index");
  const auto dem = controlled_demand(dyn, state, alpha);
  return gamma_of(dyn, state, directed_demand(dyn, dem, t), dyn.routing.segment_at(t), cell,
                  mode);
}

std::vector<double> gamma_all(const DynamicsView& dyn, const CommodityState& state,
                              const CellCommodityArray& alpha, std::size_t t, SupplyMode mode) {
  const auto dem = controlled_demand(dyn, state, alpha);
  const auto into = directed_demand(dyn, dem, t);
  const std::size_t seg = dyn.routing.segment_at(t);
  std::vector<double> gammas(dyn.graph.num_cells());
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    gammas[i] = gamma_of(dyn, state, into, seg, CellId{i}, mode);
  }
  return gammas;
}

StepResult step(const DynamicsView& dyn, const CommodityState& state,
                const CellCommodityArray& inflow, const CellCommodityArray& alpha, std::size_t t,
                double step_hours) {
  const std::size_t n = dyn.graph.num_cells();
  const std::size_t kc = dyn.fd.commodities();
  if (state.cells() != n || state.commodities() != kc || inflow.cells() != n ||
      inflow.commodities() != kc || alpha.cells() != n || alpha.commodities() != kc) {
    throw ModelError("state/inflow/control dimensions do not match the network");
  }
  if (dyn.routing.num_pairs() != dyn.graph.adjacency().size() ||
      dyn.routing.commodities() != kc) {
    throw ModelError("routing dimensions do not match the network");
  }
  check_cfl(dyn.graph, dyn.fd, step_hours);

  const auto dem = controlled_demand(dyn, state, alpha);
  const auto into = directed_demand(dyn, dem, t);
  const std::size_t seg = dyn.routing.segment_at(t);
  const auto& pairs = dyn.graph.adjacency();

  StepResult out;
  auto& rec = out.flows;
  rec.gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rec.gamma[i] = gamma_of(dyn, state, into, seg, CellId{i}, SupplyMode::truncated);
  }

  rec.pair_flow.assign(pairs.size() * kc, 0.0);
  rec.outflow = CellCommodityArray(n, kc);
  CellCommodityArray received(n, kc);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    for (std::size_t k = 0; k < kc; ++k) {
      const double f =
          rec.gamma[i.index] * dyn.routing.ratio_in_segment(seg, CommodityId{k}, p) *
          dem(i.index, k);
      rec.pair_flow[p * kc + k] = f;
      received(j.index, k) += f;
      if (!dyn.graph.is_offramp(i)) rec.outflow(i.index, k) += f;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!dyn.graph.cells()[i].is_offramp) continue;
    for (std::size_t k = 0; k < kc; ++k) rec.outflow(i, k) = dem(i, k);
  }

  out.next = CommodityState(n, kc);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kc; ++k) {
      double x = state(i, k) + step_hours * (inflow(i, k) + received(i, k) - rec.outflow(i, k));
      if (x < 0.0) {
        // Rounding residue when a cell drains exactly at h = L / v_ff.
        if (x < -1e-9 * std::max(1.0, state(i, k))) {
          throw RuntimeFailure("negative volume " + std::to_string(x) + " in cell '" +
                               dyn.graph.cells()[i].id + "'");
        }
        x = 0.0;
      }
      out.next(i, k) = x;
    }
  }
  return out;
}

Trajectory simulate(const Scenario& scenario) { return simulate(scenario, scenario.control); }

Trajectory simulate(const Scenario& scenario, const ControlSchedule& control) {
  if (control.steps() != scenario.steps) {
    throw ModelError("control schedule covers " + std::to_string(control.steps()) +
                     " steps, horizon is " + std::to_string(scenario.steps));
  }
  if (scenario.inflow.steps() != scenario.steps) {
    throw ModelError("inflow profile does not cover the horizon");
  }
  check_cfl(scenario.graph, scenario.fd, scenario.step_hours);
  const DynamicsView dyn{scenario.graph, scenario.fd, scenario.routing};

  Trajectory traj;
  traj.states.reserve(scenario.steps + 1);
  traj.flows.reserve(scenario.steps);
  traj.states.push_back(scenario.initial);
  for (std::size_t t = 0; t < scenario.steps; ++t) {
    try {
      auto res = step(dyn, traj.states.back(), scenario.inflow.rate[t], control.alpha[t], t,
                      scenario.step_hours);
      traj.states.push_back(std::move(res.next));
      traj.flows.push_back(std::move(res.flows));
    } catch (const ModelError& e) {
      throw ModelError("step " + std::to_string(t) + ": " + e.what());
    } catch (const RuntimeFailure& e) {
      throw RuntimeFailure("step " + std::to_string(t) + ": " + e.what());
    }
  }
  return traj;
}

double evaluate_cost(const Trajectory& trajectory, const CostSpec& cost, const NetworkGraph& graph) {
  cost.validate();
  double total = 0.0;
  for (const auto& x : trajectory.states) {
    for (double v : x.values()) total += cost.volume_cost(v);
  }
  if (cost.outflow_per_mile != 0.0) {
    for (const auto& rec : trajectory.flows) {
      for (std::size_t i = 0; i < rec.outflow.cells(); ++i) {
        total += cost.outflow_per_mile * graph.cells()[i].length_mi * rec.outflow.cell_sum(i);
      }
    }
  }
  return total;
}

VolumeReport total_volume_report(const Trajectory& trajectory, const NetworkGraph& graph) {
  VolumeReport r;
  for (const auto& x : trajectory.states) {
    for (std::size_t i = 0; i < x.cells(); ++i) {
      const double v = x.cell_sum(i);
      const auto& c = graph.cells()[i];
      if (c.is_onramp) {
        r.onramps += v;
      } else if (c.is_offramp) {
        r.offramps += v;
      } else {
        r.mainline += v;
      }
    }
  }
  r.total = r.onramps + r.mainline + r.offramps;
  return r;
}

std::vector<double> total_volume_series(const Trajectory& trajectory) {
  std::vector<double> out;
  out.reserve(trajectory.states.size());
  for (const auto& x : trajectory.states) out.push_back(x.sum());
  return out;
}

}  // namespace mcfnc
