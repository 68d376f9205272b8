#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "mcfnc/scenario.hpp"

namespace mcfnc {

/// Flows produced by one step of the dynamics (all rates in veh/h).
struct FlowRecord {
  CellCommodityArray outflow;       // z_i^(k)
  std::vector<double> pair_flow;    // f_ij^(k), index pair * K + k
  std::vector<double> gamma;        // gamma_i per cell

  double flow(std::size_t pair, std::size_t commodity, std::size_t commodities) const {
    return pair_flow[pair * commodities + commodity];
  }
};

struct StepResult {
  CommodityState next;
  FlowRecord flows;
};

/// States for t = 0..N and flows for t = 0..N-1.
struct Trajectory {
  std::vector<CommodityState> states;
  std::vector<FlowRecord> flows;

  std::size_t steps() const { return flows.size(); }
};

/// Read-only data shared by the step functions.
struct DynamicsView {
  const NetworkGraph& graph;
  const FundamentalDiagram& fd;
  const RoutingTable& routing;
};

/// FIFO saturation factor of one cell: the largest gamma in [0,1] such that
/// gamma * D_j <= s_j for every downstream cell j the cell routes into at
/// step t, where D_j is the controlled demand directed into j by all its
/// upstream cells. Cells with D_j = 0 impose no restriction.
///
/// In SupplyMode::affine a negative supply throws RuntimeFailure.
double gamma_fifo(const DynamicsView& dyn, const CommodityState& state,
                  const CellCommodityArray& alpha, std::size_t t, CellId cell,
                  SupplyMode mode = SupplyMode::truncated);

/// Saturation factors of every cell at once.
std::vector<double> gamma_all(const DynamicsView& dyn, const CommodityState& state,
                              const CellCommodityArray& alpha, std::size_t t,
                              SupplyMode mode = SupplyMode::truncated);

/// One explicit Euler step of the controlled FIFO dynamics.
StepResult step(const DynamicsView& dyn, const CommodityState& state,
                const CellCommodityArray& inflow, const CellCommodityArray& alpha, std::size_t t,
                double step_hours);

/// Runs the scenario under its own control schedule.
Trajectory simulate(const Scenario& scenario);
/// Runs the scenario under a different control schedule.
Trajectory simulate(const Scenario& scenario, const ControlSchedule& control);

double evaluate_cost(const Trajectory& trajectory, const CostSpec& cost, const NetworkGraph& graph);

/// Sum over t = 0..N and commodities of the volume, split by cell type.
struct VolumeReport {
  double onramps{0.0};
  double mainline{0.0};
  double offramps{0.0};
  double total{0.0};
};

VolumeReport total_volume_report(const Trajectory& trajectory, const NetworkGraph& graph);

/// Total network volume at each t = 0..N.
std::vector<double> total_volume_series(const Trajectory& trajectory);

}  // namespace mcfnc
