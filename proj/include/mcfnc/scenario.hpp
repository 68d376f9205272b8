#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mcfnc/fundamental_diagram.hpp"
#include "mcfnc/network.hpp"
#include "mcfnc/types.hpp"

namespace mcfnc {

/// Traffic volume x_i^(k) of every cell and commodity at one instant.
using CommodityState = CellCommodityArray;

/// alpha_i^(k)(t) in [0,1] for every step of the horizon.
struct ControlSchedule {
  std::vector<CellCommodityArray> alpha;  // [t]

  static ControlSchedule uniform(std::size_t steps, std::size_t cells, std::size_t commodities,
                                 double value = 1.0);
  std::size_t steps() const { return alpha.size(); }
};

/// Exogenous inflow lambda_i^(k)(t) in veh/h, nonzero only on onramps.
struct InflowProfile {
  std::vector<CellCommodityArray> rate;  // [t]

  static InflowProfile zero(std::size_t steps, std::size_t cells, std::size_t commodities);
  std::size_t steps() const { return rate.size(); }
};

/// Separable cost phi summed over the discrete horizon:
///   sum_{t=0..N} sum_{i,k} volume_cost(x_i^(k)(t))
/// + sum_{t=0..N-1} sum_{i,k} outflow_per_mile * L_i * z_i^(k)(t).
///
/// volume_cost is the maximum of affine pieces (convex); total travel time
/// is the single piece x, total travel distance sets outflow_per_mile = -1.
struct CostSpec {
  enum class Kind { ttt, ttd, piecewise };

  Kind kind{Kind::ttt};
  std::vector<AffinePiece> volume_pieces{{1.0, 0.0}};
  double outflow_per_mile{0.0};

  static CostSpec ttt() { return {}; }
  static CostSpec ttd() { return {Kind::ttd, {}, -1.0}; }
  static CostSpec piecewise(std::vector<AffinePiece> pieces, double outflow_per_mile = 0.0) {
    return {Kind::piecewise, std::move(pieces), outflow_per_mile};
  }

  double volume_cost(double x) const;
  /// Non-decreasing in x, non-increasing in z and zero at the origin,
  /// checked at sample points. Throws ModelError otherwise.
  void validate() const;
};

/// Everything needed for one run of the controlled network.
struct Scenario {
  NetworkGraph graph;
  CommoditySet commodities;
  FundamentalDiagram fd;
  RoutingTable routing;
  InflowProfile inflow;
  ControlSchedule control;
  CommodityState initial;
  double step_hours{0.0};
  std::size_t steps{0};
  CostSpec cost;

  std::size_t num_cells() const { return graph.num_cells(); }
  std::size_t num_commodities() const { return commodities.size(); }

  /// Shape, sign and CFL checks; throws ModelError naming the problem.
  void validate() const;
};

/// Throws ModelError if h exceeds the CFL bound of the network.
void check_cfl(const NetworkGraph& graph, const FundamentalDiagram& fd, double step_hours);

}  // namespace mcfnc
