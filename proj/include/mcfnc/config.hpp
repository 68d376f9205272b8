#pragma once

// JSON network/scenario files and CSV exports.
//
// A scenario file references its parts (network, routing, inflow, initial
// state, control) either inline or by a path relative to the scenario file.
// Every parse error is a ModelError whose message names the file and field.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "mcfnc/relaxation.hpp"
#include "mcfnc/scenario.hpp"
#include "mcfnc/simulator.hpp"

namespace mcfnc {

using Json = nlohmann::ordered_json;

struct NetworkConfig {
  std::vector<CellSpec> cells;
  CommoditySet commodities;
  std::vector<double> vehicle_lengths;  // miles, 0 when not given
  std::vector<double> shares;           // traffic mix, 0 when not given
  FundamentalDiagram fd;
  RoutingSchedule routing;
};

/// Throws ModelError if the file cannot be read or is not valid JSON.
Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& value);

NetworkConfig parse_network(const Json& j, const std::string& where);
NetworkConfig load_network(const std::filesystem::path& path);
/// Canonical form: explicit demand and supply pieces on every cell.
Json network_to_json(const NetworkConfig& config);

RoutingSchedule parse_routing(const Json& j, const NetworkGraph& graph,
                              const CommoditySet& commodities, const std::string& where);
Json routing_to_json(const RoutingSchedule& schedule, const NetworkGraph& graph,
                     const CommoditySet& commodities);

ControlSchedule parse_control(const Json& j, const NetworkGraph& graph,
                              const CommoditySet& commodities, std::size_t steps,
                              const std::string& where);
/// Consecutive equal steps are merged into one segment.
Json control_to_json(const ControlSchedule& schedule, const NetworkGraph& graph,
                     const CommoditySet& commodities);

CostSpec parse_cost(const Json& j, const std::string& where);
Json cost_to_json(const CostSpec& cost);

/// Loads and validates a scenario (including the CFL check).
Scenario load_scenario(const std::filesystem::path& path);

Json tightness_to_json(const TightnessReport& report);
Json residuals_to_json(const RelaxationResiduals& residuals);

/// t,cell,commodity,x,z,gamma; the final state row leaves z and gamma empty.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const NetworkGraph& graph, const CommoditySet& commodities);
/// t,from,to,commodity,f for pairs that carry flow at some step.
void write_flows_csv(std::ostream& out, const Trajectory& trajectory, const NetworkGraph& graph,
                     const CommoditySet& commodities);
/// t,total_volume.
void write_totals_csv(std::ostream& out, const std::vector<double>& totals);
/// t,cell,commodity,x,z of a relaxation point.
void write_relaxation_csv(std::ostream& out, const RelaxationPoint& point,
                          const NetworkGraph& graph, const CommoditySet& commodities);

}  // namespace mcfnc
