#pragma once

// Network construction from a road list and sensor flows: segmentation into
// cells with collapsed ramps, routing estimation, capacity-based supply
// calibration and step selection.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mcfnc/config.hpp"
#include "mcfnc/fundamental_diagram.hpp"
#include "mcfnc/network.hpp"

namespace mcfnc {

struct SensorRecord {
  std::int64_t time_s{0};  // seconds since 1970-01-01T00:00:00
  std::string cell;
  std::string commodity;
  double flow_vph{0.0};
  std::size_t line{0};
};

/// Flow measurements, validated: flows >= 0 and timestamps strictly
/// increasing per (cell, commodity).
struct SensorSeries {
  std::vector<SensorRecord> records;  // file order
  std::int64_t t0{0};
  std::int64_t t_end{0};
  std::int64_t interval_s{0};  // smallest gap between consecutive samples of one series

  /// (time, flow) samples of one cell and commodity, in time order.
  std::vector<std::pair<std::int64_t, double>> samples(const std::string& cell,
                                                       const std::string& commodity) const;
  bool has(const std::string& cell, const std::string& commodity) const;
  std::vector<std::string> commodities() const;
};

/// Parses "YYYY-MM-DDTHH:MM[:SS]" with an optional trailing Z. Throws
/// ModelError otherwise.
std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t time_s);

/// Header timestamp,cell_id,commodity,flow_vph (extra columns ignored).
/// Errors name the offending line.
SensorSeries parse_sensor_csv(std::istream& in, const std::string& label);
SensorSeries load_sensor_csv(const std::filesystem::path& path);

struct RoadSpec {
  std::string id;
  std::string freeway;
  double pm_start{0.0};
  double pm_end{0.0};
  std::string from_node;
  std::string to_node;
  double lanes{6.0};
  double length_mi() const { return pm_start > pm_end ? pm_start - pm_end : pm_end - pm_start; }
};

/// Header road,freeway,pm_start,pm_end,from_node,to_node[,lanes].
std::vector<RoadSpec> parse_road_csv(std::istream& in, const std::string& label);
std::vector<RoadSpec> load_road_csv(const std::filesystem::path& path);

enum class CellRole { mainline, onramp, offramp };

struct SegmentedNetwork {
  std::vector<CellSpec> cells;
  std::vector<CellRole> roles;
  std::vector<std::string> road;  // road id per cell
  std::map<std::string, std::vector<std::string>> road_cells;  // mainline cell ids per road
};

/// Splits every road into cells of cell_length_mi; a remainder shorter than
/// half a cell is absorbed by the previous cell. Each mainline cell gets an
/// onramp entering at its tail and an offramp leaving at its head. Mainline
/// cell ids are <road>_<n>, ramps <road>_<n>_on / _off.
SegmentedNetwork segment_roads(const std::vector<RoadSpec>& roads, double cell_length_mi,
                               double ramp_length_mi);

/// Adjacent pairs that may carry flow: the graph adjacency without
/// onramp-to-offramp shortcuts.
std::vector<CellPair> routing_support(const NetworkGraph& graph);

struct RoutingEstimate {
  std::vector<RoutingEntry> entries;
  std::vector<std::string> warnings;
};

/// R_ij = sum_t a_j(t) / sum_l sum_t a_l(t) over the successors l of i in the
/// support. Offramp rows are zero; rows without measured downstream flow fall
/// back to a uniform split with a warning.
RoutingEstimate estimate_routing(const NetworkGraph& graph, const std::vector<CellPair>& support,
                                 const SensorSeries& series, const std::string& commodity);

struct SupplyCalibration {
  double length_mi{0.0};
  double lanes{1.0};
  double beta{1.0};
  std::vector<double> vehicle_lengths;  // supply weights, miles
  std::vector<double> mix;              // traffic split, sums to 1
  std::vector<double> demand_slopes;    // free-flow slope per commodity, 1/h
};

/// Capacity C = largest total flow over all commodities at one timestamp.
double measured_capacity(const SensorSeries& series, const std::string& cell);

/// The affine supply through (v_C, C) and (beta L n, 0), where v_C is the
/// weighted volume at which the aggregate demand of the mix reaches C.
SupplyFunction calibrate_supply(double capacity_vph, const SupplyCalibration& params);
SupplyFunction calibrate_supply(const SensorSeries& series, const SupplyCalibration& params,
                                const std::string& cell);

/// Largest multiple of quantum_hours strictly below the stability bound.
double recommend_step(double stable_bound_hours, double quantum_hours = 0.01);

struct CalibrationSettings {
  double cell_length_mi{2.0};
  double ramp_length_mi{0.5};
  double ramp_speed_mph{20.0};
  std::vector<std::string> commodities{"car", "truck"};
  std::vector<double> mainline_speed_mph{60.0, 40.0};
  std::vector<double> vehicle_lengths_mi{0.0028, 0.0075};
  double car_split{0.96};  // share of the first commodity
  double horizon_hours{4.0};
  double inflow_period_hours{1.0};
};

struct CalibrationResult {
  NetworkConfig network;
  SegmentedNetwork segments;
  double stable_bound_hours{0.0};
  double step_hours{0.0};
  std::size_t steps{0};
  Json inflow;   // scenario inflow entries
  Json initial;  // scenario initial entries
  std::vector<std::string> warnings;
};

/// The whole pipeline. Initial volumes invert the free-flow demand at the
/// first sample, onramp inflows are period averages of the onramp sensors over
/// the horizon starting at the first timestamp.
CalibrationResult calibrate(const std::vector<RoadSpec>& roads, const SensorSeries& series,
                            const CalibrationSettings& settings);

}  // namespace mcfnc
