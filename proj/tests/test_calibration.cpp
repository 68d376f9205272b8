#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "mcfnc/calibration.hpp"

using namespace mcfnc;

namespace {

RoadSpec road(const std::string& id, double a, double b, const std::string& from = "",
              const std::string& to = "") {
  RoadSpec r;
  r.id = id;
  r.freeway = "I-0";
  r.pm_start = a;
  r.pm_end = b;
  r.from_node = from;
  r.to_node = to;
  return r;
}

SensorSeries sensors(const std::string& csv) {
  std::istringstream in("timestamp,cell_id,commodity,flow_vph\n" + csv);
  return parse_sensor_csv(in, "sensors.csv");
}

double ratio(const RoutingEstimate& est, const NetworkGraph& g, const std::string& from,
             const std::string& to) {
  for (const auto& e : est.entries) {
    if (e.from == g.cell_id(from) && e.to == g.cell_id(to)) return e.ratio;
  }
  return -1.0;
}

std::string expect_error(const std::string& csv) {
  try {
    sensors(csv);
  } catch (const ModelError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Segmentation, RemainderBecomesLastCell) {
  const auto net = segment_roads({road("e1", 10.00, 17.79)}, 2.0, 0.5);
  const auto& cells = net.road_cells.at("e1");
  ASSERT_EQ(cells.size(), 4u);
  double total = 0.0;
  for (std::size_t i = 0; i < net.cells.size(); ++i) {
    if (net.roles[i] == CellRole::mainline) total += net.cells[i].length_mi;
  }
  EXPECT_NEAR(total, 7.79, 1e-12);
  EXPECT_NEAR(net.cells[9].length_mi, 1.79, 1e-12);
  EXPECT_EQ(net.cells[9].id, "e1_4");
  EXPECT_EQ(net.cells.size(), 12u);
}

TEST(Segmentation, ShortRemainderMerges) {
  const auto net = segment_roads({road("e", 0.0, 4.5)}, 2.0, 0.5);
  ASSERT_EQ(net.road_cells.at("e").size(), 2u);
  EXPECT_DOUBLE_EQ(net.cells[0].length_mi, 2.0);
  EXPECT_DOUBLE_EQ(net.cells[3].length_mi, 2.5);
}

TEST(Segmentation, ShortRoadIsOneCell) {
  const auto net = segment_roads({road("s", 3.0, 2.2)}, 2.0, 0.5);
  ASSERT_EQ(net.road_cells.at("s").size(), 1u);
  EXPECT_NEAR(net.cells[0].length_mi, 0.8, 1e-12);
}

TEST(Segmentation, RampsAttachAtTailAndHead) {
  const auto net = segment_roads({road("a", 0.0, 4.0, "n0", "n1"), road("b", 0.0, 2.0, "n1", "n2")}, 2.0, 0.5);
  const NetworkGraph g(net.cells);
  EXPECT_TRUE(g.adjacent(g.cell_id("a_1_on"), g.cell_id("a_1")));
  EXPECT_TRUE(g.adjacent(g.cell_id("a_1"), g.cell_id("a_1_off")));
  EXPECT_TRUE(g.adjacent(g.cell_id("a_1"), g.cell_id("a_2")));
  EXPECT_TRUE(g.adjacent(g.cell_id("a_2"), g.cell_id("b_1")));
  EXPECT_TRUE(g.adjacent(g.cell_id("a_2_on"), g.cell_id("a_1_off")));
  EXPECT_TRUE(g.is_onramp(g.cell_id("b_1_on")));
  EXPECT_TRUE(g.is_offramp(g.cell_id("b_1_off")));
  EXPECT_DOUBLE_EQ(g.cell(g.cell_id("a_1_on")).length_mi, 0.5);
}

TEST(Segmentation, RejectsDegenerateInput) {
  EXPECT_THROW(segment_roads({road("z", 1.0, 1.0)}, 2.0, 0.5), ModelError);
  EXPECT_THROW(segment_roads({road("a", 0.0, 3.0)}, 0.0, 0.5), ModelError);
}

TEST(Routing, SupportDropsRampShortcuts) {
  const auto net = segment_roads({road("a", 0.0, 4.0)}, 2.0, 0.5);
  const NetworkGraph g(net.cells);
  const auto sup = routing_support(g);
  EXPECT_EQ(sup.size(), g.adjacency().size() - 1);
  for (const auto& [i, j] : sup) EXPECT_FALSE(g.is_onramp(i) && g.is_offramp(j));
}

TEST(Routing, MeasuredSplitAndZeroOfframpRows) {
  const auto net = segment_roads({road("a", 0.0, 4.0)}, 2.0, 0.5);
  const NetworkGraph g(net.cells);
  const auto s = sensors(
      "2024-01-01T06:00,a_2,car,200\n2024-01-01T06:05,a_2,car,100\n"
      "2024-01-01T06:00,a_1_off,car,60\n2024-01-01T06:05,a_1_off,car,40\n");
  const auto est = estimate_routing(g, routing_support(g), s, "car");
  EXPECT_DOUBLE_EQ(ratio(est, g, "a_1", "a_2"), 0.75);
  EXPECT_DOUBLE_EQ(ratio(est, g, "a_1", "a_1_off"), 0.25);
  EXPECT_DOUBLE_EQ(ratio(est, g, "a_2_on", "a_2"), 1.0);
  EXPECT_DOUBLE_EQ(ratio(est, g, "a_2_on", "a_1_off"), -1.0);
  for (const auto& e : est.entries) EXPECT_FALSE(g.is_offramp(e.from));
  // a_2 only reaches its offramp, which has no data: a single successor needs no warning.
  EXPECT_DOUBLE_EQ(ratio(est, g, "a_2", "a_2_off"), 1.0);
  EXPECT_TRUE(est.warnings.empty());
}

TEST(Routing, ScaleInvariant) {
  const auto net = segment_roads({road("a", 0.0, 4.0)}, 2.0, 0.5);
  const NetworkGraph g(net.cells);
  const auto s1 = sensors("2024-01-01T06:00,a_2,car,123\n2024-01-01T06:00,a_1_off,car,17\n");
  const auto s2 = sensors("2024-01-01T06:00,a_2,car,1230\n2024-01-01T06:00,a_1_off,car,170\n");
  const auto e1 = estimate_routing(g, routing_support(g), s1, "car");
  const auto e2 = estimate_routing(g, routing_support(g), s2, "car");
  ASSERT_EQ(e1.entries.size(), e2.entries.size());
  for (std::size_t i = 0; i < e1.entries.size(); ++i) {
    EXPECT_NEAR(e1.entries[i].ratio, e2.entries[i].ratio, 1e-15);
  }
}

TEST(Routing, UniformFallbackWarns) {
  const auto net = segment_roads({road("a", 0.0, 4.0)}, 2.0, 0.5);
  const NetworkGraph g(net.cells);
  const auto s = sensors("2024-01-01T06:00,a_1,car,50\n");
  const auto est = estimate_routing(g, routing_support(g), s, "car");
  EXPECT_DOUBLE_EQ(ratio(est, g, "a_1", "a_2"), 0.5);
  EXPECT_DOUBLE_EQ(ratio(est, g, "a_1", "a_1_off"), 0.5);
  ASSERT_FALSE(est.warnings.empty());
  EXPECT_NE(est.warnings.front().find("a_1"), std::string::npos);
  EXPECT_THROW(estimate_routing(g, routing_support(g), s, "truck"), ModelError);
}

TEST(Supply, PassesThroughCapacityAndJam) {
  SupplyCalibration p{2.0, 6.0, 1.0, {0.0028, 0.0075}, {0.96, 0.04}, {30.0, 20.0}};
  const double C = 7200.0;
  const auto s = calibrate_supply(C, p);
  // Independent oracle: critical weighted volume of the mix, then the line.
  const double x_c = C / (0.96 * 30.0 + 0.04 * 20.0);
  const double v_c = x_c * (0.96 * 0.0028 + 0.04 * 0.0075);
  const double v_jam = 2.0 * 6.0;
  EXPECT_NEAR(s(v_c, SupplyMode::affine), C, 1e-9);
  EXPECT_NEAR(s(v_jam, SupplyMode::affine), 0.0, 1e-9);
  EXPECT_NEAR(s.pieces().front().slope, -C / (v_jam - v_c), 1e-9);
  EXPECT_EQ(s.weights(), p.vehicle_lengths);
}

TEST(Supply, RejectsZeroCapacityAndUnreachableJam) {
  SupplyCalibration p{2.0, 6.0, 1.0, {0.0028, 0.0075}, {0.96, 0.04}, {30.0, 20.0}};
  EXPECT_THROW(calibrate_supply(0.0, p), ModelError);
  p.beta = 0.001;
  EXPECT_THROW(calibrate_supply(7200.0, p), ModelError);
  const auto s = sensors("2024-01-01T06:00,a_1,car,0\n");
  EXPECT_THROW(calibrate_supply(s, p, "a_1"), ModelError);
}

TEST(Supply, CapacityIsPeakTotalOverCommodities) {
  const auto s = sensors(
      "2024-01-01T06:00,c,car,4000\n2024-01-01T06:05,c,car,5000\n"
      "2024-01-01T06:00,c,truck,900\n2024-01-01T06:05,c,truck,100\n");
  EXPECT_DOUBLE_EQ(measured_capacity(s, "c"), 5100.0);
}

TEST(Step, LargestQuantumStrictlyBelowBound) {
  EXPECT_EQ(recommend_step(0.025), 0.02);
  EXPECT_EQ(recommend_step(0.02), 0.01);
  EXPECT_EQ(recommend_step(1.25 / 60.0), 0.02);
  EXPECT_NEAR(recommend_step(0.005), 17.0 / 3600.0, 1e-15);
}

TEST(Calibrate, SlopesStepAndRamps) {
  const std::vector<RoadSpec> roads{road("a", 0.0, 4.0)};
  const auto s = sensors(
      "2024-01-01T06:00,a_1,car,3000\n2024-01-01T06:00,a_1,truck,120\n"
      "2024-01-01T06:00,a_2,car,2800\n2024-01-01T06:00,a_2,truck,100\n"
      "2024-01-01T06:00,a_1_on,car,1200\n2024-01-01T07:00,a_1_on,car,600\n"
      "2024-01-01T07:30,a_1_on,car,900\n");
  const auto res = calibrate(roads, s, CalibrationSettings{});
  const NetworkGraph g(res.network.cells);
  const auto& fd = res.network.fd;
  const CellId a1 = g.cell_id("a_1"), on = g.cell_id("a_1_on");
  EXPECT_DOUBLE_EQ(fd.demand(a1, CommodityId{0}).free_flow_slope(), 30.0);
  EXPECT_DOUBLE_EQ(fd.demand(a1, CommodityId{1}).free_flow_slope(), 20.0);
  EXPECT_DOUBLE_EQ(fd.demand(on, CommodityId{0}).free_flow_slope(), 40.0);
  EXPECT_TRUE(fd.supply(on).is_unbounded());
  EXPECT_FALSE(fd.supply(a1).is_unbounded());
  EXPECT_DOUBLE_EQ(res.stable_bound_hours, 0.025);
  EXPECT_EQ(res.step_hours, 0.02);
  EXPECT_EQ(res.steps, 200u);
  EXPECT_NO_THROW(fd.validate());

  // Initial volume from the first sample: x = a / slope.
  bool found = false;
  for (const auto& e : res.initial) {
    if (e["cell"] == "a_1" && e["commodity"] == "truck") {
      EXPECT_DOUBLE_EQ(e["volume"].get<double>(), 6.0);
      found = true;
    }
  }
  EXPECT_TRUE(found);

  // Hourly averages: 1200 in the first hour, (600 + 900) / 2 in the second.
  ASSERT_FALSE(res.inflow.empty());
  const auto& prof = res.inflow.front()["profile"];
  EXPECT_EQ(res.inflow.front()["cell"], "a_1_on");
  ASSERT_EQ(prof.size(), 4u);
  EXPECT_EQ(prof[1][0].get<std::size_t>(), 50u);
  EXPECT_DOUBLE_EQ(prof[0][1].get<double>(), 1200.0);
  EXPECT_DOUBLE_EQ(prof[1][1].get<double>(), 750.0);
  EXPECT_DOUBLE_EQ(prof[2][1].get<double>(), 0.0);
}

TEST(Calibrate, UnknownCommodityAndMissingCells) {
  const std::vector<RoadSpec> roads{road("a", 0.0, 4.0)};
  EXPECT_THROW(calibrate(roads, sensors("2024-01-01T06:00,a_1,bus,10\n"), CalibrationSettings{}),
               ModelError);
  const auto res = calibrate(roads, sensors("2024-01-01T06:00,a_1,car,3000\n2024-01-01T06:00,x_9,car,1\n"),
                             CalibrationSettings{});
  bool not_in_network = false, capacity_fallback = false;
  for (const auto& w : res.warnings) {
    not_in_network |= w.find("x_9") != std::string::npos;
    capacity_fallback |= w.find("a_2") != std::string::npos;
  }
  EXPECT_TRUE(not_in_network);
  EXPECT_TRUE(capacity_fallback);
}

TEST(SensorCsv, ErrorsNameTheLine) {
  EXPECT_NE(expect_error("2024-01-01T06:00,c,car,-5\n").find("sensors.csv:2: negative flow"),
            std::string::npos);
  EXPECT_NE(expect_error("2024-01-01T06:00,c,car,5\n2024-01-01T06:00,c,car,6\n").find("sensors.csv:3: duplicate"),
            std::string::npos);
  EXPECT_NE(expect_error("2024-01-01T06:05,c,car,5\n2024-01-01T06:00,c,car,6\n").find("sensors.csv:3"),
            std::string::npos);
  EXPECT_NE(expect_error("2024-13-01T06:00,c,car,5\n").find("sensors.csv:2"), std::string::npos);
  EXPECT_NE(expect_error("2024-01-01T06:00,c,car,abc\n").find("flow_vph"), std::string::npos);
  std::istringstream bad("timestamp,cell_id,flow_vph\n");
  try {
    parse_sensor_csv(bad, "s.csv");
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("commodity"), std::string::npos);
  }
}

TEST(SensorCsv, IntervalAndTimestamps) {
  const auto s = sensors(
      "2024-01-01T06:00:00Z,c,car,5\n2024-01-01T06:05:00Z,c,car,6\n2024-01-01T06:00,d,car,1\n");
  EXPECT_EQ(s.interval_s, 300);
  EXPECT_EQ(s.t_end - s.t0, 300);
  EXPECT_EQ(format_iso8601(parse_iso8601("2024-02-29T23:59:59")), "2024-02-29T23:59:59");
  EXPECT_EQ(parse_iso8601("1970-01-02T00:00"), 86400);
  EXPECT_THROW(parse_iso8601("2023-02-29T00:00"), ModelError);
  EXPECT_THROW(parse_iso8601("06:00"), ModelError);
}

TEST(RoadCsv, ParsesAndValidates) {
  std::istringstream in(
      "road,freeway,pm_start,pm_end,from_node,to_node,lanes\n"
      "e1,I-5 N,10.5,18.29,n0,n1,5\n"
      "e2,I-5 S,18.29,10.5,n1,n2,\n");
  const auto roads = parse_road_csv(in, "roads.csv");
  ASSERT_EQ(roads.size(), 2u);
  EXPECT_NEAR(roads[1].length_mi(), 7.79, 1e-12);
  EXPECT_DOUBLE_EQ(roads[0].lanes, 5.0);
  EXPECT_DOUBLE_EQ(roads[1].lanes, 6.0);
  std::istringstream dup(
      "road,freeway,pm_start,pm_end,from_node,to_node\ne1,x,0,1,a,b\ne1,x,0,2,a,b\n");
  EXPECT_THROW(parse_road_csv(dup, "roads.csv"), ModelError);
}
