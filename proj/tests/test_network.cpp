#include <gtest/gtest.h>

#include "mcfnc/network.hpp"
#include "support/builders.hpp"

using namespace mcfnc;
using testnet::cell;

namespace {

NetworkGraph branch_graph() {
  // 4 -> 5, 5 -> {6, 7}, 7 offramp.
  return NetworkGraph({cell("4", "a", "b"), cell("5", "b", "c"), cell("6", "c", "d"),
                       cell("7", "c", "", 0.5, false, true), cell("8", "d", "", 0.5, false, true)});
}

}  // namespace

TEST(NetworkGraph, RejectsBadCells) {
  EXPECT_THROW(NetworkGraph({cell("a", "", "n", 0.5, true, true)}), ModelError);
  EXPECT_THROW(NetworkGraph({cell("a", "", "n"), cell("a", "n", "")}), ModelError);
  EXPECT_THROW(NetworkGraph({cell("a", "", "n", 0.0)}), ModelError);
  EXPECT_THROW(NetworkGraph({cell("a", "", "n", 0.5, false, false, 0.0)}), ModelError);
  EXPECT_THROW(NetworkGraph({cell("a", "", "n", 0.5, false, false, 1.0, 1.5)}), ModelError);
}

TEST(NetworkGraph, ClassifiesJunctions) {
  const auto g = branch_graph();
  EXPECT_EQ(classify_junction(g, *g.find_node("c")), JunctionKind::diverge);
  EXPECT_EQ(classify_junction(g, *g.find_node("b")), JunctionKind::ordinary);

  const NetworkGraph mixed({cell("a", "p", "x"), cell("b", "q", "x"), cell("c", "x", "u"),
                            cell("d", "x", "v")});
  EXPECT_EQ(classify_junction(mixed, *mixed.find_node("x")), JunctionKind::mixed);
  const NetworkGraph merge({cell("a", "p", "x"), cell("b", "q", "x"), cell("c", "x", "u")});
  EXPECT_EQ(classify_junction(merge, *merge.find_node("x")), JunctionKind::merge);
  EXPECT_THROW(classify_junction(g, NodeId{99}), ModelError);
}

TEST(NetworkGraph, ClassificationIsTotal) {
  const NetworkGraph g({cell("a", "p", "x"), cell("b", "q", "x"), cell("c", "x", "y"),
                        cell("d", "y", "u"), cell("e", "y", "v")});
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    const auto kind = classify_junction(g, NodeId{n});
    const int hits = (kind == JunctionKind::ordinary) + (kind == JunctionKind::merge) +
                     (kind == JunctionKind::diverge) + (kind == JunctionKind::mixed);
    EXPECT_EQ(hits, 1);
  }
}

TEST(NetworkGraph, AdjacentPairs) {
  const NetworkGraph chain({cell("1", "", "a"), cell("2", "a", "b"), cell("3", "b", "")});
  const auto pairs = adjacent_pairs(chain);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], CellPair(chain.cell_id("1"), chain.cell_id("2")));
  EXPECT_EQ(pairs[1], CellPair(chain.cell_id("2"), chain.cell_id("3")));

  const auto g = branch_graph();
  EXPECT_TRUE(g.adjacent(g.cell_id("5"), g.cell_id("6")));
  EXPECT_TRUE(g.adjacent(g.cell_id("5"), g.cell_id("7")));
  EXPECT_FALSE(g.adjacent(g.cell_id("6"), g.cell_id("7")));

  const NetworkGraph empty(std::vector<CellSpec>{});
  EXPECT_TRUE(adjacent_pairs(empty).empty());
}

TEST(NetworkGraph, ParallelLinksKeepDistinctCells) {
  const NetworkGraph g({cell("up", "", "a"), cell("left", "a", "b"), cell("right", "a", "b"),
                        cell("down", "b", "", 0.5, false, true)});
  EXPECT_EQ(g.num_cells(), 4u);
  EXPECT_EQ(g.adjacency().size(), 4u);
}

TEST(CommoditySet, Invariants) {
  EXPECT_THROW(CommoditySet(std::vector<std::string>{}), ModelError);
  EXPECT_THROW(CommoditySet({"car", "car"}), ModelError);
  const CommoditySet ks({"car", "truck"});
  EXPECT_EQ(ks.id("truck").index, 1u);
  EXPECT_FALSE(ks.find("bus").has_value());
}

TEST(Routing, OfframpZeroRowIsValid) {
  const auto g = branch_graph();
  RoutingSchedule rs(1);
  rs.set(0, CommodityId{0}, g.cell_id("4"), g.cell_id("5"), 1.0);
  rs.set(0, CommodityId{0}, g.cell_id("5"), g.cell_id("6"), 0.5);
  rs.set(0, CommodityId{0}, g.cell_id("5"), g.cell_id("7"), 0.5);
  rs.set(0, CommodityId{0}, g.cell_id("6"), g.cell_id("8"), 1.0);
  EXPECT_TRUE(validate_routing(rs, g).ok());
  EXPECT_NO_THROW(RoutingTable(rs, g));
}

TEST(Routing, RowSumDeficitReported) {
  const auto g = branch_graph();
  RoutingSchedule rs(1);
  rs.set(0, CommodityId{0}, g.cell_id("4"), g.cell_id("5"), 1.0);
  rs.set(0, CommodityId{0}, g.cell_id("5"), g.cell_id("6"), 0.4);
  rs.set(0, CommodityId{0}, g.cell_id("5"), g.cell_id("7"), 0.5);
  rs.set(0, CommodityId{0}, g.cell_id("6"), g.cell_id("8"), 1.0);
  const auto report = validate_routing(rs, g);
  ASSERT_EQ(report.violations.size(), 1u);
  const auto& v = report.violations[0];
  EXPECT_EQ(v.kind, RoutingViolation::Kind::row_sum);
  EXPECT_EQ(v.from, g.cell_id("5"));
  EXPECT_NEAR(v.deficit(), 0.1, 1e-12);
  EXPECT_THROW(RoutingTable(rs, g), ModelError);
}

TEST(Routing, EntryOutsideAdjacencyReported) {
  const auto g = branch_graph();
  RoutingSchedule rs(1);
  rs.set(0, CommodityId{0}, g.cell_id("4"), g.cell_id("5"), 1.0);
  rs.set(0, CommodityId{0}, g.cell_id("5"), g.cell_id("6"), 1.0);
  rs.set(0, CommodityId{0}, g.cell_id("6"), g.cell_id("8"), 1.0);
  rs.set(0, CommodityId{0}, g.cell_id("4"), g.cell_id("7"), 0.0001);
  const auto report = validate_routing(rs, g);
  bool outside = false;
  for (const auto& v : report.violations) outside |= v.kind == RoutingViolation::Kind::outside_adjacency;
  EXPECT_TRUE(outside);
}

TEST(Routing, DimensionMismatchThrows) {
  const auto g = branch_graph();
  RoutingSchedule rs(1);
  rs.set(0, CommodityId{0}, CellId{40}, g.cell_id("5"), 1.0);
  EXPECT_THROW(validate_routing(rs, g), ModelError);
}

TEST(Routing, PiecewiseConstantSegments) {
  const auto g = branch_graph();
  RoutingSchedule rs(1);
  for (std::size_t start : {0u, 10u}) {
    const double p = start == 0 ? 0.5 : 0.2;
    rs.set(start, CommodityId{0}, g.cell_id("4"), g.cell_id("5"), 1.0);
    rs.set(start, CommodityId{0}, g.cell_id("5"), g.cell_id("6"), p);
    rs.set(start, CommodityId{0}, g.cell_id("5"), g.cell_id("7"), 1.0 - p);
    rs.set(start, CommodityId{0}, g.cell_id("6"), g.cell_id("8"), 1.0);
  }
  const RoutingTable table(rs, g);
  const auto p56 = *g.pair_index(g.cell_id("5"), g.cell_id("6"));
  EXPECT_DOUBLE_EQ(table.ratio(0, CommodityId{0}, p56), 0.5);
  EXPECT_DOUBLE_EQ(table.ratio(9, CommodityId{0}, p56), 0.5);
  EXPECT_DOUBLE_EQ(table.ratio(10, CommodityId{0}, p56), 0.2);
  EXPECT_DOUBLE_EQ(table.ratio(500, CommodityId{0}, p56), 0.2);
  const auto back = table.to_schedule(g);
  EXPECT_EQ(back.segments().size(), 2u);
}
