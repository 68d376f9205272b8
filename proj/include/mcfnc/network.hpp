#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcfnc/types.hpp"

namespace mcfnc {

/// Static description of one cell as read from a network config.
struct CellSpec {
  std::string id;
  std::string tail;  // empty: no tail node (sources, onramps)
  std::string head;  // empty: no head node (offramps)
  double length_mi{0.0};
  double lanes{1.0};
  bool is_onramp{false};
  bool is_offramp{false};
  double beta{1.0};
};

struct Cell {
  std::string id;
  std::optional<NodeId> tail;
  std::optional<NodeId> head;
  double length_mi{0.0};
  double lanes{1.0};
  bool is_onramp{false};
  bool is_offramp{false};
  double beta{1.0};
};

enum class JunctionKind { ordinary, merge, diverge, mixed };

const char* to_string(JunctionKind kind);

using CellPair = std::pair<CellId, CellId>;

/// Directed multigraph of cells joined at junction nodes.
///
/// Cells carry their own identity, so parallel cells between the same node
/// pair are distinct. Cell i sends to cell j iff head(i) == tail(j); the set
/// of such pairs is computed once at construction, sorted by (i, j).
/// Immutable after construction.
class NetworkGraph {
 public:
  NetworkGraph() = default;
  explicit NetworkGraph(const std::vector<CellSpec>& specs);

  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_nodes() const { return node_ids_.size(); }
  const Cell& cell(CellId id) const { return cells_.at(id.index); }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::string& node_label(NodeId id) const { return node_ids_.at(id.index); }

  std::optional<CellId> find_cell(const std::string& id) const;
  CellId cell_id(const std::string& id) const;  // throws ModelError
  std::optional<NodeId> find_node(const std::string& label) const;

  bool is_onramp(CellId id) const { return cells_.at(id.index).is_onramp; }
  bool is_offramp(CellId id) const { return cells_.at(id.index).is_offramp; }

  const std::vector<CellPair>& adjacency() const { return adjacency_; }
  std::optional<std::size_t> pair_index(CellId from, CellId to) const;
  bool adjacent(CellId from, CellId to) const { return pair_index(from, to).has_value(); }

  /// Indices into adjacency() of pairs leaving / entering a cell.
  const std::vector<std::size_t>& out_pairs(CellId id) const { return out_pairs_.at(id.index); }
  const std::vector<std::size_t>& in_pairs(CellId id) const { return in_pairs_.at(id.index); }

  /// Cells whose head / tail is the given node.
  const std::vector<CellId>& incoming(NodeId node) const { return incoming_.at(node.index); }
  const std::vector<CellId>& outgoing(NodeId node) const { return outgoing_.at(node.index); }

 private:
  std::vector<Cell> cells_;
  std::vector<std::string> node_ids_;
  std::map<std::string, std::size_t> cell_lookup_;
  std::map<std::string, std::size_t> node_lookup_;
  std::vector<CellPair> adjacency_;
  std::map<CellPair, std::size_t> pair_lookup_;
  std::vector<std::vector<std::size_t>> out_pairs_;
  std::vector<std::vector<std::size_t>> in_pairs_;
  std::vector<std::vector<CellId>> incoming_;
  std::vector<std::vector<CellId>> outgoing_;
};

/// Classifies a junction by the number of cells entering and leaving it.
/// At most one cell on a side counts as "one"; a node with no cells on a
/// side is treated the same as one with a single cell there.
JunctionKind classify_junction(const NetworkGraph& graph, NodeId node);

/// Pairs (i, j) with head(i) == tail(j), ordered by (i, j).
std::vector<CellPair> adjacent_pairs(const NetworkGraph& graph);

/// Ordered, non-empty list of unique commodity names.
class CommoditySet {
 public:
  CommoditySet() = default;
  explicit CommoditySet(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(CommodityId id) const { return names_.at(id.index); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<CommodityId> find(const std::string& name) const;
  CommodityId id(const std::string& name) const;  // throws ModelError

 private:
  std::vector<std::string> names_;
};

struct RoutingEntry {
  CellId from;
  CellId to;
  double ratio{0.0};
};

/// Turning ratios R^(k)(t), piecewise constant in discrete time.
///
/// Segment s covers steps [t_start(s), t_start(s+1)). Within a segment each
/// commodity has a sparse list of entries; unlisted pairs are zero.
class RoutingSchedule {
 public:
  struct Segment {
    std::size_t t_start{0};
    std::vector<std::vector<RoutingEntry>> entries;  // [commodity]
  };

  RoutingSchedule() = default;
  explicit RoutingSchedule(std::size_t commodities) : commodities_(commodities) {}

  std::size_t commodities() const { return commodities_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Adds (or overwrites) R^(k)_{from,to} for the segment starting at t_start.
  void set(std::size_t t_start, CommodityId k, CellId from, CellId to, double ratio);

  /// Ensures a (possibly empty) segment starts at t_start.
  void add_segment(std::size_t t_start) { segment_for_start(t_start); }

  /// Index of the segment in force at step t (segments must start at 0).
  std::size_t segment_at(std::size_t t) const;

 private:
  Segment& segment_for_start(std::size_t t_start);

  std::size_t commodities_{0};
  std::vector<Segment> segments_;  // sorted by t_start
};

struct RoutingViolation {
  enum class Kind { row_sum, outside_adjacency, out_of_range };
  Kind kind;
  std::size_t t_start{0};
  CommodityId commodity;
  CellId from;
  std::optional<CellId> to;
  double value{0.0};     // row sum or entry value
  double expected{0.0};  // target row sum (row_sum only)
  double deficit() const { return expected - value; }
};

struct ValidationReport {
  std::vector<RoutingViolation> violations;
  bool ok() const { return violations.empty(); }
};

inline constexpr double kRowSumTolerance = 1e-9;

/// Checks row sums (1 off S, 0 on S), support within the adjacency set and
/// entries in [0, 1]. Throws ModelError on dimension mismatch.
ValidationReport validate_routing(const RoutingSchedule& schedule, const NetworkGraph& graph);

/// Dense view of a validated schedule over the adjacency pairs.
class RoutingTable {
 public:
  RoutingTable() = default;
  /// Throws ModelError unless validate_routing passes.
  RoutingTable(const RoutingSchedule& schedule, const NetworkGraph& graph);

  std::size_t commodities() const { return commodities_; }
  std::size_t num_pairs() const { return num_pairs_; }
  std::size_t num_segments() const { return starts_.size(); }
  const std::vector<std::size_t>& segment_starts() const { return starts_; }
  std::size_t segment_at(std::size_t t) const;

  /// R^(k)_{pair}(t).
  double ratio(std::size_t t, CommodityId k, std::size_t pair) const {
    return ratio_in_segment(segment_at(t), k, pair);
  }
  double ratio_in_segment(std::size_t seg, CommodityId k, std::size_t pair) const {
    return values_[(seg * commodities_ + k.index) * num_pairs_ + pair];
  }

  /// True if some commodity routes a positive fraction over the pair at some time.
  bool pair_used(std::size_t pair) const { return used_.at(pair); }

  /// Back to the sparse form (entries with ratio > 0 only).
  RoutingSchedule to_schedule(const NetworkGraph& graph) const;

 private:
  std::size_t commodities_{0};
  std::size_t num_pairs_{0};
  std::vector<std::size_t> starts_;
  std::vector<double> values_;
  std::vector<bool> used_;
};

}  // namespace mcfnc
