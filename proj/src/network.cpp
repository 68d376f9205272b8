#include "mcfnc/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mcfnc {

double CellCommodityArray::sum() const {
  double total = 0.0;
  for (double v : data_) total += v;
  return total;
}

double CellCommodityArray::cell_sum(std::size_t cell) const {
  double total = 0.0;
  for (std::size_t k = 0; k < commodities_; ++k) total += (*this)(cell, k);
  return total;
}

double CellCommodityArray::min() const {
  if (data_.empty()) return 0.0;
  return *std::min_element(data_.begin(), data_.end());
}

const char* to_string(JunctionKind kind) {
  switch (kind) {
    case JunctionKind::ordinary: return "ordinary";
    case JunctionKind::merge: return "merge";
    case JunctionKind::diverge: return "diverge";
    case JunctionKind::mixed: return "mixed";
  }
  return "unknown";
}

NetworkGraph::NetworkGraph(const std::vector<CellSpec>& specs) {
  auto node_for = [this](const std::string& label) -> std::optional<NodeId> {
    if (label.empty()) return std::nullopt;
    auto [it, inserted] = node_lookup_.try_emplace(label, node_ids_.size());
    if (inserted) node_ids_.push_back(label);
    return NodeId{it->second};
  };

  cells_.reserve(specs.size());
  for (const auto& spec : specs) {
    if (spec.id.empty()) throw ModelError("cell with empty id");
    if (!cell_lookup_.emplace(spec.id, cells_.size()).second) {
      throw ModelError("duplicate cell id '" + spec.id + "'");
    }
    if (spec.is_onramp && spec.is_offramp) {
      throw ModelError("cell '" + spec.id + "' is both onramp and offramp");
    }
    if (!(spec.length_mi > 0.0) || !std::isfinite(spec.length_mi)) {
      throw ModelError("cell '" + spec.id + "' must have positive length_mi");
    }
    if (!(spec.lanes > 0.0)) throw ModelError("cell '" + spec.id + "' must have positive lanes");
    if (!(spec.beta > 0.0 && spec.beta <= 1.0)) {
      throw ModelError("cell '" + spec.id + "' beta must lie in (0, 1]");
    }
    Cell c;
    c.id = spec.id;
    c.tail = node_for(spec.tail);
    c.head = node_for(spec.head);
    c.length_mi = spec.length_mi;
    c.lanes = spec.lanes;
    c.is_onramp = spec.is_onramp;
    c.is_offramp = spec.is_offramp;
    c.beta = spec.beta;
    cells_.push_back(std::move(c));
  }

  incoming_.assign(node_ids_.size(), {});
  outgoing_.assign(node_ids_.size(), {});
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].head) incoming_[cells_[i].head->index].push_back(CellId{i});
    if (cells_[i].tail) outgoing_[cells_[i].tail->index].push_back(CellId{i});
  }

  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!cells_[i].head) continue;
    for (CellId j : outgoing_[cells_[i].head->index]) adjacency_.emplace_back(CellId{i}, j);
  }
  std::sort(adjacency_.begin(), adjacency_.end());

  out_pairs_.assign(cells_.size(), {});
  in_pairs_.assign(cells_.size(), {});
  for (std::size_t p = 0; p < adjacency_.size(); ++p) {
    pair_lookup_.emplace(adjacency_[p], p);
    out_pairs_[adjacency_[p].first.index].push_back(p);
    in_pairs_[adjacency_[p].second.index].push_back(p);
  }
}

std::optional<CellId> NetworkGraph::find_cell(const std::string& id) const {
  auto it = cell_lookup_.find(id);
  if (it == cell_lookup_.end()) return std::nullopt;
  return CellId{it->second};
}

CellId NetworkGraph::cell_id(const std::string& id) const {
  auto found = find_cell(id);
  if (!found) throw ModelError("unknown cell id '" + id + "'");
  return *found;
}

std::optional<NodeId> NetworkGraph::find_node(const std::string& label) const {
  auto it = node_lookup_.find(label);
  if (it == node_lookup_.end()) return std::nullopt;
  return NodeId{it->second};
}

std::optional<std::size_t> NetworkGraph::pair_index(CellId from, CellId to) const {
  auto it = pair_lookup_.find({from, to});
  if (it == pair_lookup_.end()) return std::nullopt;
  return it->second;
}

JunctionKind classify_junction(const NetworkGraph& graph, NodeId node) {
  if (node.index >= graph.num_nodes()) {
    throw ModelError("unknown node id " + std::to_string(node.index));
  }
  const bool many_in = graph.incoming(node).size() > 1;
  const bool many_out = graph.outgoing(node).size() > 1;
  if (many_in && many_out) return JunctionKind::mixed;
  if (many_in) return JunctionKind::merge;
  if (many_out) return JunctionKind::diverge;
  return JunctionKind::ordinary;
}

std::vector<CellPair> adjacent_pairs(const NetworkGraph& graph) { return graph.adjacency(); }

CommoditySet::CommoditySet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ModelError("commodity set must not be empty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ModelError("empty commodity name");
    if (!seen.insert(n).second) throw ModelError("duplicate commodity '" + n + "'");
  }
}

std::optional<CommodityId> CommoditySet::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return CommodityId{static_cast<std::size_t>(it - names_.begin())};
}

CommodityId CommoditySet::id(const std::string& name) const {
  auto found = find(name);
  if (!found) throw ModelError("unknown commodity '" + name + "'");
  return *found;
}

RoutingSchedule::Segment& RoutingSchedule::segment_for_start(std::size_t t_start) {
  auto it = std::lower_bound(segments_.begin(), segments_.end(), t_start,
                             [](const Segment& s, std::size_t t) { return s.t_start < t; });
  if (it == segments_.end() || it->t_start != t_start) {
    Segment seg;
    seg.t_start = t_start;
    seg.entries.assign(commodities_, {});
    it = segments_.insert(it, std::move(seg));
  }
  return *it;
}

void RoutingSchedule::set(std::size_t t_start, CommodityId k, CellId from, CellId to, double ratio) {
  if (k.index >= commodities_) throw ModelError("routing entry for unknown commodity index");
  auto& row = segment_for_start(t_start).entries[k.index];
  for (auto& e : row) {
    if (e.from == from && e.to == to) {
      e.ratio = ratio;
      return;
    }
  }
  row.push_back({from, to, ratio});
}

std::size_t RoutingSchedule::segment_at(std::size_t t) const {
  if (segments_.empty() || segments_.front().t_start != 0) {
    throw ModelError("routing schedule must define a segment starting at t = 0");
  }
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](std::size_t v, const Segment& s) { return v < s.t_start; });
  return static_cast<std::size_t>(it - segments_.begin()) - 1;
}

ValidationReport validate_routing(const RoutingSchedule& schedule, const NetworkGraph& graph) {
  ValidationReport report;
  const std::size_t n = graph.num_cells();
  for (const auto& seg : schedule.segments()) {
    if (seg.entries.size() != schedule.commodities()) {
      throw ModelError("routing segment has wrong commodity count");
    }
    for (std::size_t k = 0; k < seg.entries.size(); ++k) {
      std::vector<double> row_sum(n, 0.0);
      for (const auto& e : seg.entries[k]) {
        if (e.from.index >= n || e.to.index >= n) {
          throw ModelError("routing entry references a cell outside the network");
        }
        if (!(e.ratio >= 0.0 && e.ratio <= 1.0)) {
          report.violations.push_back({RoutingViolation::Kind::out_of_range, seg.t_start,
                                       CommodityId{k}, e.from, e.to, e.ratio, 0.0});
        }
        if (e.ratio != 0.0 && !graph.adjacent(e.from, e.to)) {
          report.violations.push_back({RoutingViolation::Kind::outside_adjacency, seg.t_start,
                                       CommodityId{k}, e.from, e.to, e.ratio, 0.0});
        }
        row_sum[e.from.index] += e.ratio;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double target = graph.cells()[i].is_offramp ? 0.0 : 1.0;
        if (std::abs(row_sum[i] - target) > kRowSumTolerance) {
          report.violations.push_back({RoutingViolation::Kind::row_sum, seg.t_start,
                                       CommodityId{k}, CellId{i}, std::nullopt, row_sum[i],
                                       target});
        }
      }
    }
  }
  return report;
}

namespace {

std::string describe(const RoutingViolation& v, const NetworkGraph& graph) {
  std::string s = "commodity " + std::to_string(v.commodity.index) + ", t_start " +
                  std::to_string(v.t_start) + ", from '" + graph.cell(v.from).id + "'";
  switch (v.kind) {
    case RoutingViolation::Kind::row_sum:
      return "row sum " + std::to_string(v.value) + " != " + std::to_string(v.expected) + " (" +
             s + ")";
    case RoutingViolation::Kind::outside_adjacency:
      return "nonzero ratio to non-adjacent cell '" + graph.cell(*v.to).id + "' (" + s + ")";
    case RoutingViolation::Kind::out_of_range:
      return "ratio " + std::to_string(v.value) + " outside [0,1] (" + s + ")";
  }
  return s;
}

}  // namespace

RoutingTable::RoutingTable(const RoutingSchedule& schedule, const NetworkGraph& graph)
    : commodities_(schedule.commodities()), num_pairs_(graph.adjacency().size()) {
  auto report = validate_routing(schedule, graph);
  if (!report.ok()) {
    throw ModelError("invalid routing: " + describe(report.violations.front(), graph) + " and " +
                     std::to_string(report.violations.size() - 1) + " more");
  }
  if (schedule.segments().empty() || schedule.segments().front().t_start != 0) {
    throw ModelError("routing schedule must define a segment starting at t = 0");
  }
  starts_.reserve(schedule.segments().size());
  values_.assign(schedule.segments().size() * commodities_ * num_pairs_, 0.0);
  used_.assign(num_pairs_, false);
  for (std::size_t s = 0; s < schedule.segments().size(); ++s) {
    const auto& seg = schedule.segments()[s];
    starts_.push_back(seg.t_start);
    for (std::size_t k = 0; k < commodities_; ++k) {
      for (const auto& e : seg.entries[k]) {
        if (e.ratio == 0.0) continue;
        const std::size_t p = *graph.pair_index(e.from, e.to);
        values_[(s * commodities_ + k) * num_pairs_ + p] = e.ratio;
        used_[p] = true;
      }
    }
  }
}

std::size_t RoutingTable::segment_at(std::size_t t) const {
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  return static_cast<std::size_t>(it - starts_.begin()) - 1;
}

RoutingSchedule RoutingTable::to_schedule(const NetworkGraph& graph) const {
  RoutingSchedule out(commodities_);
  for (std::size_t s = 0; s < starts_.size(); ++s) {
    out.add_segment(starts_[s]);
    for (std::size_t k = 0; k < commodities_; ++k) {
      for (std::size_t p = 0; p < num_pairs_; ++p) {
        const double r = ratio_in_segment(s, CommodityId{k}, p);
        if (r > 0.0) {
          out.set(starts_[s], CommodityId{k}, graph.adjacency()[p].first,
                  graph.adjacency()[p].second, r);
        }
      }
    }
  }
  return out;
}

}  // namespace mcfnc
