#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcfnc {

/// Dense index of a cell (a link of the network multigraph).
struct CellId {
  std::size_t index{0};
  auto operator<=>(const CellId&) const = default;
};

/// Dense index of a junction node.
struct NodeId {
  std::size_t index{0};
  auto operator<=>(const NodeId&) const = default;
};

/// Dense index of a commodity (vehicle class).
struct CommodityId {
  std::size_t index{0};
  auto operator<=>(const CommodityId&) const = default;
};

/// Invalid input or violated precondition (bad config, dimension mismatch,
/// CFL violation, ...).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while running an otherwise valid model.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense cells x commodities array of doubles, row-major by cell.
///
/// Used for traffic volumes, outflows, inflow rates and control values at a
/// single time step.
class CellCommodityArray {
 public:
  CellCommodityArray() = default;
  CellCommodityArray(std::size_t cells, std::size_t commodities, double fill = 0.0)
      : cells_(cells), commodities_(commodities), data_(cells * commodities, fill) {}

  std::size_t cells() const { return cells_; }
  std::size_t commodities() const { return commodities_; }

  double& operator()(std::size_t cell, std::size_t commodity) {
    return data_[cell * commodities_ + commodity];
  }
  double operator()(std::size_t cell, std::size_t commodity) const {
    return data_[cell * commodities_ + commodity];
  }
  double& operator()(CellId cell, CommodityId commodity) {
    return (*this)(cell.index, commodity.index);
  }
  double operator()(CellId cell, CommodityId commodity) const {
    return (*this)(cell.index, commodity.index);
  }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  double sum() const;
  double cell_sum(std::size_t cell) const;
  double min() const;

  bool operator==(const CellCommodityArray&) const = default;

 private:
  std::size_t cells_{0};
  std::size_t commodities_{0};
  std::vector<double> data_;
};

}  // namespace mcfnc

template <>
struct std::hash<mcfnc::CellId> {
  std::size_t operator()(const mcfnc::CellId& id) const noexcept { return id.index; }
};
