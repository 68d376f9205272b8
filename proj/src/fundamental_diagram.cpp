#include "mcfnc/fundamental_diagram.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mcfnc {

DemandFunction::DemandFunction(std::vector<AffinePiece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw ModelError("demand function needs at least one piece");
  double min_intercept = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < pieces_.size(); ++p) {
    const auto& piece = pieces_[p];
    if (!std::isfinite(piece.slope) || !std::isfinite(piece.intercept)) {
      throw ModelError("demand piece must be finite");
    }
    if (piece.slope < 0.0) throw ModelError("demand slopes must be non-negative");
    if (piece.intercept < 0.0) throw ModelError("demand intercepts must be non-negative");
    if (p > 0 && piece.slope > pieces_[p - 1].slope) {
      throw ModelError("demand pieces must be ordered by decreasing slope");
    }
    min_intercept = std::min(min_intercept, piece.intercept);
  }
  if (min_intercept != 0.0) throw ModelError("demand function must vanish at zero volume");
}

double DemandFunction::operator()(double x) const {
  double value = std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces_) value = std::min(value, piece(x));
  return value;
}

SupplyFunction::SupplyFunction(std::vector<AffinePiece> pieces, std::vector<double> weights)
    : pieces_(std::move(pieces)), weights_(std::move(weights)), unbounded_(false) {
  if (pieces_.empty()) throw ModelError("supply function needs at least one piece");
  for (const auto& piece : pieces_) {
    if (!std::isfinite(piece.slope) || !std::isfinite(piece.intercept)) {
      throw ModelError("supply piece must be finite");
    }
    if (piece.slope > 0.0) throw ModelError("supply slopes must be non-positive");
  }
  for (double w : weights_) {
    if (!(w > 0.0)) throw ModelError("supply weights must be strictly positive");
  }
}

SupplyFunction SupplyFunction::unbounded(std::vector<double> weights) {
  for (double w : weights) {
    if (!(w > 0.0)) throw ModelError("supply weights must be strictly positive");
  }
  SupplyFunction s;
  s.weights_ = std::move(weights);
  s.unbounded_ = true;
  return s;
}

double SupplyFunction::operator()(double weighted_volume, SupplyMode mode) const {
  if (unbounded_) return kUnboundedSupply;
  double value = std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces_) value = std::min(value, piece(weighted_volume));
  return mode == SupplyMode::truncated ? std::max(0.0, value) : value;
}

double SupplyFunction::jam_weighted_volume() const {
  if (unbounded_ || pieces_.front().slope == 0.0) return std::numeric_limits<double>::infinity();
  return -pieces_.front().intercept / pieces_.front().slope;
}

FundamentalDiagram::FundamentalDiagram(std::size_t cells, std::size_t commodities)
    : commodities_(commodities),
      demand_(cells * commodities),
      supply_(cells, SupplyFunction::unbounded(std::vector<double>(commodities, 1.0))) {}

void FundamentalDiagram::validate() const {
  for (std::size_t i = 0; i < supply_.size(); ++i) {
    if (supply_[i].weights().size() != commodities_) {
      throw ModelError("supply of cell " + std::to_string(i) + " has " +
                       std::to_string(supply_[i].weights().size()) + " weights for " +
                       std::to_string(commodities_) + " commodities");
    }
  }
}

double demand(const DemandFunction& d, double x, double alpha) {
  if (x < 0.0) throw ModelError("demand evaluated at negative volume");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ModelError("control alpha outside [0, 1]");
  return alpha * d(x);
}

double supply(const SupplyFunction& s, double weighted_volume, SupplyMode mode) {
  if (weighted_volume < 0.0) throw ModelError("supply evaluated at negative weighted volume");
  return s(weighted_volume, mode);
}

double weighted_volume(const std::vector<double>& weights, const CellCommodityArray& state,
                       CellId cell) {
  if (weights.size() != state.commodities()) {
    throw ModelError("missing supply weight for a commodity");
  }
  double v = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) v += weights[k] * state(cell.index, k);
  return v;
}

double max_stable_step(const NetworkGraph& graph, const FundamentalDiagram& fd) {
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < graph.num_cells(); ++i) {
    const auto& c = graph.cells()[i];
    if (!(c.length_mi > 0.0)) throw ModelError("cell '" + c.id + "' has zero length");
    for (std::size_t k = 0; k < fd.commodities(); ++k) {
      const double slope = fd.demand(CellId{i}, CommodityId{k}).free_flow_slope();
      if (!(slope > 0.0) || !std::isfinite(slope)) {
        throw ModelError("cell '" + c.id + "' has zero or non-finite free-flow speed");
      }
      bound = std::min(bound, 1.0 / slope);
    }
  }
  return bound;
}

SupplyFunction make_length_weighted_supply(double wave_speed_mph, double length_mi, double lanes,
                                           double beta, const std::vector<double>& vehicle_lengths,
                                           const std::vector<double>& mix) {
  if (vehicle_lengths.size() != mix.size()) throw ModelError("mix/vehicle length size mismatch");
  double avg = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k) avg += mix[k] * vehicle_lengths[k];
  if (!(avg > 0.0)) throw ModelError("average vehicle length must be positive");
  if (!(beta > 0.0 && beta <= 1.0)) throw ModelError("beta must lie in (0, 1]");
  if (!(length_mi > 0.0)) throw ModelError("supply needs a positive cell length");
  const double rate = wave_speed_mph / length_mi / avg;
  return SupplyFunction({{-rate, rate * beta * length_mi * lanes}}, vehicle_lengths);
}

SupplyFunction make_car_truck_supply(const CarTruckSupplyParams& p) {
  return make_length_weighted_supply(p.wave_speed_mph, p.length_mi, p.lanes, p.beta,
                                     {p.car_length_mi, p.truck_length_mi},
                                     {p.car_fraction, 1.0 - p.car_fraction});
}

double car_truck_supply(const CarTruckSupplyParams& p, double x_car, double x_truck) {
  if (!(p.average_length() > 0.0)) throw ModelError("average vehicle length must be positive");
  if (x_car < 0.0 || x_truck < 0.0) throw ModelError("negative volume in supply");
  const double free_space =
      p.beta * p.length_mi * p.lanes - p.car_length_mi * x_car - p.truck_length_mi * x_truck;
  return std::max(0.0, (p.wave_speed_mph / p.length_mi) * free_space / p.average_length());
}

}  // namespace mcfnc
