#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "mcfnc/network.hpp"
#include "mcfnc/types.hpp"

namespace mcfnc {

/// y = intercept + slope * v. Slopes in 1/hour, intercepts in vehicles/hour.
struct AffinePiece {
  double slope{0.0};
  double intercept{0.0};
  double operator()(double v) const { return intercept + slope * v; }
};

/// Commodity demand d(x) = min_p (intercept_p + slope_p x), with slopes
/// non-negative and ordered by decreasing slope, and d(0) = 0. The linear
/// free-flow demand v_ff/L * x is the one-piece case.
class DemandFunction {
 public:
  DemandFunction() = default;
  explicit DemandFunction(std::vector<AffinePiece> pieces);

  static DemandFunction linear(double slope) { return DemandFunction({{slope, 0.0}}); }
  static DemandFunction free_flow(double speed_mph, double length_mi) {
    return linear(speed_mph / length_mi);
  }

  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  double operator()(double x) const;
  /// Slope at zero volume (the steepest piece), i.e. v_ff / L.
  double free_flow_slope() const { return pieces_.front().slope; }

 private:
  std::vector<AffinePiece> pieces_{{0.0, 0.0}};
};

enum class SupplyMode {
  truncated,  // max(0, s(v)), used by forward simulation
  affine,     // untruncated concave form, used by the relaxation
};

/// Aggregate supply s(sum_k w^(k) x^(k)) = min_p (intercept_p + slope_p v)
/// with non-positive slopes, or unbounded (accepts any inflow).
class SupplyFunction {
 public:
  SupplyFunction() = default;
  SupplyFunction(std::vector<AffinePiece> pieces, std::vector<double> weights);

  static SupplyFunction unbounded(std::vector<double> weights);

  bool is_unbounded() const { return unbounded_; }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Evaluates at a weighted volume; +inf for unbounded cells.
  double operator()(double weighted_volume, SupplyMode mode = SupplyMode::truncated) const;

  /// Weighted volume at which the (first) piece reaches zero.
  double jam_weighted_volume() const;

 private:
  std::vector<AffinePiece> pieces_;
  std::vector<double> weights_;
  bool unbounded_{true};
};

inline constexpr double kUnboundedSupply = std::numeric_limits<double>::infinity();

/// Per-cell, per-commodity demand and per-cell supply.
class FundamentalDiagram {
 public:
  FundamentalDiagram() = default;
  FundamentalDiagram(std::size_t cells, std::size_t commodities);

  std::size_t cells() const { return supply_.size(); }
  std::size_t commodities() const { return commodities_; }

  DemandFunction& demand(CellId i, CommodityId k) { return demand_.at(i.index * commodities_ + k.index); }
  const DemandFunction& demand(CellId i, CommodityId k) const {
    return demand_.at(i.index * commodities_ + k.index);
  }
  SupplyFunction& supply(CellId i) { return supply_.at(i.index); }
  const SupplyFunction& supply(CellId i) const { return supply_.at(i.index); }

  /// Throws ModelError if any weight vector does not match the commodity count.
  void validate() const;

 private:
  std::size_t commodities_{0};
  std::vector<DemandFunction> demand_;
  std::vector<SupplyFunction> supply_;
};

/// alpha * d(x). Throws ModelError for x < 0 or alpha outside [0, 1].
double demand(const DemandFunction& d, double x, double alpha = 1.0);

/// Throws ModelError for a negative weighted volume.
double supply(const SupplyFunction& s, double weighted_volume,
              SupplyMode mode = SupplyMode::truncated);

/// sum_k w^(k) x^(k) for one cell.
double weighted_volume(const std::vector<double>& weights, const CellCommodityArray& state,
                       CellId cell);

/// Largest step h satisfying h <= L_i / v_ff,i^(k) for all cells and
/// commodities (1 / steepest demand slope).
double max_stable_step(const NetworkGraph& graph, const FundamentalDiagram& fd);

/// Two-class length-based supply parameters (cars and trucks).
struct CarTruckSupplyParams {
  double wave_speed_mph{0.0};
  double length_mi{0.0};
  double lanes{1.0};
  double beta{1.0};
  double car_length_mi{0.0};
  double truck_length_mi{0.0};
  double car_fraction{1.0};

  double average_length() const {
    return car_fraction * car_length_mi + (1.0 - car_fraction) * truck_length_mi;
  }
};

/// s = max(0, (w/L) (beta L n - l_car x_car - l_truck x_truck) / l_avg).
double car_truck_supply(const CarTruckSupplyParams& params, double x_car, double x_truck);

/// The affine supply induced by the car/truck parameters, weights (l_car, l_truck).
SupplyFunction make_car_truck_supply(const CarTruckSupplyParams& params);

/// K-class generalisation: weights are vehicle lengths, the average length is
/// taken over the given mix shares (which must sum to 1).
SupplyFunction make_length_weighted_supply(double wave_speed_mph, double length_mi, double lanes,
                                           double beta, const std::vector<double>& vehicle_lengths,
                                           const std::vector<double>& mix);

}  // namespace mcfnc
