#include "mcfnc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mcfnc {

ControlSchedule ControlSchedule::uniform(std::size_t steps, std::size_t cells,
                                         std::size_t commodities, double value) {
  ControlSchedule c;
  c.alpha.assign(steps, CellCommodityArray(cells, commodities, value));
  return c;
}

InflowProfile InflowProfile::zero(std::size_t steps, std::size_t cells, std::size_t commodities) {
  InflowProfile p;
  p.rate.assign(steps, CellCommodityArray(cells, commodities, 0.0));
  return p;
}

double CostSpec::volume_cost(double x) const {
  if (volume_pieces.empty()) return 0.0;
  double value = -std::numeric_limits<double>::infinity();
  for (const auto& p : volume_pieces) value = std::max(value, p(x));
  return value;
}

void CostSpec::validate() const {
  if (outflow_per_mile > 0.0) throw ModelError("cost must be non-increasing in outflow");
  if (volume_pieces.empty()) return;
  for (const auto& p : volume_pieces) {
    if (!std::isfinite(p.slope) || !std::isfinite(p.intercept)) {
      throw ModelError("cost pieces must be finite");
    }
  }
  if (std::abs(volume_cost(0.0)) > 1e-12) throw ModelError("cost must vanish at zero volume");
  const double samples[] = {0.0, 0.5, 1.0, 10.0, 100.0, 1e3, 1e4};
  double prev = volume_cost(samples[0]);
  for (double x : samples) {
    const double v = volume_cost(x);
    if (v < prev - 1e-12) throw ModelError("cost must be non-decreasing in volume");
    prev = v;
  }
}

void check_cfl(const NetworkGraph& graph, const FundamentalDiagram& fd, double step_hours) {
  if (!(step_hours > 0.0) || !std::isfinite(step_hours)) {
    throw ModelError("step h must be positive");
  }
  const double bound = max_stable_step(graph, fd);
  if (step_hours > bound * (1.0 + 1e-12)) {
    throw ModelError("step h = " + std::to_string(step_hours) +
                     " h violates the CFL bound h <= min L/v_ff = " + std::to_string(bound) +
                     " h");
  }
}

namespace {

void check_shape(const CellCommodityArray& a, std::size_t cells, std::size_t commodities,
                 const std::string& what) {
  if (a.cells() != cells || a.commodities() != commodities) {
    throw ModelError(what + " has shape " + std::to_string(a.cells()) + "x" +
                     std::to_string(a.commodities()) + ", expected " + std::to_string(cells) +
                     "x" + std::to_string(commodities));
  }
}

}  // namespace

void Scenario::validate() const {
  const std::size_t n = graph.num_cells();
  const std::size_t k_count = commodities.size();
  if (k_count == 0) throw ModelError("scenario has no commodities");
  if (fd.cells() != n || fd.commodities() != k_count) {
    throw ModelError("fundamental diagram does not match network/commodities");
  }
  fd.validate();
  if (routing.commodities() != k_count || routing.num_pairs() != graph.adjacency().size()) {
    throw ModelError("routing does not match network/commodities");
  }
  if (inflow.steps() != steps) throw ModelError("inflow profile does not cover the horizon");
  if (control.steps() != steps) throw ModelError("control schedule does not cover the horizon");
  check_shape(initial, n, k_count, "initial_state");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_count; ++k) {
      const double x = initial(i, k);
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw ModelError("initial_state of cell '" + graph.cells()[i].id + "' is negative");
      }
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    check_shape(inflow.rate[t], n, k_count, "inflow");
    check_shape(control.alpha[t], n, k_count, "control");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < k_count; ++k) {
        const double lam = inflow.rate[t](i, k);
        if (!(lam >= 0.0) || !std::isfinite(lam)) {
          throw ModelError("inflow of cell '" + graph.cells()[i].id + "' is negative");
        }
        if (lam != 0.0 && !graph.cells()[i].is_onramp) {
          throw ModelError("inflow on non-onramp cell '" + graph.cells()[i].id + "'");
        }
        const double a = control.alpha[t](i, k);
        if (!(a >= 0.0 && a <= 1.0)) {
          throw ModelError("control of cell '" + graph.cells()[i].id + "' outside [0,1]");
        }
      }
    }
  }
  check_cfl(graph, fd, step_hours);
  cost.validate();
}

}  // namespace mcfnc
