#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mcfnc/lp.hpp"
#include "mcfnc/scenario.hpp"
#include "mcfnc/simulator.hpp"

namespace mcfnc {

/// A candidate (x, z, f) for the relaxed problem. f is indexed pair * K + k.
struct RelaxationPoint {
  std::vector<CellCommodityArray> x;  // t = 0..N
  std::vector<CellCommodityArray> z;  // t = 0..N-1
  std::vector<std::vector<double>> f;  // t = 0..N-1
};

/// Largest relative violation per constraint family. A row's relative
/// violation is |violation| / (1 + |rhs| + sum_j |a_j v_j|).
struct RelaxationResiduals {
  double initial{0.0};
  double dynamics{0.0};
  double demand{0.0};
  double supply{0.0};
  double splitting{0.0};
  double nonnegativity{0.0};

  double max() const;
};

/// The discrete-time relaxation as a linear program. The cell-to-cell flows
/// are substituted out with f = R z, so the LP carries x and z (and epigraph
/// variables for piecewise-linear volume costs) only.
///
/// Commodities flagged in `uncontrolled` keep alpha = 1: their demand rows
/// become equalities z = d(x), which requires a linear demand.
class RelaxationProblem {
 public:
  RelaxationProblem(Scenario scenario, CostSpec cost, std::vector<bool> uncontrolled = {});

  const Scenario& scenario() const { return scenario_; }
  const CostSpec& cost() const { return cost_; }
  const LinearProgram& lp() const { return lp_; }

  std::size_t x_var(std::size_t i, std::size_t k, std::size_t t) const;
  std::size_t z_var(std::size_t i, std::size_t k, std::size_t t) const;

  /// |E||K|(N+1) + |E||K|N + |A||K|N.
  std::size_t logical_variable_count() const;
  std::size_t num_state_variables() const;
  std::size_t num_outflow_variables() const;
  /// Pair flows that may be nonzero: pairs with R > 0 at some step.
  std::size_t num_pair_variables() const;
  std::size_t num_fixed_pair_variables() const;
  std::size_t num_epigraph_variables() const { return num_epigraph_; }

  std::size_t num_initial_rows() const { return num_initial_; }
  std::size_t num_dynamics_rows() const { return num_dynamics_; }
  std::size_t num_demand_rows() const { return num_demand_; }
  std::size_t num_supply_rows() const { return num_supply_; }

  /// Residuals of the full constraint set, splitting equalities included.
  RelaxationResiduals residuals(const RelaxationPoint& point) const;
  /// Value of the cost functional at a point.
  double objective(const RelaxationPoint& point) const;
  /// LP variable vector for a point (epigraph variables set to their cost).
  std::vector<double> to_lp_vector(const RelaxationPoint& point) const;
  RelaxationPoint from_lp_vector(const std::vector<double>& v) const;

 private:
  Scenario scenario_;
  CostSpec cost_;
  std::vector<bool> uncontrolled_;
  LinearProgram lp_;
  std::vector<bool> pair_active_;  // pair * K + k
  std::size_t num_epigraph_{0};
  std::size_t x_base_{0}, z_base_{0}, phi_base_{0};
  bool volume_linear_{true};
  double volume_slope_{1.0};
  std::size_t num_initial_{0}, num_dynamics_{0}, num_demand_{0}, num_supply_{0};
};

/// Throws ModelError for non-concave diagrams or a cost outside the LP class.
RelaxationProblem assemble_relaxation(const Scenario& scenario, const CostSpec& cost,
                                      const std::vector<bool>& uncontrolled = {});

struct RelaxationSolution {
  RelaxationPoint point;
  double objective{0.0};
  RelaxationResiduals residuals;
  LpStatus status{LpStatus::numerical_failure};
  int iterations{0};
  std::string message;
};

/// Raised when the relaxation has no feasible point.
class InfeasibleRelaxation : public RuntimeFailure {
 public:
  InfeasibleRelaxation(const std::string& what, std::vector<std::string> rows)
      : RuntimeFailure(what), rows_(std::move(rows)) {}
  const std::vector<std::string>& violated_rows() const { return rows_; }

 private:
  std::vector<std::string> rows_;
};

inline constexpr double kDefaultSolveTolerance = 1e-7;
inline constexpr double kDefaultTightnessTolerance = 1e-6;

/// Solves the LP and rebuilds f = R z. Throws InfeasibleRelaxation or
/// RuntimeFailure (unbounded, numerical failure).
RelaxationSolution solve_relaxation(const RelaxationProblem& problem,
                                    double tol = kDefaultSolveTolerance);

struct RecoveredControls {
  ControlSchedule schedule;
  double max_clamp{0.0};  // largest |alpha_raw - alpha| absorbed by clamping
};

/// alpha = z / d(x), with alpha = 1 when both vanish. Ratios outside [0,1]
/// by more than tol (relative to the demand) throw RuntimeFailure.
RecoveredControls recover_controls(const RelaxationPoint& point, const FundamentalDiagram& fd,
                                   double tol = kDefaultSolveTolerance);

struct TightnessReport {
  ControlSchedule schedule;
  double max_state_deviation{0.0};
  double max_flow_deviation{0.0};
  double min_gamma{1.0};
  double gamma_deficit{0.0};
  double simulated_cost{0.0};
  double relaxed_cost{0.0};
  double tolerance{kDefaultTightnessTolerance};
  bool pass{false};
  bool demand_violated{false};
  std::string failure;
};

/// Re-simulates under the schedule and compares with the relaxed point.
TightnessReport verify_tightness(const Scenario& scenario, const RelaxationPoint& point,
                                 const ControlSchedule& schedule,
                                 double tol = kDefaultTightnessTolerance);

/// Whether (1 - beta) a + beta b satisfies every constraint within tol.
bool convexity_probe(const RelaxationPoint& a, const RelaxationPoint& b, double beta,
                     const RelaxationProblem& problem, double tol = 1e-9);

/// The (x, z, f) of a simulated run.
RelaxationPoint point_from_trajectory(const Trajectory& trajectory);

/// One-commodity approximation: summed volumes and inflows, the reference
/// commodity's demand and supply weight, and routing averaged with the
/// network inflow shares of each step.
Scenario aggregate_single_commodity(const Scenario& scenario, std::size_t reference = 0);

/// Copies the one-commodity schedule onto every commodity.
ControlSchedule broadcast_controls(const ControlSchedule& single, std::size_t commodities);

/// Assembled, solved, recovered and verified in one go.
struct OptimizationResult {
  RelaxationSolution solution;
  RecoveredControls controls;
  TightnessReport tightness;
};
OptimizationResult optimize(const Scenario& scenario, const CostSpec& cost,
                            double solve_tol = kDefaultSolveTolerance,
                            double tightness_tol = kDefaultTightnessTolerance);

/// Optimal control of the commodities flagged in `controlled` while the rest
/// keep alpha = 1. Throws InfeasibleRelaxation when no such control keeps the
/// uncontrolled flows at their demand.
OptimizationResult optimize_partial(const Scenario& scenario, const CostSpec& cost,
                                    const std::vector<bool>& controlled,
                                    double solve_tol = kDefaultSolveTolerance,
                                    double tightness_tol = kDefaultTightnessTolerance);

/// Control of a subset of commodities with the others at alpha = 1. Fixing
/// alpha makes the problem non-convex, so this searches candidates instead:
/// the exact schedule of optimize_partial and the controlled-commodity part of
/// the full optimum, each blended towards alpha = 1 on a grid, and keeps the
/// one with the lowest simulated cost. Blend 0 is the uncontrolled run.
struct PartialControlResult {
  struct Candidate {
    std::string source;
    double blend{0.0};
    double cost{0.0};
  };
  ControlSchedule schedule;
  double cost{0.0};
  std::string source;
  double blend{0.0};
  std::vector<Candidate> evaluated;
  std::string restricted_failure;  // why the exact restricted LP was unusable
};
PartialControlResult partial_control(const Scenario& scenario, const CostSpec& cost,
                                     const std::vector<bool>& controlled,
                                     const OptimizationResult& full,
                                     double solve_tol = kDefaultSolveTolerance);

}  // namespace mcfnc
