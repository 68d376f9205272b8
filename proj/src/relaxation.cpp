#include "mcfnc/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mcfnc {

namespace {

std::string tag(std::size_t i, std::size_t k, std::size_t t) {
  return std::to_string(i) + "_" + std::to_string(k) + "_" + std::to_string(t);
}

double relative(double violation, double scale) { return std::abs(violation) / (1.0 + scale); }

void check_point_shape(const RelaxationPoint& p, const Scenario& s) {
  const std::size_t n = s.num_cells(), kc = s.num_commodities();
  if (p.x.size() != s.steps + 1 || p.z.size() != s.steps || p.f.size() != s.steps) {
    throw ModelError("relaxation point does not cover the scenario horizon");
  }
  for (const auto& a : p.x) {
    if (a.cells() != n || a.commodities() != kc) throw ModelError("state shape mismatch");
  }
  for (const auto& a : p.z) {
    if (a.cells() != n || a.commodities() != kc) throw ModelError("outflow shape mismatch");
  }
  for (const auto& v : p.f) {
    if (v.size() != s.graph.adjacency().size() * kc) throw ModelError("pair flow shape mismatch");
  }
}

}  // namespace

double RelaxationResiduals::max() const {
  return std::max({initial, dynamics, demand, supply, splitting, nonnegativity});
}

RelaxationProblem::RelaxationProblem(Scenario scenario, CostSpec cost,
                                     std::vector<bool> uncontrolled)
    : scenario_(std::move(scenario)), cost_(std::move(cost)), uncontrolled_(std::move(uncontrolled)) {
  scenario_.validate();
  cost_.validate();
  if (uncontrolled_.empty()) uncontrolled_.assign(scenario_.num_commodities(), false);
  if (uncontrolled_.size() != scenario_.num_commodities()) {
    throw ModelError("uncontrolled-commodity mask has the wrong size");
  }
  const auto& s = scenario_;
  const auto& g = s.graph;
  const std::size_t n = s.num_cells(), kc = s.num_commodities(), N = s.steps;
  const auto& pairs = g.adjacency();
  const double h = s.step_hours;

  pair_active_.assign(pairs.size() * kc, false);
  for (std::size_t seg = 0; seg < s.routing.num_segments(); ++seg) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (std::size_t k = 0; k < kc; ++k) {
        if (s.routing.ratio_in_segment(seg, CommodityId{k}, p) > 0.0) pair_active_[p * kc + k] = true;
      }
    }
  }

  // A single zero-intercept piece is a linear cost; anything else gets an
  // epigraph variable per (i, k, t).
  const auto& pieces = cost_.volume_pieces;
  volume_linear_ = pieces.empty() || (pieces.size() == 1 && pieces[0].intercept == 0.0);
  volume_slope_ = pieces.empty() ? 0.0 : pieces[0].slope;

  x_base_ = 0;
  for (std::size_t t = 0; t <= N; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        lp_.add_variable("x_" + tag(i, k, t), volume_linear_ ? volume_slope_ : 0.0);
      }
    }
  }
  z_base_ = lp_.num_variables();
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        lp_.add_variable("z_" + tag(i, k, t), cost_.outflow_per_mile * g.cells()[i].length_mi);
      }
    }
  }
  phi_base_ = lp_.num_variables();
  if (!volume_linear_) {
    for (std::size_t t = 0; t <= N; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < kc; ++k) {
          const std::size_t v = lp_.add_variable("phi_" + tag(i, k, t), 1.0);
          ++num_epigraph_;
          for (std::size_t q = 0; q < pieces.size(); ++q) {
            const auto r = lp_.add_row("epi_" + tag(i, k, t) + "_" + std::to_string(q),
                                       LinearProgram::Sense::geq, pieces[q].intercept);
            lp_.add_coefficient(r, v, 1.0);
            lp_.add_coefficient(r, x_var(i, k, t), -pieces[q].slope);
          }
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kc; ++k) {
      const auto r = lp_.add_row("init_" + std::to_string(i) + "_" + std::to_string(k),
                                 LinearProgram::Sense::eq, s.initial(i, k));
      lp_.add_coefficient(r, x_var(i, k, 0), 1.0);
      ++num_initial_;
    }
  }

  for (std::size_t t = 0; t < N; ++t) {
    const std::size_t seg = s.routing.segment_at(t);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        const auto r = lp_.add_row("dyn_" + tag(i, k, t), LinearProgram::Sense::eq,
                                   h * s.inflow.rate[t](i, k));
        lp_.add_coefficient(r, x_var(i, k, t + 1), 1.0);
        lp_.add_coefficient(r, x_var(i, k, t), -1.0);
        lp_.add_coefficient(r, z_var(i, k, t), h);
        for (std::size_t p : g.in_pairs(CellId{i})) {
          const std::size_t src = pairs[p].first.index;
          if (g.cells()[src].is_offramp) continue;
          const double R = s.routing.ratio_in_segment(seg, CommodityId{k}, p);
          if (R > 0.0) lp_.add_coefficient(r, z_var(src, k, t), -h * R);
        }
        ++num_dynamics_;

        const auto& dpieces = s.fd.demand(CellId{i}, CommodityId{k}).pieces();
        // alpha = 1 is only linear for a linear demand: z = slope * x.
        const bool fixed = uncontrolled_[k];
        if (fixed && (dpieces.size() != 1 || dpieces[0].intercept != 0.0)) {
          throw ModelError("commodity '" + s.commodities.name(CommodityId{k}) +
                           "' can only be left uncontrolled with a linear demand");
        }
        for (std::size_t q = 0; q < dpieces.size(); ++q) {
          const auto d = lp_.add_row("dem_" + tag(i, k, t) + "_" + std::to_string(q),
                                     fixed ? LinearProgram::Sense::eq : LinearProgram::Sense::leq,
                                     dpieces[q].intercept);
          lp_.add_coefficient(d, z_var(i, k, t), 1.0);
          lp_.add_coefficient(d, x_var(i, k, t), -dpieces[q].slope);
          ++num_demand_;
        }
      }
    }

    for (std::size_t j = 0; j < n; ++j) {
      const auto& sup = s.fd.supply(CellId{j});
      if (sup.is_unbounded()) continue;
      std::vector<std::pair<std::size_t, double>> inflow_terms;
      for (std::size_t p : g.in_pairs(CellId{j})) {
        const std::size_t src = pairs[p].first.index;
        if (g.cells()[src].is_offramp) continue;
        for (std::size_t k = 0; k < kc; ++k) {
          const double R = s.routing.ratio_in_segment(seg, CommodityId{k}, p);
          if (R > 0.0) inflow_terms.push_back({z_var(src, k, t), R});
        }
      }
      if (inflow_terms.empty()) continue;
      for (std::size_t q = 0; q < sup.pieces().size(); ++q) {
        const auto& piece = sup.pieces()[q];
        const auto r = lp_.add_row("sup_" + std::to_string(j) + "_" + std::to_string(t) + "_" +
                                       std::to_string(q),
                                   LinearProgram::Sense::leq, piece.intercept);
        for (const auto& [var, R] : inflow_terms) lp_.add_coefficient(r, var, R);
        for (std::size_t k = 0; k < kc; ++k) {
          lp_.add_coefficient(r, x_var(j, k, t), -piece.slope * sup.weights()[k]);
        }
        ++num_supply_;
      }
    }
  }
}

std::size_t RelaxationProblem::x_var(std::size_t i, std::size_t k, std::size_t t) const {
  const std::size_t n = scenario_.num_cells(), kc = scenario_.num_commodities();
  return x_base_ + (t * n + i) * kc + k;
}

std::size_t RelaxationProblem::z_var(std::size_t i, std::size_t k, std::size_t t) const {
  const std::size_t n = scenario_.num_cells(), kc = scenario_.num_commodities();
  return z_base_ + (t * n + i) * kc + k;
}

std::size_t RelaxationProblem::num_state_variables() const {
  return scenario_.num_cells() * scenario_.num_commodities() * (scenario_.steps + 1);
}

std::size_t RelaxationProblem::num_outflow_variables() const {
  return scenario_.num_cells() * scenario_.num_commodities() * scenario_.steps;
}

std::size_t RelaxationProblem::num_pair_variables() const {
  return static_cast<std::size_t>(std::count(pair_active_.begin(), pair_active_.end(), true)) *
         scenario_.steps;
}

std::size_t RelaxationProblem::num_fixed_pair_variables() const {
  return pair_active_.size() * scenario_.steps - num_pair_variables();
}

std::size_t RelaxationProblem::logical_variable_count() const {
  const std::size_t e = scenario_.num_cells(), kc = scenario_.num_commodities();
  const std::size_t a = scenario_.graph.adjacency().size(), N = scenario_.steps;
  return e * kc * (N + 1) + e * kc * N + a * kc * N;
}

RelaxationResiduals RelaxationProblem::residuals(const RelaxationPoint& point) const {
  const auto& s = scenario_;
  check_point_shape(point, s);
  const auto& g = s.graph;
  const auto& pairs = g.adjacency();
  const std::size_t n = s.num_cells(), kc = s.num_commodities();
  const double h = s.step_hours;
  RelaxationResiduals r;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kc; ++k) {
      r.initial = std::max(r.initial, relative(point.x[0](i, k) - s.initial(i, k),
                                               std::abs(s.initial(i, k)) + std::abs(point.x[0](i, k))));
    }
  }
  for (const auto& x : point.x) {
    for (double v : x.values()) r.nonnegativity = std::max(r.nonnegativity, std::max(0.0, -v));
  }
  for (const auto& z : point.z) {
    for (double v : z.values()) r.nonnegativity = std::max(r.nonnegativity, std::max(0.0, -v));
  }
  for (const auto& f : point.f) {
    for (double v : f) r.nonnegativity = std::max(r.nonnegativity, std::max(0.0, -v));
  }

  for (std::size_t t = 0; t < s.steps; ++t) {
    const std::size_t seg = s.routing.segment_at(t);
    const auto& x = point.x[t];
    const auto& z = point.z[t];
    const auto& f = point.f[t];
    std::vector<double> into(n * kc, 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (std::size_t k = 0; k < kc; ++k) into[pairs[p].second.index * kc + k] += f[p * kc + k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        const double lam = s.inflow.rate[t](i, k);
        const double in = into[i * kc + k];
        const double next = point.x[t + 1](i, k);
        const double viol = next - x(i, k) - h * (lam + in - z(i, k));
        r.dynamics = std::max(
            r.dynamics,
            relative(viol, std::abs(next) + std::abs(x(i, k)) + h * (lam + std::abs(in) + std::abs(z(i, k)))));
        for (const auto& pc : s.fd.demand(CellId{i}, CommodityId{k}).pieces()) {
          const double cap = pc(x(i, k));
          r.demand = std::max(r.demand, relative(std::max(0.0, z(i, k) - cap),
                                                 std::abs(z(i, k)) + std::abs(cap)));
        }
      }
      // Splitting: f = R z out of every non-offramp cell.
      for (std::size_t p : g.out_pairs(CellId{i})) {
        for (std::size_t k = 0; k < kc; ++k) {
          const double want = g.cells()[i].is_offramp
                                  ? 0.0
                                  : s.routing.ratio_in_segment(seg, CommodityId{k}, p) * z(i, k);
          const double got = f[p * kc + k];
          r.splitting = std::max(r.splitting, relative(got - want, std::abs(got) + std::abs(want)));
        }
      }
      // Non-offramp cells must send all of z somewhere.
      if (!g.cells()[i].is_offramp) {
        for (std::size_t k = 0; k < kc; ++k) {
          double sent = 0.0;
          for (std::size_t p : g.out_pairs(CellId{i})) sent += f[p * kc + k];
          r.splitting = std::max(r.splitting, relative(sent - z(i, k), std::abs(sent) + std::abs(z(i, k))));
        }
      }
      const auto& sup = s.fd.supply(CellId{i});
      if (sup.is_unbounded()) continue;
      bool routed = false;
      for (std::size_t p : g.in_pairs(CellId{i})) {
        if (g.cells()[pairs[p].first.index].is_offramp) continue;
        for (std::size_t k = 0; k < kc; ++k) {
          routed = routed || s.routing.ratio_in_segment(seg, CommodityId{k}, p) > 0.0;
        }
      }
      if (!routed) continue;
      double total_in = 0.0;
      for (std::size_t k = 0; k < kc; ++k) total_in += into[i * kc + k];
      const double v = weighted_volume(sup.weights(), x, CellId{i});
      for (const auto& pc : sup.pieces()) {
        const double cap = pc(v);
        r.supply = std::max(r.supply, relative(std::max(0.0, total_in - cap),
                                               std::abs(total_in) + std::abs(cap)));
      }
    }
  }
  return r;
}

double RelaxationProblem::objective(const RelaxationPoint& point) const {
  check_point_shape(point, scenario_);
  double total = 0.0;
  for (const auto& x : point.x) {
    for (double v : x.values()) total += cost_.volume_cost(v);
  }
  for (const auto& z : point.z) {
    for (std::size_t i = 0; i < z.cells(); ++i) {
      total += cost_.outflow_per_mile * scenario_.graph.cells()[i].length_mi * z.cell_sum(i);
    }
  }
  return total;
}

std::vector<double> RelaxationProblem::to_lp_vector(const RelaxationPoint& point) const {
  check_point_shape(point, scenario_);
  const std::size_t n = scenario_.num_cells(), kc = scenario_.num_commodities(), N = scenario_.steps;
  std::vector<double> v(lp_.num_variables(), 0.0);
  for (std::size_t t = 0; t <= N; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        v[x_var(i, k, t)] = point.x[t](i, k);
        if (!volume_linear_) {
          v[phi_base_ + (t * n + i) * kc + k] = cost_.volume_cost(point.x[t](i, k));
        }
        if (t < N) v[z_var(i, k, t)] = point.z[t](i, k);
      }
    }
  }
  return v;
}

RelaxationPoint RelaxationProblem::from_lp_vector(const std::vector<double>& v) const {
  if (v.size() != lp_.num_variables()) throw ModelError("LP vector size mismatch");
  const auto& s = scenario_;
  const std::size_t n = s.num_cells(), kc = s.num_commodities(), N = s.steps;
  const auto& pairs = s.graph.adjacency();
  RelaxationPoint p;
  p.x.assign(N + 1, CellCommodityArray(n, kc));
  p.z.assign(N, CellCommodityArray(n, kc));
  p.f.assign(N, std::vector<double>(pairs.size() * kc, 0.0));
  for (std::size_t t = 0; t <= N; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        p.x[t](i, k) = v[x_var(i, k, t)];
        if (t < N) p.z[t](i, k) = v[z_var(i, k, t)];
      }
    }
  }
  for (std::size_t t = 0; t < N; ++t) {
    const std::size_t seg = s.routing.segment_at(t);
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const std::size_t src = pairs[q].first.index;
      if (s.graph.cells()[src].is_offramp) continue;
      for (std::size_t k = 0; k < kc; ++k) {
        p.f[t][q * kc + k] = s.routing.ratio_in_segment(seg, CommodityId{k}, q) * p.z[t](src, k);
      }
    }
  }
  return p;
}

RelaxationProblem assemble_relaxation(const Scenario& scenario, const CostSpec& cost,
                                      const std::vector<bool>& uncontrolled) {
  return RelaxationProblem(scenario, cost, uncontrolled);
}

RelaxationSolution solve_relaxation(const RelaxationProblem& problem, double tol) {
  if (!(tol > 0.0)) throw ModelError("solver tolerance must be positive");
  LpOptions opt;
  opt.tolerance = tol / 100.0;
  const LpResult lp = solve_lp(problem.lp(), opt);
  RelaxationSolution sol;
  sol.status = lp.status;
  sol.iterations = lp.iterations;
  sol.message = lp.message;
  if (lp.status == LpStatus::infeasible) {
    std::vector<std::string> rows;
    for (auto r : lp.violated_rows) rows.push_back(problem.lp().rows()[r].name);
    std::string what = "relaxation is infeasible";
    if (!rows.empty()) {
      what += "; violated rows:";
      for (std::size_t i = 0; i < rows.size() && i < 20; ++i) what += " " + rows[i];
      if (rows.size() > 20) what += " ...";
    }
    throw InfeasibleRelaxation(what, std::move(rows));
  }
  if (lp.status == LpStatus::unbounded) {
    throw RuntimeFailure("relaxation is unbounded; the cost must be bounded below");
  }
  if (lp.status != LpStatus::optimal) {
    throw RuntimeFailure(std::string("LP solve failed (") + to_string(lp.status) + "): " +
                         lp.message);
  }
  sol.point = problem.from_lp_vector(lp.x);
  sol.objective = problem.objective(sol.point);
  sol.residuals = problem.residuals(sol.point);
  if (sol.residuals.max() > tol) {
    throw RuntimeFailure("LP solution residual " + std::to_string(sol.residuals.max()) +
                         " exceeds tolerance " + std::to_string(tol));
  }
  return sol;
}

RecoveredControls recover_controls(const RelaxationPoint& point, const FundamentalDiagram& fd,
                                   double tol) {
  RecoveredControls out;
  const std::size_t steps = point.z.size();
  if (point.x.size() != steps + 1) throw ModelError("relaxation point is inconsistent");
  out.schedule.alpha.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& z = point.z[t];
    const auto& x = point.x[t];
    if (z.cells() != fd.cells() || z.commodities() != fd.commodities()) {
      throw ModelError("relaxation point does not match the fundamental diagram");
    }
    CellCommodityArray alpha(z.cells(), z.commodities(), 1.0);
    for (std::size_t i = 0; i < z.cells(); ++i) {
      for (std::size_t k = 0; k < z.commodities(); ++k) {
        const double zv = z(i, k);
        const double d = fd.demand(CellId{i}, CommodityId{k})(std::max(0.0, x(i, k)));
        const double flow_tol = tol * (1.0 + d);
        double a;
        if (d <= 0.0) {
          if (std::abs(zv) > flow_tol) {
            throw RuntimeFailure("outflow " + std::to_string(zv) + " at zero demand (cell " +
                                 std::to_string(i) + ", step " + std::to_string(t) + ")");
          }
          a = 1.0;
        } else {
          const double raw = zv / d;
          a = std::clamp(raw, 0.0, 1.0);
          const double excursion = std::abs(raw - a);
          if (excursion > tol && std::abs(zv - a * d) > flow_tol) {
            throw RuntimeFailure("outflow exceeds demand by " + std::to_string(zv - d) +
                                 " veh/h (cell " + std::to_string(i) + ", step " +
                                 std::to_string(t) + ")");
          }
          out.max_clamp = std::max(out.max_clamp, std::abs(zv - a * d));
        }
        alpha(i, k) = a;
      }
    }
    out.schedule.alpha.push_back(std::move(alpha));
  }
  return out;
}

TightnessReport verify_tightness(const Scenario& scenario, const RelaxationPoint& point,
                                 const ControlSchedule& schedule, double tol) {
  check_point_shape(point, scenario);
  if (schedule.steps() != scenario.steps) {
    throw ModelError("schedule horizon does not match the scenario");
  }
  TightnessReport rep;
  rep.schedule = schedule;
  rep.tolerance = tol;
  for (std::size_t t = 0; t < scenario.steps && !rep.demand_violated; ++t) {
    for (std::size_t i = 0; i < scenario.num_cells(); ++i) {
      for (std::size_t k = 0; k < scenario.num_commodities(); ++k) {
        const double d = scenario.fd.demand(CellId{i}, CommodityId{k})(std::max(0.0, point.x[t](i, k)));
        if (point.z[t](i, k) > d + tol * (1.0 + d)) rep.demand_violated = true;
      }
    }
  }

  const Trajectory traj = simulate(scenario, schedule);
  for (std::size_t t = 0; t <= scenario.steps; ++t) {
    const auto& a = traj.states[t].values();
    const auto& b = point.x[t].values();
    for (std::size_t q = 0; q < a.size(); ++q) {
      rep.max_state_deviation = std::max(rep.max_state_deviation, std::abs(a[q] - b[q]));
    }
  }
  for (std::size_t t = 0; t < scenario.steps; ++t) {
    const auto& rec = traj.flows[t];
    for (double gma : rec.gamma) rep.min_gamma = std::min(rep.min_gamma, gma);
    const auto& za = rec.outflow.values();
    const auto& zb = point.z[t].values();
    for (std::size_t q = 0; q < za.size(); ++q) {
      rep.max_flow_deviation = std::max(rep.max_flow_deviation, std::abs(za[q] - zb[q]));
    }
    for (std::size_t q = 0; q < rec.pair_flow.size(); ++q) {
      rep.max_flow_deviation =
          std::max(rep.max_flow_deviation, std::abs(rec.pair_flow[q] - point.f[t][q]));
    }
  }
  rep.gamma_deficit = 1.0 - rep.min_gamma;
  rep.simulated_cost = evaluate_cost(traj, scenario.cost, scenario.graph);
  {
    double relaxed = 0.0;
    for (const auto& x : point.x) {
      for (double v : x.values()) relaxed += scenario.cost.volume_cost(v);
    }
    for (const auto& z : point.z) {
      for (std::size_t i = 0; i < z.cells(); ++i) {
        relaxed += scenario.cost.outflow_per_mile * scenario.graph.cells()[i].length_mi * z.cell_sum(i);
      }
    }
    rep.relaxed_cost = relaxed;
  }
  rep.pass = rep.max_state_deviation <= tol && rep.min_gamma >= 1.0 - tol && !rep.demand_violated;
  if (!rep.pass) {
    if (rep.demand_violated) {
      rep.failure = "relaxed outflow exceeds demand";
    } else if (rep.min_gamma < 1.0 - tol) {
      rep.failure = "congestion in re-simulation (min gamma " + std::to_string(rep.min_gamma) + ")";
    } else {
      rep.failure = "state deviation " + std::to_string(rep.max_state_deviation);
    }
  }
  return rep;
}

bool convexity_probe(const RelaxationPoint& a, const RelaxationPoint& b, double beta,
                     const RelaxationProblem& problem, double tol) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ModelError("beta must lie in [0, 1]");
  check_point_shape(a, problem.scenario());
  check_point_shape(b, problem.scenario());
  RelaxationPoint c = a;
  auto mix = [beta](double u, double v) { return (1.0 - beta) * u + beta * v; };
  for (std::size_t t = 0; t < c.x.size(); ++t) {
    for (std::size_t i = 0; i < c.x[t].cells(); ++i) {
      for (std::size_t k = 0; k < c.x[t].commodities(); ++k) {
        c.x[t](i, k) = mix(a.x[t](i, k), b.x[t](i, k));
        if (t < c.z.size()) c.z[t](i, k) = mix(a.z[t](i, k), b.z[t](i, k));
      }
    }
  }
  for (std::size_t t = 0; t < c.f.size(); ++t) {
    for (std::size_t q = 0; q < c.f[t].size(); ++q) c.f[t][q] = mix(a.f[t][q], b.f[t][q]);
  }
  return problem.residuals(c).max() <= tol;
}

RelaxationPoint point_from_trajectory(const Trajectory& trajectory) {
  RelaxationPoint p;
  p.x = trajectory.states;
  for (const auto& rec : trajectory.flows) {
    p.z.push_back(rec.outflow);
    p.f.push_back(rec.pair_flow);
  }
  return p;
}

Scenario aggregate_single_commodity(const Scenario& scenario, std::size_t reference) {
  const std::size_t kc = scenario.num_commodities();
  if (kc == 1) return scenario;
  if (reference >= kc) throw ModelError("reference commodity out of range");
  const std::size_t n = scenario.num_cells(), N = scenario.steps;
  const auto& g = scenario.graph;
  const auto& pairs = g.adjacency();

  FundamentalDiagram fd(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    fd.demand(CellId{i}, CommodityId{0}) = scenario.fd.demand(CellId{i}, CommodityId{reference});
    const auto& sup = scenario.fd.supply(CellId{i});
    const std::vector<double> w{sup.weights().at(reference)};
    fd.supply(CellId{i}) =
        sup.is_unbounded() ? SupplyFunction::unbounded(w) : SupplyFunction(sup.pieces(), w);
  }

  // Commodity shares of the network inflow at each step; steps without inflow
  // fall back to shares of the total mass over the horizon.
  std::vector<double> mass(kc, 0.0);
  for (std::size_t k = 0; k < kc; ++k) {
    for (std::size_t i = 0; i < n; ++i) mass[k] += scenario.initial(i, k);
    for (std::size_t t = 0; t < N; ++t) {
      for (std::size_t i = 0; i < n; ++i) mass[k] += scenario.step_hours * scenario.inflow.rate[t](i, k);
    }
  }
  auto normalise = [kc](std::vector<double> v) {
    double total = 0.0;
    for (double x : v) total += x;
    if (total <= 0.0) return std::vector<double>(kc, 1.0 / static_cast<double>(kc));
    for (double& x : v) x /= total;
    return v;
  };
  const auto fallback = normalise(mass);

  RoutingSchedule schedule(1);
  std::vector<double> prev_ratio;
  const std::size_t horizon = std::max<std::size_t>(N, 1);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<double> share(kc, 0.0);
    double total = 0.0;
    if (t < N) {
      for (std::size_t k = 0; k < kc; ++k) {
        for (std::size_t i = 0; i < n; ++i) share[k] += scenario.inflow.rate[t](i, k);
        total += share[k];
      }
    }
    share = total > 0.0 ? normalise(share) : fallback;
    const std::size_t seg = scenario.routing.segment_at(t);
    std::vector<double> ratio(pairs.size(), 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (std::size_t k = 0; k < kc; ++k) {
        ratio[p] += share[k] * scenario.routing.ratio_in_segment(seg, CommodityId{k}, p);
      }
    }
    if (ratio == prev_ratio) continue;
    schedule.add_segment(t);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (ratio[p] > 0.0) schedule.set(t, CommodityId{0}, pairs[p].first, pairs[p].second, ratio[p]);
    }
    prev_ratio = std::move(ratio);
  }

  InflowProfile inflow = InflowProfile::zero(N, n, 1);
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t i = 0; i < n; ++i) inflow.rate[t](i, 0) = scenario.inflow.rate[t].cell_sum(i);
  }
  ControlSchedule control = ControlSchedule::uniform(N, n, 1);
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t i = 0; i < n; ++i) control.alpha[t](i, 0) = scenario.control.alpha[t](i, reference);
  }
  CellCommodityArray initial(n, 1);
  for (std::size_t i = 0; i < n; ++i) initial(i, 0) = scenario.initial.cell_sum(i);

  Scenario out{g,
               CommoditySet({"aggregate"}),
               std::move(fd),
               RoutingTable(schedule, g),
               std::move(inflow),
               std::move(control),
               std::move(initial),
               scenario.step_hours,
               N,
               scenario.cost};
  return out;
}

ControlSchedule broadcast_controls(const ControlSchedule& single, std::size_t commodities) {
  ControlSchedule out;
  for (const auto& a : single.alpha) {
    if (a.commodities() != 1) throw ModelError("broadcast expects a one-commodity schedule");
    CellCommodityArray b(a.cells(), commodities);
    for (std::size_t i = 0; i < a.cells(); ++i) {
      for (std::size_t k = 0; k < commodities; ++k) b(i, k) = a(i, 0);
    }
    out.alpha.push_back(std::move(b));
  }
  return out;
}

OptimizationResult optimize(const Scenario& scenario, const CostSpec& cost, double solve_tol,
                            double tightness_tol) {
  OptimizationResult r;
  Scenario s = scenario;
  s.cost = cost;
  const RelaxationProblem problem = assemble_relaxation(s, cost);
  r.solution = solve_relaxation(problem, solve_tol);
  r.controls = recover_controls(r.solution.point, s.fd, solve_tol);
  r.tightness = verify_tightness(s, r.solution.point, r.controls.schedule, tightness_tol);
  return r;
}

OptimizationResult optimize_partial(const Scenario& scenario, const CostSpec& cost,
                                    const std::vector<bool>& controlled, double solve_tol,
                                    double tightness_tol) {
  if (controlled.size() != scenario.num_commodities()) {
    throw ModelError("controlled-commodity mask has the wrong size");
  }
  std::vector<bool> fixed(controlled.size());
  for (std::size_t k = 0; k < controlled.size(); ++k) fixed[k] = !controlled[k];
  OptimizationResult r;
  Scenario s = scenario;
  s.cost = cost;
  const RelaxationProblem problem = assemble_relaxation(s, cost, fixed);
  r.solution = solve_relaxation(problem, solve_tol);
  r.controls = recover_controls(r.solution.point, s.fd, solve_tol);
  for (auto& a : r.controls.schedule.alpha) {
    for (std::size_t i = 0; i < a.cells(); ++i) {
      for (std::size_t k = 0; k < fixed.size(); ++k) {
        if (fixed[k]) a(i, k) = 1.0;
      }
    }
  }
  r.tightness = verify_tightness(s, r.solution.point, r.controls.schedule, tightness_tol);
  return r;
}

PartialControlResult partial_control(const Scenario& scenario, const CostSpec& cost,
                                     const std::vector<bool>& controlled,
                                     const OptimizationResult& full, double solve_tol) {
  const std::size_t kc = scenario.num_commodities();
  if (controlled.size() != kc) throw ModelError("controlled-commodity mask has the wrong size");

  std::vector<std::pair<std::string, ControlSchedule>> sources;
  PartialControlResult out;
  try {
    auto restricted = optimize_partial(scenario, cost, controlled, solve_tol);
    sources.emplace_back("restricted", std::move(restricted.controls.schedule));
  } catch (const RuntimeFailure& e) {
    out.restricted_failure = e.what();
  }
  ControlSchedule projected = full.controls.schedule;
  for (auto& a : projected.alpha) {
    for (std::size_t i = 0; i < a.cells(); ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        if (!controlled[k]) a(i, k) = 1.0;
      }
    }
  }
  sources.emplace_back("projected", std::move(projected));

  out.cost = kInf;
  for (const auto& [name, schedule] : sources) {
    for (int q = 0; q <= 10; ++q) {
      const double theta = 0.1 * q;
      ControlSchedule u = schedule;
      for (auto& a : u.alpha) {
        for (double& v : a.values()) v = theta * v + (1.0 - theta);
      }
      const double c = evaluate_cost(simulate(scenario, u), cost, scenario.graph);
      out.evaluated.push_back({name, theta, c});
      if (c < out.cost) {
        out.cost = c;
        out.schedule = std::move(u);
        out.source = q == 0 ? "uncontrolled" : name;
        out.blend = theta;
      }
    }
  }
  return out;
}

}  // namespace mcfnc
