#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace mcfnc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min c'x + offset  s.t.  rows (<=, >=, =),  lower <= x <= upper.
class LinearProgram {
 public:
  enum class Sense { leq, geq, eq };

  struct Row {
    std::string name;
    Sense sense;
    double rhs;
  };

  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  std::size_t add_variable(std::string name, double cost = 0.0, double lower = 0.0,
                           double upper = kInf);
  std::size_t add_row(std::string name, Sense sense, double rhs);
  /// Duplicate (row, col) entries are summed.
  void add_coefficient(std::size_t row, std::size_t col, double value);

  std::size_t num_variables() const { return names_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  const std::string& variable_name(std::size_t j) const { return names_.at(j); }
  const std::vector<double>& costs() const { return cost_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void set_cost(std::size_t j, double c) { cost_.at(j) = c; }
  void set_bounds(std::size_t j, double lo, double up);
  double objective_offset{0.0};

  double objective(const std::vector<double>& x) const;
  /// a_r' x for every row.
  std::vector<double> row_activity(const std::vector<double>& x) const;
  /// Amount by which row r is violated at x (0 when satisfied).
  std::vector<double> row_violation(const std::vector<double>& x) const;
  /// Largest row or bound violation at x.
  double max_violation(const std::vector<double>& x) const;

 private:
  std::vector<std::string> names_;
  std::vector<double> cost_, lower_, upper_;
  std::vector<Row> rows_;
  std::vector<Entry> entries_;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };
const char* to_string(LpStatus status);

struct LpOptions {
  double tolerance{1e-9};  // relative primal/dual residual and gap
  int max_iterations{200};
  bool diagnose_infeasibility{true};
};

struct LpResult {
  LpStatus status{LpStatus::numerical_failure};
  std::vector<double> x;
  double objective{0.0};
  int iterations{0};
  double primal_residual{0.0};  // max row/bound violation in original units
  double relative_gap{0.0};
  /// Rows carrying positive elastic violation when the problem is infeasible.
  std::vector<std::size_t> violated_rows;
  std::string message;
};

/// Primal-dual interior point (Mehrotra predictor-corrector) after
/// presolving fixed variables and singleton equality rows.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& options = {});

/// CPLEX LP text format (Minimize / Subject To / Bounds / End).
void write_lp_text(const LinearProgram& lp, std::ostream& out);
LinearProgram read_lp_text(std::istream& in);

}  // namespace mcfnc
