#pragma once

#include <string>

#include <Eigen/Sparse>

#include "mcfnc/lp.hpp"

namespace mcfnc {

/// min c'x + offset  s.t.  Ax = b, x >= 0.
struct StandardForm {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double offset{0.0};
};

struct IpmResult {
  LpStatus status{LpStatus::numerical_failure};
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  int iterations{0};
  double relative_gap{0.0};
  bool primal_diverged{false};  // |x| blew up: evidence of an improving ray
  std::string message;
};

/// Returns optimal when scaled primal/dual residuals and the relative gap fall
/// below tol, or below 100 * tol once progress stalls. Any other status means
/// the iterates diverged or stalled; the caller decides infeasible/unbounded.
IpmResult interior_point(const StandardForm& form, double tol, int max_iterations);

}  // namespace mcfnc
