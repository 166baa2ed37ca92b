#pragma once

#include "bsbl/model.hpp"

#include <vector>

namespace bsbl {

/// min_u |y - H u|^2 + reg * sum_i |u_i|_2 over the groups of `partition`.
struct GroupLassoProblem {
  Vector y;
  Matrix H;
  BlockPartition partition;
  double reg = 1.0;
};

struct GroupLassoResult {
  Vector u;
  int iterations = 0;
  /// False when max_iters ran out; u is then the best iterate seen.
  bool converged = false;
  double objective = 0.0;
  /// Objective of the accepted iterate after every iteration.
  std::vector<double> objective_trace;
};

double group_lasso_objective(const GroupLassoProblem& p, const Vector& u);

/// Largest violation of the group-wise optimality conditions:
///   active groups: |2 H_i^T (y - H u) - reg u_i / |u_i||
///   zero groups:   max(0, |2 H_i^T (y - H u)| - reg)
double group_lasso_optimality(const GroupLassoProblem& p, const Vector& u);

/// max_i |H_i^T y|_2; reg >= 2 * this gives u = 0.
double group_lasso_reg_max(const Matrix& h, const Vector& y, const BlockPartition& partition);

/// Accelerated proximal gradient (group soft-thresholding) with backtracking
/// and momentum restarts. Stops when the optimality residual falls below
/// tol * max(1, 2 max_i |H_i^T y|), or when the objective stops moving at
/// machine precision.
GroupLassoResult solve_group_lasso(const GroupLassoProblem& p, double tol = 1e-10,
                                   int max_iters = 20000, const Vector* warm_start = nullptr);

}  // namespace bsbl
