#include "bsbl/group_lasso.hpp"
#include "oracles/dense_oracle.hpp"

#include <gtest/gtest.h>

namespace {

using namespace bsbl;

TEST(GroupLasso, LargeRegularizationGivesZero) {
  oracle::Rng rng(1);
  GroupLassoProblem p{oracle::gaussian(6, 1, rng), oracle::gaussian(6, 8, rng),
                      BlockPartition({4, 4}), 0.0};
  p.reg = 2.0 * group_lasso_reg_max(p.H, p.y, p.partition);
  const GroupLassoResult r = solve_group_lasso(p);
  EXPECT_EQ(r.u.norm(), 0.0);
  EXPECT_TRUE(r.converged);
}

TEST(GroupLasso, VanishingRegularizationInvertsSquareSystem) {
  oracle::Rng rng(2);
  const Matrix h = oracle::gaussian(4, 4, rng) + 3.0 * Matrix::Identity(4, 4);
  const Vector y = oracle::gaussian(4, 1, rng);
  const GroupLassoProblem p{y, h, BlockPartition({4}), 1e-9};
  const GroupLassoResult r = solve_group_lasso(p, 1e-12, 100000);
  const Vector exact = h.fullPivLu().solve(y);
  EXPECT_LT((r.u - exact).norm(), 1e-6 * exact.norm());
}

TEST(GroupLasso, ObjectiveMatchesCoordinateDescentReference) {
  oracle::Rng rng(3);
  const Matrix h = oracle::gaussian(6, 8, rng);
  const Vector y = oracle::gaussian(6, 1, rng);
  const GroupLassoProblem p{y, h, BlockPartition({4, 4}), 1.0};
  const GroupLassoResult r = solve_group_lasso(p);
  const Vector ref = oracle::group_lasso_bcd(h, y, {4, 4}, 1.0, 20000);
  const double ref_obj = oracle::group_lasso_objective(h, y, {4, 4}, 1.0, ref);
  EXPECT_LT(oracle::rel_err(r.objective, ref_obj), 1e-6);
  EXPECT_NEAR(r.objective, group_lasso_objective(p, r.u), 1e-12);
}

TEST(GroupLasso, ObjectiveTraceIsMonotone) {
  oracle::Rng rng(4);
  const GroupLassoProblem p{oracle::gaussian(20, 1, rng), oracle::gaussian(20, 40, rng),
                            BlockPartition::uniform(40, 5), 0.5};
  const GroupLassoResult r = solve_group_lasso(p);
  for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
    EXPECT_LE(r.objective_trace[k], r.objective_trace[k - 1]);
  }
}

TEST(GroupLasso, OptimalityResidualIsSmallAtSolution) {
  oracle::Rng rng(5);
  const GroupLassoProblem p{oracle::gaussian(20, 1, rng), oracle::gaussian(20, 15, rng),
                            BlockPartition({5, 5, 5}), 0.3};
  const GroupLassoResult r = solve_group_lasso(p);
  EXPECT_LT(group_lasso_optimality(p, r.u), 1e-8);
}

TEST(GroupLasso, WarmStartAtSolutionStopsQuickly) {
  oracle::Rng rng(6);
  const GroupLassoProblem p{oracle::gaussian(20, 1, rng), oracle::gaussian(20, 15, rng),
                            BlockPartition({5, 5, 5}), 0.3};
  const GroupLassoResult a = solve_group_lasso(p);
  const GroupLassoResult b = solve_group_lasso(p, 1e-10, 20000, &a.u);
  EXPECT_LE(b.iterations, 10);
  EXPECT_LE(b.objective, a.objective + 1e-12);
}

TEST(GroupLasso, NegativeRegularizationIsRejected) {
  const GroupLassoProblem p{Vector::Ones(2), Matrix::Identity(2, 2), BlockPartition({2}), -1.0};
  EXPECT_THROW(solve_group_lasso(p), Error);
}

}  // namespace
