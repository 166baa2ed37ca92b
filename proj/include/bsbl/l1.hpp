#pragma once

#include "bsbl/group_lasso.hpp"
#include "bsbl/solver.hpp"

#include <optional>
#include <vector>

namespace bsbl {

enum class RegRule {
  /// reg = value * 2 * max_i |H_i^T y|, recomputed for every inner problem.
  FixedFraction,
  /// reg = value.
  UserValue,
};

struct L1Config {
  int outer_iters = 5;
  double inner_tol = 1e-10;
  int inner_max_iters = 20000;
  RegRule reg_rule = RegRule::FixedFraction;
  double reg_value = 0.01;
  bool learn_correlation = true;
  /// Noise variance used when computing the weights; held fixed for the run.
  double lambda = kNoiselessLambda;
  /// Weights for the first outer iteration. When absent they are computed
  /// from gamma_i = 1, B_i = I.
  std::optional<Vector> initial_weights;

  static L1Config noiseless();
  static L1Config noisy(const Vector& y);
};

/// z_i and w_i = 2 sqrt(z_i).
struct DualWeights {
  Vector z;
  Vector w;

  static DualWeights from_z(Vector z);
  static DualWeights from_w(Vector w);
};

/// z_i = tr(B_i phi_i^T (lambda I + phi Sigma_0 phi^T)^{-1} phi_i).
DualWeights compute_weights(const Problem& problem, const Hyperparams& hp,
                            const BlockPartition& partition);
DualWeights compute_weights(const Problem& problem, const Hyperparams& hp,
                            const BlockLayout& layout);

/// gamma_i = z_i^{-1/2} sqrt(x_i^T B_i^{-1} x_i).
Vector gamma_from_solution(const std::vector<Vector>& x_blocks, const DualWeights& weights,
                           const std::vector<Matrix>& B);

/// Symmetric square root with eigenvalues floored at 1e-12.
Matrix sqrt_psd(const Matrix& b);

/// u_i = w_i B_i^{-1/2} x_i, H = design * diag(B_i^{1/2} / w_i). `design` is
/// phi for a contiguous partition, or the materialized expanded matrix.
/// reg is set to 1; callers choose it.
GroupLassoProblem build_inner_problem(const Vector& y, const Matrix& design,
                                      const DualWeights& weights, const std::vector<Matrix>& B,
                                      const BlockPartition& partition);
GroupLassoProblem build_inner_problem(const Problem& problem, const DualWeights& weights,
                                      const std::vector<Matrix>& B,
                                      const BlockPartition& partition);

/// x_i = B_i^{1/2} u_i / w_i.
Vector x_from_inner(const Vector& u, const DualWeights& weights, const std::vector<Matrix>& B,
                    const BlockPartition& partition);
/// u_i = w_i B_i^{-1/2} x_i.
Vector inner_from_x(const Vector& x, const DualWeights& weights, const std::vector<Matrix>& B,
                    const BlockPartition& partition);

/// Regularization for an inner problem under the configured rule.
double inner_reg(const L1Config& config, const GroupLassoProblem& inner);

/// Iteratively reweighted group lasso with AR(1) correlation re-estimated
/// from the nonzero blocks of the previous solution. cost_trace holds the
/// inner objective after every outer iteration; descent pairs compare the
/// inner objective at the warm start with the returned one.
RecoveryResult solve_l1(const Problem& problem, const BlockPartition& partition,
                        const L1Config& config);
RecoveryResult solve_l1(const Problem& problem, const BlockLayout& layout, const L1Config& config);

}  // namespace bsbl
