#pragma once

#include "bsbl/solver.hpp"

#include <vector>

namespace bsbl {

/// gamma_i = tr(B_i^{-1} (Sigma_x^i + mu_i mu_i^T)) / d_i. Pruned blocks stay 0.
Vector update_gamma_em(const PosteriorState& posterior, const Hyperparams& hp,
                       const BlockPartition& partition);

/// (|y - phi mu|^2 + sum_i tr(Sigma_x^i phi_i^T phi_i)) / M, cross-block
/// terms dropped. Not floored; the solver applies kLambdaFloor.
double update_lambda_robust(const Problem& problem, const PosteriorState& posterior,
                            const BlockPartition& partition);
double update_lambda_robust(const Problem& problem, const PosteriorState& posterior,
                            const BlockLayout& layout);

/// (|y - phi mu|^2 + tr(Sigma_x phi^T phi)) / M with the full posterior
/// covariance. tr(Sigma_x phi^T phi) is evaluated in the M x M space as
/// lambda (M - lambda tr(Sigma_y^{-1})).
double update_lambda_naive(const Problem& problem, const BlockPartition& partition,
                           const Hyperparams& hp);
double update_lambda_naive(const Problem& problem, const PosteriorDetail& detail,
                           const BlockLayout& layout, double lambda);

struct CorrelationUpdate {
  std::vector<Matrix> B;
  double r = 0.0;
  /// False when there was nothing to learn from (no active block, learning
  /// disabled, or degenerate statistics); B is then the previous value
  /// (identity when learning is disabled).
  bool updated = false;
};

/// Equal block sizes: average (Sigma_x^i + mu_i mu_i^T) / gamma_i over active
/// blocks, then project onto Toeplitz AR(1). Unequal sizes: pooled r over the
/// per-block estimates. `gamma` marks active blocks (> 0) and supplies the
/// normalizers.
CorrelationUpdate update_B(const PosteriorState& posterior, const Vector& gamma,
                           const BlockPartition& partition, bool equal_sizes,
                           const std::vector<Matrix>& previous, bool learn_correlation = true);

RecoveryResult solve_em(const Problem& problem, const BlockPartition& partition,
                        const EmConfig& config);
/// Same solver over an arbitrary block layout; x_hat holds the coefficients.
RecoveryResult solve_em(const Problem& problem, const BlockLayout& layout, const EmConfig& config);

}  // namespace bsbl
