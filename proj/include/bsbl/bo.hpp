#pragma once

#include "bsbl/solver.hpp"

namespace bsbl {

/// Bound-optimization gamma rule
///   gamma_i = sqrt(mu_i^T B_i^{-1} mu_i / tr(phi_i^T Sigma_y^{-1} phi_i B_i))
/// with Sigma_y and mu taken at the current hyperparameters.
Vector update_gamma_bo(const Problem& problem, const Hyperparams& hp,
                       const BlockPartition& partition);
Vector update_gamma_bo(const Problem& problem, const PosteriorDetail& detail,
                       const Hyperparams& hp, const BlockLayout& layout);

RecoveryResult solve_bo(const Problem& problem, const BlockPartition& partition,
                        const BoConfig& config);
RecoveryResult solve_bo(const Problem& problem, const BlockLayout& layout, const BoConfig& config);

}  // namespace bsbl
