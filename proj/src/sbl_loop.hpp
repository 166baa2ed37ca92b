#pragma once

#include "bsbl/solver.hpp"

#include <functional>

namespace bsbl::detail {

using GammaRule =
    std::function<Vector(const PosteriorDetail&, const Hyperparams&, const BlockLayout&)>;

/// posterior -> gamma -> B -> lambda, until the relative gamma change drops
/// below tol or the iteration budget runs out.
RecoveryResult run_sbl(const Problem& problem, const BlockLayout& layout,
                       const SolverConfig& config, const GammaRule& rule);

}  // namespace bsbl::detail
