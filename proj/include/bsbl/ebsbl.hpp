#pragma once

#include "bsbl/bo.hpp"
#include "bsbl/em.hpp"
#include "bsbl/l1.hpp"

#include <variant>

namespace bsbl {

inline constexpr Index kDefaultWindow = 4;

/// y = sum_i phi E_i z_i + v = A z + v with p = N - h + 1 overlapping windows
/// of length h. A_i is columns i..i+h-1 of phi.
struct ExpandedModel {
  Index h = 0;
  Index p = 0;
  Matrix A;
  BlockPartition expanded_partition;
  BlockLayout layout;
};

/// Materializes A. Solvers use the window layout directly and never need it.
ExpandedModel expand(const Problem& problem, Index h);

/// x = sum_i E_i z_i (overlap-add).
Vector reconstruct(const Vector& z, Index h, Index n);

enum class Algorithm { EM, BO, L1 };

using EbsblConfig = std::variant<EmConfig, BoConfig, L1Config>;

/// Runs the chosen solver on the expanded model and maps the result back to
/// x. The returned hyperparameters live in the expanded space.
RecoveryResult solve_ebsbl(const Problem& problem, Index h, Algorithm algorithm,
                           const EbsblConfig& config);

/// Same, also returning the expanded coefficients z.
RecoveryResult solve_ebsbl(const Problem& problem, Index h, Algorithm algorithm,
                           const EbsblConfig& config, Vector* z_out);

}  // namespace bsbl
