#pragma once

#include "bsbl/types.hpp"

#include <vector>

namespace bsbl {

/// Largest |r| produced by the estimators below.
inline constexpr double kMaxAbsCorrelation = 0.99;

/// Result of an AR(1) coefficient estimate. `degenerate` is set when the
/// estimate had nothing to work with (zero diagonal, no usable blocks) and r
/// fell back to 0.
struct ArCoefficient {
  double r = 0.0;
  bool degenerate = false;
};

/// Toeplitz([1, r, ..., r^(d-1)]). Throws InvalidCoefficient for |r| >= 1.
Matrix toeplitz_ar1(double r, Index d);

/// sign(m1/m0) * min(|m1/m0|, 0.99).
double clip_correlation(double ratio);

/// r = m1 / m0 from the mean main diagonal and mean first sub-diagonal of B.
ArCoefficient estimate_r(const Matrix& b);

/// Pooled estimate: sums of per-block diagonal and sub-diagonal means, then
/// their ratio. Blocks of size 1 have no sub-diagonal and are skipped.
ArCoefficient estimate_r_pooled(const std::vector<Matrix>& blocks);

/// Mean of per-block lag-1 coefficients sum_t x_t x_{t+1} / sum_t x_t^2 over
/// blocks with energy >= 1e-12 and length >= 2.
ArCoefficient estimate_r_from_blocks(const std::vector<Vector>& blocks);

}  // namespace bsbl
