#include "bsbl/correlation.hpp"

#include <algorithm>
#include <cmath>

namespace bsbl {

namespace {

struct DiagonalMeans {
  double m0 = 0.0;
  double m1 = 0.0;
};

DiagonalMeans diagonal_means(const Matrix& b) {
  if (b.rows() != b.cols() || b.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "correlation matrix must be square and nonempty");
  }
  const Index d = b.rows();
  DiagonalMeans m;
  m.m0 = b.diagonal().mean();
  if (d > 1) m.m1 = b.diagonal(-1).mean();
  return m;
}

}  // namespace

Matrix toeplitz_ar1(double r, Index d) {
  if (!(std::abs(r) < 1.0)) {
    throw Error(ErrorCode::InvalidCoefficient, "AR(1) coefficient must satisfy |r| < 1");
  }
  if (d < 1) throw Error(ErrorCode::InvalidBlockSize, "block size must be positive");
  Vector powers(d);
  powers(0) = 1.0;
  for (Index k = 1; k < d; ++k) powers(k) = powers(k - 1) * r;
  Matrix t(d, d);
  for (Index j = 0; j < d; ++j) {
    for (Index k = 0; k < d; ++k) t(j, k) = powers(std::abs(j - k));
  }
  return t;
}

double clip_correlation(double ratio) {
  if (std::isnan(ratio)) return 0.0;
  const double mag = std::min(std::abs(ratio), kMaxAbsCorrelation);
  return ratio < 0.0 ? -mag : mag;
}

ArCoefficient estimate_r(const Matrix& b) {
  const DiagonalMeans m = diagonal_means(b);
  if (b.rows() == 1) return {0.0, false};
  if (m.m0 == 0.0) return {0.0, true};
  return {clip_correlation(m.m1 / m.m0), false};
}

ArCoefficient estimate_r_pooled(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) throw Error(ErrorCode::InvalidArgument, "no blocks to pool");
  double m0 = 0.0;
  double m1 = 0.0;
  for (const Matrix& b : blocks) {
    const DiagonalMeans m = diagonal_means(b);
    if (b.rows() < 2) continue;
    m0 += m.m0;
    m1 += m.m1;
  }
  if (m0 == 0.0) return {0.0, true};
  return {clip_correlation(m1 / m0), false};
}

ArCoefficient estimate_r_from_blocks(const std::vector<Vector>& blocks) {
  double sum = 0.0;
  int count = 0;
  for (const Vector& x : blocks) {
    if (x.size() < 2) continue;
    const double energy = x.squaredNorm();
    if (energy < 1e-12) continue;
    const Index d = x.size();
    sum += x.head(d - 1).dot(x.tail(d - 1)) / energy;
    ++count;
  }
  if (count == 0) return {0.0, true};
  return {clip_correlation(sum / count), false};
}

}  // namespace bsbl
