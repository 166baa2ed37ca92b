#pragma once

#include "bsbl/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace bsbl {

/// Measurement vector y and sensing matrix phi of the model y = phi * x + v.
struct Problem {
  Vector y;
  Matrix phi;

  Index rows() const { return phi.rows(); }
  Index cols() const { return phi.cols(); }

  /// Throws DimensionMismatch / InvalidArgument on malformed input.
  void validate() const;
};

/// Ordered block sizes d_1..d_g covering indices 0..N-1 contiguously.
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<Index> sizes);

  /// Blocks of block_size; a shorter last block takes any remainder.
  static BlockPartition uniform(Index n, Index block_size);

  Index num_blocks() const { return static_cast<Index>(sizes_.size()); }
  Index size(Index i) const { return sizes_[static_cast<std::size_t>(i)]; }
  Index offset(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  Index total() const { return total_; }
  bool equal_sizes() const;
  const std::vector<Index>& sizes() const { return sizes_; }

  bool operator==(const BlockPartition&) const = default;

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

/// Blocks expressed as column windows of phi. A contiguous partition maps
/// block i to its own columns; the expanded (unknown-partition) model maps
/// block i to the overlapping window i..i+h-1. Coefficients are stored
/// block after block, so the coefficient vector has length sum(size).
class BlockLayout {
 public:
  static BlockLayout contiguous(const BlockPartition& partition);
  static BlockLayout sliding(Index n, Index h);

  Index num_blocks() const { return partition_.num_blocks(); }
  Index size(Index i) const { return partition_.size(i); }
  /// First phi column of block i.
  Index column(Index i) const { return columns_[static_cast<std::size_t>(i)]; }
  /// Offset of block i inside the coefficient vector.
  Index coef_offset(Index i) const { return partition_.offset(i); }
  Index num_coefs() const { return partition_.total(); }
  Index num_columns() const { return num_columns_; }
  bool overlapping() const { return overlapping_; }

  /// The non-overlapping partition of the coefficient vector.
  const BlockPartition& coef_partition() const { return partition_; }

  /// Dense M x num_coefs matrix whose block i is the window of phi.
  Matrix materialize(const Matrix& phi) const;
  /// phi * coefficients without materializing the expanded matrix.
  Vector apply(const Matrix& phi, const Vector& coefs) const;

 private:
  BlockPartition partition_;
  std::vector<Index> columns_;
  Index num_columns_ = 0;
  bool overlapping_ = false;
};

/// Per-block prior scales gamma_i, correlation matrices B_i, noise variance.
struct Hyperparams {
  Vector gamma;
  std::vector<Matrix> B;
  double lambda = 1.0;

  /// gamma_i = gamma0, B_i = I.
  static Hyperparams initial(const BlockPartition& partition, double gamma0, double lambda);
};

struct PosteriorState {
  Vector mu;
  std::vector<Matrix> sigma_blocks;
  double cost = 0.0;
};

/// Everything a solver needs from one factorization of
/// Sigma_y = lambda I + phi Sigma_0 phi^T.
struct PosteriorDetail {
  PosteriorState state;
  /// Window Grams phi_i^T Sigma_y^{-1} phi_i. Filled for active blocks, or for
  /// every block when requested.
  std::vector<Matrix> gram;
  std::vector<char> has_gram;
  /// Sigma_y^{-1} y.
  Vector alpha;
  double log_det = 0.0;
  /// tr(Sigma_y^{-1}); only set when requested.
  std::optional<double> inverse_trace;
};

struct PosteriorOptions {
  bool all_grams = false;
  bool inverse_trace = false;
  /// Run the per-block loop with OpenMP. Results are bitwise identical to
  /// the serial path; the switch exists for testing and benchmarking.
  bool parallel = true;
};

/// Posterior mean, diagonal covariance blocks and cost. Only the diagonal
/// blocks of Sigma_x are formed; cross-block covariance is never needed by
/// the learning rules implemented here.
PosteriorState compute_posterior(const Problem& problem, const BlockPartition& partition,
                                 const Hyperparams& hp);

PosteriorDetail compute_posterior_detail(const Problem& problem, const BlockLayout& layout,
                                         const Hyperparams& hp, const PosteriorOptions& opts = {});

/// log|lambda I + phi Sigma_0 phi^T| + y^T (lambda I + phi Sigma_0 phi^T)^{-1} y
double cost_function(const Problem& problem, const BlockPartition& partition,
                     const Hyperparams& hp);
double cost_function(const Problem& problem, const BlockLayout& layout, const Hyperparams& hp);

inline const Vector& map_estimate(const PosteriorState& posterior) { return posterior.mu; }

/// Throws unless hp matches the layout and every active B_i is positive definite.
void check_hyperparams(const BlockLayout& layout, const Hyperparams& hp);

}  // namespace bsbl
