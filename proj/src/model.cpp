#include "bsbl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bsbl {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonPSD: return "NonPSD";
    case ErrorCode::InvalidCoefficient: return "InvalidCoefficient";
    case ErrorCode::InvalidBlockSize: return "InvalidBlockSize";
    case ErrorCode::ZeroSensingBlock: return "ZeroSensingBlock";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

void Problem::validate() const {
  if (phi.rows() < 1 || phi.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "sensing matrix is empty");
  }
  if (y.size() != phi.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "y has " + std::to_string(y.size()) +
                                                  " entries, phi has " +
                                                  std::to_string(phi.rows()) + " rows");
  }
  if (!y.allFinite() || !phi.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "non-finite values in problem data");
  }
}

BlockPartition::BlockPartition(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
  offsets_.reserve(sizes_.size());
  for (Index d : sizes_) {
    if (d < 1) throw Error(ErrorCode::InvalidBlockSize, "block sizes must be positive");
    offsets_.push_back(total_);
    total_ += d;
  }
}

BlockPartition BlockPartition::uniform(Index n, Index block_size) {
  if (block_size < 1 || n < 1) {
    throw Error(ErrorCode::InvalidBlockSize, "block size and length must be positive");
  }
  std::vector<Index> sizes(static_cast<std::size_t>(n / block_size), block_size);
  if (n % block_size != 0) sizes.push_back(n % block_size);
  return BlockPartition(std::move(sizes));
}

bool BlockPartition::equal_sizes() const {
  return std::all_of(sizes_.begin(), sizes_.end(), [&](Index d) { return d == sizes_.front(); });
}

BlockLayout BlockLayout::contiguous(const BlockPartition& partition) {
  BlockLayout layout;
  layout.partition_ = partition;
  layout.columns_.reserve(static_cast<std::size_t>(partition.num_blocks()));
  for (Index i = 0; i < partition.num_blocks(); ++i) layout.columns_.push_back(partition.offset(i));
  layout.num_columns_ = partition.total();
  return layout;
}

BlockLayout BlockLayout::sliding(Index n, Index h) {
  if (h < 1 || h > n) {
    throw Error(ErrorCode::InvalidBlockSize,
                "window size " + std::to_string(h) + " outside [1, " + std::to_string(n) + "]");
  }
  const Index p = n - h + 1;
  BlockLayout layout;
  layout.partition_ = BlockPartition(std::vector<Index>(static_cast<std::size_t>(p), h));
  layout.columns_.resize(static_cast<std::size_t>(p));
  std::iota(layout.columns_.begin(), layout.columns_.end(), Index{0});
  layout.num_columns_ = n;
  layout.overlapping_ = h > 1;
  return layout;
}

Matrix BlockLayout::materialize(const Matrix& phi) const {
  if (phi.cols() != num_columns_) {
    throw Error(ErrorCode::DimensionMismatch, "phi column count does not match layout");
  }
  Matrix a(phi.rows(), num_coefs());
  for (Index i = 0; i < num_blocks(); ++i) {
    a.middleCols(coef_offset(i), size(i)) = phi.middleCols(column(i), size(i));
  }
  return a;
}

Vector BlockLayout::apply(const Matrix& phi, const Vector& coefs) const {
  if (phi.cols() != num_columns_ || coefs.size() != num_coefs()) {
    throw Error(ErrorCode::DimensionMismatch, "layout apply: inconsistent dimensions");
  }
  Vector out = Vector::Zero(phi.rows());
  for (Index i = 0; i < num_blocks(); ++i) {
    const auto zi = coefs.segment(coef_offset(i), size(i));
    if (zi.isZero(0.0)) continue;
    out.noalias() += phi.middleCols(column(i), size(i)) * zi;
  }
  return out;
}

Hyperparams Hyperparams::initial(const BlockPartition& partition, double gamma0, double lambda) {
  Hyperparams hp;
  hp.gamma = Vector::Constant(partition.num_blocks(), gamma0);
  hp.B.reserve(static_cast<std::size_t>(partition.num_blocks()));
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    hp.B.push_back(Matrix::Identity(partition.size(i), partition.size(i)));
  }
  hp.lambda = lambda;
  return hp;
}

void check_hyperparams(const BlockLayout& layout, const Hyperparams& hp) {
  const Index g = layout.num_blocks();
  if (hp.gamma.size() != g || static_cast<Index>(hp.B.size()) != g) {
    throw Error(ErrorCode::DimensionMismatch, "hyperparameters do not match block count");
  }
  if (!(hp.lambda >= 0.0) || !std::isfinite(hp.lambda)) {
    throw Error(ErrorCode::InvalidArgument, "lambda must be finite and nonnegative");
  }
  for (Index i = 0; i < g; ++i) {
    const Matrix& b = hp.B[static_cast<std::size_t>(i)];
    if (b.rows() != layout.size(i) || b.cols() != layout.size(i)) {
      throw Error(ErrorCode::DimensionMismatch, "B_" + std::to_string(i) + " has wrong size");
    }
    if (!(hp.gamma(i) >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "gamma must be nonnegative");
    }
    if (hp.gamma(i) > 0.0 && Eigen::LLT<Matrix>(b).info() != Eigen::Success) {
      throw Error(ErrorCode::NonPSD, "B_" + std::to_string(i) + " is not positive definite");
    }
  }
}

namespace {

struct ColumnSet {
  std::vector<Index> columns;
  std::vector<Index> local;  // phi column -> position in `columns`, or -1
};

ColumnSet active_columns(const BlockLayout& layout, const Vector& gamma, bool all) {
  ColumnSet set;
  set.local.assign(static_cast<std::size_t>(layout.num_columns()), -1);
  std::vector<char> used(static_cast<std::size_t>(layout.num_columns()), all ? 1 : 0);
  if (!all) {
    for (Index i = 0; i < layout.num_blocks(); ++i) {
      if (gamma(i) <= 0.0) continue;
      for (Index k = 0; k < layout.size(i); ++k) used[static_cast<std::size_t>(layout.column(i) + k)] = 1;
    }
  }
  for (Index c = 0; c < layout.num_columns(); ++c) {
    if (!used[static_cast<std::size_t>(c)]) continue;
    set.local[static_cast<std::size_t>(c)] = static_cast<Index>(set.columns.size());
    set.columns.push_back(c);
  }
  return set;
}

Matrix gather(const Matrix& phi, const std::vector<Index>& columns) {
  Matrix out(phi.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) out.col(static_cast<Index>(k)) = phi.col(columns[k]);
  return out;
}

// lambda I + phi Sigma_0 phi^T restricted to the columns touched by active
// blocks: U = phi_T C_T with C the (possibly overlapping) sum of gamma_i B_i.
Matrix marginal_covariance(const Matrix& phi, const BlockLayout& layout, const Hyperparams& hp,
                           const ColumnSet& active, const Matrix& phi_active) {
  Matrix u = Matrix::Zero(phi.rows(), phi_active.cols());
  for (Index i = 0; i < layout.num_blocks(); ++i) {
    if (hp.gamma(i) <= 0.0) continue;
    const Index loc = active.local[static_cast<std::size_t>(layout.column(i))];
    u.middleCols(loc, layout.size(i)).noalias() +=
        phi.middleCols(layout.column(i), layout.size(i)) *
        (hp.gamma(i) * hp.B[static_cast<std::size_t>(i)]);
  }
  Matrix sigma_y(phi.rows(), phi.rows());
  sigma_y.noalias() = u * phi_active.transpose();
  sigma_y.diagonal().array() += hp.lambda;
  return sigma_y;
}

}  // namespace

PosteriorDetail compute_posterior_detail(const Problem& problem, const BlockLayout& layout,
                                         const Hyperparams& hp, const PosteriorOptions& opts) {
  problem.validate();
  if (problem.cols() != layout.num_columns()) {
    throw Error(ErrorCode::DimensionMismatch, "phi column count does not match the partition");
  }
  check_hyperparams(layout, hp);

  const Index m = problem.rows();
  const Index g = layout.num_blocks();
  const Matrix& phi = problem.phi;

  const ColumnSet active = active_columns(layout, hp.gamma, false);
  const Matrix phi_active = gather(phi, active.columns);
  Eigen::LLT<Matrix> llt(marginal_covariance(phi, layout, hp, active, phi_active));
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    if (hp.lambda == 0.0) {
      throw Error(ErrorCode::SingularSystem, "phi Sigma_0 phi^T is singular and lambda = 0");
    }
    throw Error(ErrorCode::NonPSD, "lambda I + phi Sigma_0 phi^T is not positive definite");
  }

  PosteriorDetail out;
  out.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.alpha = llt.solve(problem.y);
  out.state.cost = out.log_det + problem.y.dot(out.alpha);
  if (opts.inverse_trace) {
    Matrix linv = llt.matrixL().solve(Matrix::Identity(m, m));
    out.inverse_trace = linv.squaredNorm();
  }

  // Sigma_y^{-1} phi over the columns whose Grams are wanted.
  const ColumnSet gram_cols = opts.all_grams ? active_columns(layout, hp.gamma, true) : active;
  const Matrix phi_gram = opts.all_grams ? gather(phi, gram_cols.columns) : Matrix();
  const Matrix& phi_g = opts.all_grams ? phi_gram : phi_active;
  const Matrix w = llt.solve(phi_g);
  const Vector q = phi_g.transpose() * out.alpha;

  out.state.mu = Vector::Zero(layout.num_coefs());
  out.state.sigma_blocks.resize(static_cast<std::size_t>(g));
  out.gram.resize(static_cast<std::size_t>(g));
  out.has_gram.assign(static_cast<std::size_t>(g), 0);

  const bool run_parallel = opts.parallel && g >= 64;
#pragma omp parallel for schedule(static) if (run_parallel)
  for (Index i = 0; i < g; ++i) {
    const auto is = static_cast<std::size_t>(i);
    const Index d = layout.size(i);
    const bool active_block = hp.gamma(i) > 0.0;
    if (!active_block && !opts.all_grams) {
      out.state.sigma_blocks[is] = Matrix::Zero(d, d);
      continue;
    }
    const Index loc = gram_cols.local[static_cast<std::size_t>(layout.column(i))];
    Matrix k = phi.middleCols(layout.column(i), d).transpose() * w.middleCols(loc, d);
    if (active_block) {
      const Matrix prior = hp.gamma(i) * hp.B[is];
      out.state.mu.segment(layout.coef_offset(i), d).noalias() = prior * q.segment(loc, d);
      out.state.sigma_blocks[is] = prior - prior * k * prior;
    } else {
      out.state.sigma_blocks[is] = Matrix::Zero(d, d);
    }
    out.gram[is] = std::move(k);
    out.has_gram[is] = 1;
  }
  return out;
}

PosteriorState compute_posterior(const Problem& problem, const BlockPartition& partition,
                                 const Hyperparams& hp) {
  return compute_posterior_detail(problem, BlockLayout::contiguous(partition), hp).state;
}

double cost_function(const Problem& problem, const BlockLayout& layout, const Hyperparams& hp) {
  problem.validate();
  if (problem.cols() != layout.num_columns()) {
    throw Error(ErrorCode::DimensionMismatch, "phi column count does not match the partition");
  }
  check_hyperparams(layout, hp);
  if (!(hp.lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "cost requires lambda > 0");

  const ColumnSet active = active_columns(layout, hp.gamma, false);
  const Matrix phi_active = gather(problem.phi, active.columns);
  Eigen::LLT<Matrix> llt(marginal_covariance(problem.phi, layout, hp, active, phi_active));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NonPSD, "lambda I + phi Sigma_0 phi^T is not positive definite");
  }
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return log_det + problem.y.dot(llt.solve(problem.y));
}

double cost_function(const Problem& problem, const BlockPartition& partition,
                     const Hyperparams& hp) {
  return cost_function(problem, BlockLayout::contiguous(partition), hp);
}

}  // namespace bsbl
