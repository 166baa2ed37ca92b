#include "bsbl/em.hpp"

#include "bsbl/correlation.hpp"
#include "sbl_loop.hpp"

#include <algorithm>

namespace bsbl {

namespace {

Matrix second_moment(const PosteriorState& posterior, const BlockPartition& partition, Index i) {
  const auto mu = posterior.mu.segment(partition.offset(i), partition.size(i));
  return posterior.sigma_blocks[static_cast<std::size_t>(i)] + mu * mu.transpose();
}

void check_posterior(const PosteriorState& posterior, const BlockPartition& partition) {
  if (posterior.mu.size() != partition.total() ||
      static_cast<Index>(posterior.sigma_blocks.size()) != partition.num_blocks()) {
    throw Error(ErrorCode::DimensionMismatch, "posterior does not match the partition");
  }
}

double fit_residual(const Problem& problem, const PosteriorState& posterior,
                    const BlockLayout& layout) {
  return (problem.y - layout.apply(problem.phi, posterior.mu)).squaredNorm();
}

}  // namespace

Vector update_gamma_em(const PosteriorState& posterior, const Hyperparams& hp,
                       const BlockPartition& partition) {
  check_posterior(posterior, partition);
  const Index g = partition.num_blocks();
  Vector gamma = Vector::Zero(g);
  for (Index i = 0; i < g; ++i) {
    if (hp.gamma(i) <= 0.0) continue;
    Eigen::LLT<Matrix> llt(hp.B[static_cast<std::size_t>(i)]);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NonPSD, "B_" + std::to_string(i) + " is not positive definite");
    }
    const Matrix moment = second_moment(posterior, partition, i);
    gamma(i) = std::max(llt.solve(moment).trace() / static_cast<double>(partition.size(i)), 0.0);
  }
  return gamma;
}

double update_lambda_robust(const Problem& problem, const PosteriorState& posterior,
                            const BlockLayout& layout) {
  check_posterior(posterior, layout.coef_partition());
  double trace = 0.0;
  for (Index i = 0; i < layout.num_blocks(); ++i) {
    const Matrix& sigma = posterior.sigma_blocks[static_cast<std::size_t>(i)];
    if (sigma.isZero(0.0)) continue;
    const auto phi_i = problem.phi.middleCols(layout.column(i), layout.size(i));
    trace += (sigma * (phi_i.transpose() * phi_i)).trace();
  }
  return (fit_residual(problem, posterior, layout) + trace) / static_cast<double>(problem.rows());
}

double update_lambda_robust(const Problem& problem, const PosteriorState& posterior,
                            const BlockPartition& partition) {
  return update_lambda_robust(problem, posterior, BlockLayout::contiguous(partition));
}

double update_lambda_naive(const Problem& problem, const PosteriorDetail& detail,
                           const BlockLayout& layout, double lambda) {
  if (!detail.inverse_trace) {
    throw Error(ErrorCode::InvalidArgument, "naive lambda rule needs tr(Sigma_y^{-1})");
  }
  const double m = static_cast<double>(problem.rows());
  const double trace = lambda * (m - lambda * *detail.inverse_trace);
  return (fit_residual(problem, detail.state, layout) + trace) / m;
}

double update_lambda_naive(const Problem& problem, const BlockPartition& partition,
                           const Hyperparams& hp) {
  const BlockLayout layout = BlockLayout::contiguous(partition);
  PosteriorOptions opts;
  opts.inverse_trace = true;
  const PosteriorDetail detail = compute_posterior_detail(problem, layout, hp, opts);
  return update_lambda_naive(problem, detail, layout, hp.lambda);
}

CorrelationUpdate update_B(const PosteriorState& posterior, const Vector& gamma,
                           const BlockPartition& partition, bool equal_sizes,
                           const std::vector<Matrix>& previous, bool learn_correlation) {
  check_posterior(posterior, partition);
  const Index g = partition.num_blocks();
  CorrelationUpdate out;
  if (!learn_correlation) {
    out.B.reserve(static_cast<std::size_t>(g));
    for (Index i = 0; i < g; ++i) {
      out.B.push_back(Matrix::Identity(partition.size(i), partition.size(i)));
    }
    return out;
  }

  std::vector<Matrix> normalized;
  for (Index i = 0; i < g; ++i) {
    if (gamma(i) <= 0.0) continue;
    normalized.push_back(second_moment(posterior, partition, i) / gamma(i));
  }
  if (normalized.empty()) {
    out.B = previous;
    return out;
  }

  ArCoefficient r;
  if (equal_sizes) {
    Matrix mean = Matrix::Zero(normalized.front().rows(), normalized.front().cols());
    for (const Matrix& b : normalized) mean += b;
    mean /= static_cast<double>(normalized.size());
    r = estimate_r(mean);
  } else {
    r = estimate_r_pooled(normalized);
  }
  if (r.degenerate) {
    out.B = previous;
    return out;
  }

  out.B.reserve(static_cast<std::size_t>(g));
  for (Index i = 0; i < g; ++i) out.B.push_back(toeplitz_ar1(r.r, partition.size(i)));
  out.r = r.r;
  out.updated = true;
  return out;
}

RecoveryResult solve_em(const Problem& problem, const BlockLayout& layout, const EmConfig& config) {
  return detail::run_sbl(problem, layout, config,
                         [](const PosteriorDetail& d, const Hyperparams& hp, const BlockLayout& l) {
                           return update_gamma_em(d.state, hp, l.coef_partition());
                         });
}

RecoveryResult solve_em(const Problem& problem, const BlockPartition& partition,
                        const EmConfig& config) {
  return solve_em(problem, BlockLayout::contiguous(partition), config);
}

}  // namespace bsbl
