#include "bsbl/l1.hpp"

#include "bsbl/correlation.hpp"

#include <algorithm>
#include <cmath>

namespace bsbl {

L1Config L1Config::noiseless() {
  L1Config c;
  c.reg_value = 1e-6;
  c.lambda = kNoiselessLambda;
  return c;
}

L1Config L1Config::noisy(const Vector& y) {
  L1Config c;
  c.reg_value = 0.01;
  c.lambda = std::max(1e-3 * y.squaredNorm() / static_cast<double>(y.size()), kLambdaFloor);
  return c;
}

DualWeights DualWeights::from_z(Vector z) {
  DualWeights d;
  d.w = 2.0 * z.cwiseMax(0.0).cwiseSqrt();
  d.z = std::move(z);
  return d;
}

DualWeights DualWeights::from_w(Vector w) {
  DualWeights d;
  d.z = (0.5 * w).cwiseAbs2();
  d.w = std::move(w);
  return d;
}

DualWeights compute_weights(const Problem& problem, const Hyperparams& hp,
                            const BlockLayout& layout) {
  if (!(hp.lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "weights require lambda > 0");
  PosteriorOptions opts;
  opts.all_grams = true;
  const PosteriorDetail detail = compute_posterior_detail(problem, layout, hp, opts);
  Vector z(layout.num_blocks());
  for (Index i = 0; i < layout.num_blocks(); ++i) {
    const auto is = static_cast<std::size_t>(i);
    z(i) = std::max((hp.B[is] * detail.gram[is]).trace(), 0.0);
  }
  return DualWeights::from_z(std::move(z));
}

DualWeights compute_weights(const Problem& problem, const Hyperparams& hp,
                            const BlockPartition& partition) {
  return compute_weights(problem, hp, BlockLayout::contiguous(partition));
}

Vector gamma_from_solution(const std::vector<Vector>& x_blocks, const DualWeights& weights,
                           const std::vector<Matrix>& B) {
  const std::size_t g = x_blocks.size();
  if (static_cast<std::size_t>(weights.z.size()) != g || B.size() != g) {
    throw Error(ErrorCode::DimensionMismatch, "gamma_from_solution: block counts differ");
  }
  Vector gamma = Vector::Zero(static_cast<Index>(g));
  for (std::size_t i = 0; i < g; ++i) {
    const Vector& x = x_blocks[i];
    if (x.isZero(0.0)) continue;
    const double z = weights.z(static_cast<Index>(i));
    if (!(z > 0.0)) throw Error(ErrorCode::InvalidArgument, "z_i must be positive");
    Eigen::LLT<Matrix> llt(B[i]);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NonPSD, "B_i is not positive definite");
    gamma(static_cast<Index>(i)) = std::sqrt(std::max(x.dot(llt.solve(x)), 0.0) / z);
  }
  return gamma;
}

Matrix sqrt_psd(const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::NonPSD, "eigendecomposition failed");
  const Vector root = eig.eigenvalues().cwiseMax(1e-12).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

void check_transform(const DualWeights& weights, const std::vector<Matrix>& B,
                     const BlockPartition& partition) {
  const Index g = partition.num_blocks();
  if (weights.w.size() != g || static_cast<Index>(B.size()) != g) {
    throw Error(ErrorCode::DimensionMismatch, "weights/B do not match the partition");
  }
  for (Index i = 0; i < g; ++i) {
    if (!(weights.w(i) > 0.0)) {
      throw Error(ErrorCode::ZeroSensingBlock, "weight of block " + std::to_string(i) + " is zero");
    }
    if (B[static_cast<std::size_t>(i)].rows() != partition.size(i)) {
      throw Error(ErrorCode::DimensionMismatch, "B_i has the wrong size");
    }
  }
}

}  // namespace

GroupLassoProblem build_inner_problem(const Vector& y, const Matrix& design,
                                      const DualWeights& weights, const std::vector<Matrix>& B,
                                      const BlockPartition& partition) {
  if (design.cols() != partition.total() || design.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "design matrix does not match the partition");
  }
  check_transform(weights, B, partition);
  GroupLassoProblem p;
  p.y = y;
  p.partition = partition;
  p.H.resize(design.rows(), design.cols());
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    const Index off = partition.offset(i);
    const Index d = partition.size(i);
    const Matrix& b = B[static_cast<std::size_t>(i)];
    if (b.isIdentity(0.0)) {
      p.H.middleCols(off, d) = design.middleCols(off, d) / weights.w(i);
    } else {
      p.H.middleCols(off, d).noalias() = design.middleCols(off, d) * (sqrt_psd(b) / weights.w(i));
    }
  }
  return p;
}

GroupLassoProblem build_inner_problem(const Problem& problem, const DualWeights& weights,
                                      const std::vector<Matrix>& B,
                                      const BlockPartition& partition) {
  return build_inner_problem(problem.y, problem.phi, weights, B, partition);
}

Vector x_from_inner(const Vector& u, const DualWeights& weights, const std::vector<Matrix>& B,
                    const BlockPartition& partition) {
  check_transform(weights, B, partition);
  Vector x(u.size());
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    const Index off = partition.offset(i);
    const Index d = partition.size(i);
    const Matrix& b = B[static_cast<std::size_t>(i)];
    const auto ui = u.segment(off, d);
    if (b.isIdentity(0.0)) {
      x.segment(off, d) = ui / weights.w(i);
    } else {
      x.segment(off, d) = sqrt_psd(b) * ui / weights.w(i);
    }
  }
  return x;
}

Vector inner_from_x(const Vector& x, const DualWeights& weights, const std::vector<Matrix>& B,
                    const BlockPartition& partition) {
  check_transform(weights, B, partition);
  Vector u(x.size());
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    const Index off = partition.offset(i);
    const Index d = partition.size(i);
    const Matrix& b = B[static_cast<std::size_t>(i)];
    const auto xi = x.segment(off, d);
    if (b.isIdentity(0.0)) {
      u.segment(off, d) = weights.w(i) * xi;
    } else {
      u.segment(off, d) = weights.w(i) * sqrt_psd(b).llt().solve(Vector(xi));
    }
  }
  return u;
}

double inner_reg(const L1Config& config, const GroupLassoProblem& inner) {
  if (config.reg_rule == RegRule::UserValue) return config.reg_value;
  const double reg = config.reg_value * 2.0 * group_lasso_reg_max(inner.H, inner.y, inner.partition);
  return reg > 0.0 ? reg : config.reg_value;
}

RecoveryResult solve_l1(const Problem& problem, const BlockLayout& layout, const L1Config& config) {
  problem.validate();
  if (config.outer_iters < 1 || config.outer_iters > 20) {
    throw Error(ErrorCode::InvalidArgument, "outer_iters must lie in [1, 20]");
  }
  if (!(config.reg_value > 0.0)) throw Error(ErrorCode::InvalidArgument, "reg must be positive");
  if (problem.cols() != layout.num_columns()) {
    throw Error(ErrorCode::DimensionMismatch, "phi column count does not match the partition");
  }

  const BlockPartition& part = layout.coef_partition();
  const Index g = part.num_blocks();
  const Matrix design = layout.overlapping() ? layout.materialize(problem.phi) : problem.phi;
  Hyperparams hp = Hyperparams::initial(part, 1.0, config.lambda);

  DualWeights weights;
  if (config.initial_weights) {
    if (config.initial_weights->size() != g) {
      throw Error(ErrorCode::DimensionMismatch, "initial weights have the wrong length");
    }
    weights = DualWeights::from_w(*config.initial_weights);
  } else {
    weights = compute_weights(problem, hp, layout);
  }

  RecoveryResult result;
  Vector x = Vector::Zero(layout.num_coefs());
  bool inner_converged = true;
  for (int k = 0; k < config.outer_iters; ++k) {
    if (k > 0) {
      std::vector<Vector> blocks;
      blocks.reserve(static_cast<std::size_t>(g));
      for (Index i = 0; i < g; ++i) blocks.emplace_back(x.segment(part.offset(i), part.size(i)));
      hp.gamma = gamma_from_solution(blocks, weights, hp.B);
      if (hp.gamma.isZero(0.0)) break;
      weights = compute_weights(problem, hp, layout);
    }

    GroupLassoProblem inner = build_inner_problem(problem.y, design, weights, hp.B, part);
    inner.reg = inner_reg(config, inner);
    const Vector warm = inner_from_x(x, weights, hp.B, part);
    const double before = group_lasso_objective(inner, warm);
    const GroupLassoResult sol =
        solve_group_lasso(inner, config.inner_tol, config.inner_max_iters, &warm);
    inner_converged = sol.converged;
    result.descent.push_back({before, sol.objective});
    result.cost_trace.push_back(sol.objective);
    x = x_from_inner(sol.u, weights, hp.B, part);
    result.iterations = k + 1;

    if (config.learn_correlation) {
      std::vector<Vector> nonzero;
      for (Index i = 0; i < g; ++i) {
        const auto xi = x.segment(part.offset(i), part.size(i));
        if (!xi.isZero(0.0)) nonzero.emplace_back(xi);
      }
      const ArCoefficient r = estimate_r_from_blocks(nonzero);
      if (!r.degenerate) {
        for (Index i = 0; i < g; ++i) hp.B[static_cast<std::size_t>(i)] = toeplitz_ar1(r.r, part.size(i));
        result.learned_r = r.r;
      }
    }
  }

  result.converged = inner_converged;
  result.x_hat = std::move(x);
  result.hyperparams = std::move(hp);
  return result;
}

RecoveryResult solve_l1(const Problem& problem, const BlockPartition& partition,
                        const L1Config& config) {
  return solve_l1(problem, BlockLayout::contiguous(partition), config);
}

}  // namespace bsbl
