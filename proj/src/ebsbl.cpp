#include "bsbl/ebsbl.hpp"

namespace bsbl {

ExpandedModel expand(const Problem& problem, Index h) {
  problem.validate();
  ExpandedModel model;
  model.layout = BlockLayout::sliding(problem.cols(), h);
  model.h = h;
  model.p = model.layout.num_blocks();
  model.expanded_partition = model.layout.coef_partition();
  model.A = model.layout.materialize(problem.phi);
  return model;
}

Vector reconstruct(const Vector& z, Index h, Index n) {
  if (h < 1 || h > n) throw Error(ErrorCode::InvalidBlockSize, "window size outside [1, N]");
  const Index p = n - h + 1;
  if (z.size() != p * h) {
    throw Error(ErrorCode::DimensionMismatch, "z must have length (N - h + 1) * h");
  }
  Vector x = Vector::Zero(n);
  for (Index i = 0; i < p; ++i) x.segment(i, h) += z.segment(i * h, h);
  return x;
}

RecoveryResult solve_ebsbl(const Problem& problem, Index h, Algorithm algorithm,
                           const EbsblConfig& config, Vector* z_out) {
  problem.validate();
  const BlockLayout layout = BlockLayout::sliding(problem.cols(), h);
  RecoveryResult result;
  switch (algorithm) {
    case Algorithm::EM: {
      const auto* c = std::get_if<EmConfig>(&config);
      if (!c) throw Error(ErrorCode::InvalidArgument, "EBSBL-EM needs an EmConfig");
      result = solve_em(problem, layout, *c);
      break;
    }
    case Algorithm::BO: {
      const auto* c = std::get_if<BoConfig>(&config);
      if (!c) throw Error(ErrorCode::InvalidArgument, "EBSBL-BO needs a BoConfig");
      result = solve_bo(problem, layout, *c);
      break;
    }
    case Algorithm::L1: {
      const auto* c = std::get_if<L1Config>(&config);
      if (!c) throw Error(ErrorCode::InvalidArgument, "EBSBL-L1 needs an L1Config");
      result = solve_l1(problem, layout, *c);
      break;
    }
  }
  Vector x = reconstruct(result.x_hat, h, problem.cols());
  if (z_out) *z_out = std::move(result.x_hat);
  result.x_hat = std::move(x);
  return result;
}

RecoveryResult solve_ebsbl(const Problem& problem, Index h, Algorithm algorithm,
                           const EbsblConfig& config) {
  return solve_ebsbl(problem, h, algorithm, config, nullptr);
}

}  // namespace bsbl
