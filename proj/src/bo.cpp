#include "bsbl/bo.hpp"

#include "sbl_loop.hpp"

#include <algorithm>

#include <cmath>

namespace bsbl {

Vector update_gamma_bo(const Problem& problem, const PosteriorDetail& detail,
                       const Hyperparams& hp, const BlockLayout& layout) {
  const Index g = layout.num_blocks();
  Vector gamma = Vector::Zero(g);
  for (Index i = 0; i < g; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (hp.gamma(i) <= 0.0) continue;
    if (!detail.has_gram[is]) {
      throw Error(ErrorCode::InvalidArgument, "posterior lacks the Gram of block " + std::to_string(i));
    }
    const double denominator = (detail.gram[is] * hp.B[is]).trace();
    if (!(denominator > 0.0)) {
      if (problem.phi.middleCols(layout.column(i), layout.size(i)).isZero(0.0)) {
        throw Error(ErrorCode::ZeroSensingBlock, "block " + std::to_string(i) + " has no sensing columns");
      }
      throw Error(ErrorCode::NonPSD, "nonpositive trace in gamma update");
    }
    const auto mu = detail.state.mu.segment(layout.coef_offset(i), layout.size(i));
    if (mu.isZero(0.0)) continue;
    Eigen::LLT<Matrix> llt(hp.B[is]);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NonPSD, "B_" + std::to_string(i) + " is not positive definite");
    }
    const double numerator = mu.dot(llt.solve(mu));
    gamma(i) = std::sqrt(std::max(numerator, 0.0) / denominator);
  }
  return gamma;
}

Vector update_gamma_bo(const Problem& problem, const Hyperparams& hp,
                       const BlockPartition& partition) {
  const BlockLayout layout = BlockLayout::contiguous(partition);
  const PosteriorDetail detail = compute_posterior_detail(problem, layout, hp);
  return update_gamma_bo(problem, detail, hp, layout);
}

RecoveryResult solve_bo(const Problem& problem, const BlockLayout& layout, const BoConfig& config) {
  return detail::run_sbl(problem, layout, config,
                         [&problem](const PosteriorDetail& d, const Hyperparams& hp,
                                    const BlockLayout& l) {
                           return update_gamma_bo(problem, d, hp, l);
                         });
}

RecoveryResult solve_bo(const Problem& problem, const BlockPartition& partition,
                        const BoConfig& config) {
  return solve_bo(problem, BlockLayout::contiguous(partition), config);
}

}  // namespace bsbl
