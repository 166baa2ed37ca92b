#include "sbl_loop.hpp"

#include "bsbl/em.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace bsbl::detail {

namespace {

void check_config(const SolverConfig& c) {
  if (c.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  if (!(c.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
  if (!(c.prune_rel >= 0.0)) throw Error(ErrorCode::InvalidArgument, "prune threshold must be >= 0");
  if (!(c.gamma_init > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma_init must be positive");
  if (!(c.lambda_init > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda_init must be positive");
}

}  // namespace

RecoveryResult run_sbl(const Problem& problem, const BlockLayout& layout,
                       const SolverConfig& config, const GammaRule& rule) {
  problem.validate();
  check_config(config);
  if (problem.cols() != layout.num_columns()) {
    throw Error(ErrorCode::DimensionMismatch, "phi column count does not match the partition");
  }

  const BlockPartition& coefs = layout.coef_partition();
  const bool equal_sizes = coefs.equal_sizes();
  Hyperparams hp = Hyperparams::initial(coefs, config.gamma_init, config.lambda_init);

  PosteriorOptions opts;
  opts.parallel = config.parallel;
  opts.inverse_trace = config.lambda_rule == LambdaRule::Naive;

  RecoveryResult result;
  for (int it = 0; it < config.max_iters; ++it) {
    const PosteriorDetail detail = compute_posterior_detail(problem, layout, hp, opts);
    result.cost_trace.push_back(detail.state.cost);

    Vector gamma = rule(detail, hp, layout);
    std::optional<double> updated_cost;
    if (config.track_descent) {
      Hyperparams probe = hp;
      probe.gamma = gamma;
      updated_cost = cost_function(problem, layout, probe);
      result.descent.push_back({detail.state.cost, *updated_cost});
    }

    // Pruning is kept only when it does not raise the cost; otherwise the
    // small blocks stay and are offered for pruning again next iteration.
    const double peak = gamma.maxCoeff();
    if (peak > 0.0) {
      const double threshold = config.prune_rel * peak;
      Vector pruned = gamma;
      bool any = false;
      for (Index i = 0; i < gamma.size(); ++i) {
        if (gamma(i) > 0.0 && gamma(i) < threshold) {
          pruned(i) = 0.0;
          any = true;
        }
      }
      if (any) {
        Hyperparams probe = hp;
        if (!updated_cost) {
          probe.gamma = gamma;
          updated_cost = cost_function(problem, layout, probe);
        }
        probe.gamma = pruned;
        if (cost_function(problem, layout, probe) <= *updated_cost) gamma = std::move(pruned);
      }
    }

    // The first two posteriors use B_i = I.
    if (config.learn_correlation && it >= 1 && peak > 0.0) {
      CorrelationUpdate upd = update_B(detail.state, gamma, coefs, equal_sizes, hp.B, true);
      if (upd.updated) {
        hp.B = std::move(upd.B);
        result.learned_r = upd.r;
      }
    }

    if (config.lambda_rule == LambdaRule::Robust) {
      hp.lambda = std::max(update_lambda_robust(problem, detail.state, layout), kLambdaFloor);
    } else if (config.lambda_rule == LambdaRule::Naive) {
      hp.lambda = std::max(update_lambda_naive(problem, detail, layout, hp.lambda), kLambdaFloor);
    }

    const double change = peak > 0.0 ? (gamma - hp.gamma).cwiseAbs().maxCoeff() / peak : 0.0;
    hp.gamma = std::move(gamma);
    result.gamma_trace.push_back(hp.gamma);
    result.iterations = it + 1;
    if (peak <= 0.0 || change < config.tol) {
      result.converged = true;
      break;
    }
  }

  const PosteriorDetail last = compute_posterior_detail(problem, layout, hp, opts);
  result.cost_trace.push_back(last.state.cost);
  result.x_hat = last.state.mu;
  result.hyperparams = std::move(hp);
  return result;
}

}  // namespace bsbl::detail
