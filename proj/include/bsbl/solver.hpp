#pragma once

#include "bsbl/model.hpp"

#include <algorithm>
#include <vector>

namespace bsbl {

/// How the noise variance lambda evolves during learning.
enum class LambdaRule {
  Fixed,   ///< keep lambda_init
  Robust,  ///< block-diagonal trace rule (default for noisy data)
  Naive,   ///< full-trace EM rule
};

inline constexpr double kNoiselessLambda = 1e-10;
inline constexpr double kLambdaFloor = 1e-12;

/// Shared by the EM and bound-optimization solvers.
struct SolverConfig {
  int max_iters = 500;
  /// Stop when max_i |gamma_i - gamma_i_prev| / max_i gamma_i < tol.
  double tol = 1e-8;
  /// Blocks with gamma_i below prune_rel * max(gamma) are pruned for good.
  double prune_rel = 1e-3;
  LambdaRule lambda_rule = LambdaRule::Fixed;
  double lambda_init = kNoiselessLambda;
  bool learn_correlation = true;
  double gamma_init = 1.0;
  /// Record the cost before and after every gamma update with B and lambda
  /// held at their current values. Costs one extra factorization per iteration.
  bool track_descent = false;
  bool parallel = true;
};

struct EmConfig : SolverConfig {};

struct BoConfig : SolverConfig {
  BoConfig() { max_iters = 200; }
};

/// Noiseless configuration: lambda fixed at 1e-10.
template <class Config>
Config noiseless_config() {
  Config c;
  c.lambda_rule = LambdaRule::Fixed;
  c.lambda_init = kNoiselessLambda;
  return c;
}

/// Noisy configuration: robust lambda rule starting from 1e-3 * |y|^2 / M.
template <class Config>
Config noisy_config(const Vector& y) {
  Config c;
  c.lambda_rule = LambdaRule::Robust;
  c.lambda_init = std::max(1e-3 * y.squaredNorm() / static_cast<double>(y.size()), kLambdaFloor);
  return c;
}

/// One gamma update evaluated with B and lambda frozen.
struct DescentStep {
  double before = 0.0;
  double after = 0.0;
};

struct RecoveryResult {
  Vector x_hat;
  int iterations = 0;
  bool converged = false;
  /// Cost at the hyperparameters of every posterior evaluation.
  std::vector<double> cost_trace;
  /// Filled when SolverConfig::track_descent is set.
  std::vector<DescentStep> descent;
  /// gamma after every iteration; pruned entries are exactly zero.
  std::vector<Vector> gamma_trace;
  double learned_r = 0.0;
  Hyperparams hyperparams;
};

}  // namespace bsbl
