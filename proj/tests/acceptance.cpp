// Runs every acceptance criterion and prints one line per criterion.
// Usage: bsbl_acceptance [criterion numbers...]

#include "bsbl/bo.hpp"
#include "bsbl/cli.hpp"
#include "bsbl/correlation.hpp"
#include "bsbl/ebsbl.hpp"
#include "bsbl/em.hpp"
#include "bsbl/experiments.hpp"
#include "bsbl/l1.hpp"
#include "oracles/dense_oracle.hpp"

#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace {

using namespace bsbl;
namespace ex = bsbl::experiments;
namespace fs = std::filesystem;

// Pinned tolerances and protocol sizes.
constexpr double kOracleRelTol = 1e-10;
constexpr int kOracleInstances = 50;
constexpr double kOracleBudgetS = 10.0;

constexpr double kDescentSlack = 1e-9;
constexpr int kDescentInstances = 20;
constexpr double kDescentBudgetS = 30.0;

constexpr int kCorrTrials = 50;
constexpr double kCorrSuccessRate = 0.9;
constexpr double kCorrGain = 10.0;
constexpr double kCorrBudgetS = 600.0;

constexpr int kNoiseTrials = 25;
constexpr double kEmOverOracle = 2.0;
constexpr double kBoOverEm = 1.5;
constexpr double kNoiseBudgetS = 900.0;

constexpr int kUnknownTrials = 25;
constexpr double kWindowRatio = 1.5;

constexpr double kReductionTol = 1e-8;

constexpr int kPhaseTrials = 25;
constexpr double kPhaseRate = 0.9;
constexpr double kPhaseTrend = 0.2;
constexpr double kPhaseBudgetS = 900.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: dense oracle equivalence -------------------------------------------

Verdict dense_oracle() {
  oracle::Rng rng(20240601);
  double worst = 0.0;
  std::string worst_rule;
  auto track = [&](double err, const char* rule) {
    if (!(err <= worst)) {
      worst = err;
      worst_rule = rule;
    }
  };
  for (int t = 0; t < kOracleInstances; ++t) {
    std::uniform_int_distribution<int> md(3, 10);
    const Eigen::Index m = md(rng);
    std::vector<Eigen::Index> sizes;
    const bool equal = t % 2 == 0;
    if (equal) {
      std::uniform_int_distribution<int> dd(2, 5);
      const Eigen::Index d = dd(rng);
      std::uniform_int_distribution<int> gd(2, static_cast<int>(20 / d));
      sizes.assign(static_cast<std::size_t>(gd(rng)), d);
    } else {
      std::uniform_int_distribution<int> nd(6, 20);
      sizes = oracle::random_sizes(nd(rng), 5, rng);
    }
    const oracle::Instance in = oracle::random_instance(m, sizes, rng, t % 3 == 0);
    const Problem problem{in.y, in.phi};
    const BlockPartition part(sizes);
    const Hyperparams hp{in.gamma, in.B, in.lambda};

    const PosteriorState s = compute_posterior(problem, part, hp);
    const oracle::Posterior ref = oracle::posterior(in);
    track(oracle::rel_err(s.mu, ref.mu), "posterior mean");
    for (Index i = 0; i < part.num_blocks(); ++i) {
      track(oracle::rel_err(s.sigma_blocks[i],
                            ref.sigma.block(part.offset(i), part.offset(i), part.size(i), part.size(i))),
            "posterior covariance");
    }
    track(oracle::rel_err(cost_function(problem, part, hp), oracle::cost(in)), "cost");

    const Vector g_em = update_gamma_em(s, hp, part);
    Vector g_ref = oracle::gamma_em(in, ref);
    for (Index i = 0; i < g_ref.size(); ++i) {
      if (in.gamma(i) == 0.0) g_ref(i) = 0.0;
    }
    track(oracle::rel_err(g_em, g_ref), "em gamma");
    track(oracle::rel_err(update_lambda_naive(problem, part, hp), oracle::lambda_naive(in, ref)),
          "naive lambda");
    track(oracle::rel_err(update_lambda_robust(problem, s, part), oracle::lambda_robust(in, ref)),
          "robust lambda");

    const CorrelationUpdate cu = update_B(s, g_em, part, equal, in.B);
    if (equal) {
      track(oracle::rel_err(cu.B[0], oracle::b_equal(in, ref, g_em)), "equal-size B");
    } else {
      const double r = oracle::r_pooled(in, ref, g_em);
      for (Index i = 0; i < part.num_blocks(); ++i) {
        track(oracle::rel_err(cu.B[i], oracle::toeplitz(r, part.size(i))), "pooled B");
      }
    }

    oracle::Instance in_bo = in;
    in_bo.gamma = in.gamma.cwiseMax(0.05);  // every block active
    const Vector g_bo = update_gamma_bo(problem, {in_bo.gamma, in_bo.B, in_bo.lambda}, part);
    track(oracle::rel_err(g_bo, oracle::gamma_bo(in_bo)), "bo gamma");

    const DualWeights w = compute_weights(problem, hp, part);
    track(oracle::rel_err(w.z, oracle::l1_z(in)), "l1 weights");

    // Variable transform: H = phi diag(B_i^{1/2} / w_i) and u_i = w_i B_i^{-1/2} x_i.
    const GroupLassoProblem inner = build_inner_problem(problem, w, in.B, part);
    Matrix h_ref(in.m(), in.n());
    const Vector x = oracle::gaussian(in.n(), 1, rng);
    Vector u_ref(in.n());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const Eigen::SelfAdjointEigenSolver<Matrix> es(in.B[i]);
      const Eigen::Index o = in.offset(i);
      const double wi = w.w(static_cast<Eigen::Index>(i));
      h_ref.middleCols(o, sizes[i]) = in.phi.middleCols(o, sizes[i]) * es.operatorSqrt() / wi;
      u_ref.segment(o, sizes[i]) = wi * es.operatorInverseSqrt() * x.segment(o, sizes[i]);
    }
    track(oracle::rel_err(inner.H, h_ref), "transformed design");
    track(oracle::rel_err(inner_from_x(x, w, in.B, part), u_ref), "transformed variable");

    std::vector<Vector> blocks;
    for (Index i = 0; i < part.num_blocks(); ++i) blocks.push_back(x.segment(part.offset(i), part.size(i)));
    track(oracle::rel_err(gamma_from_solution(blocks, w, in.B), oracle::gamma_from_x(in, x, w.z)),
          "gamma from solution");
  }
  return {worst <= kOracleRelTol,
          fmt::format("{} instances, worst relative error {:.3g} ({})", kOracleInstances, worst,
                      worst_rule)};
}

// --- 2: descent ------------------------------------------------------------

Verdict descent() {
  int pair_violations = 0;
  int trace_violations = 0;
  int lasso_violations = 0;
  double worst_rise = 0.0;
  std::size_t pairs = 0;
  std::size_t steps = 0;
  auto check_trace = [&](const std::vector<double>& trace, int& violations) {
    for (std::size_t k = 1; k < trace.size(); ++k) {
      ++steps;
      const double rise = trace[k] - trace[k - 1];
      worst_rise = std::max(worst_rise, rise);
      if (rise > kDescentSlack) ++violations;
    }
  };
  for (int t = 0; t < kDescentInstances; ++t) {
    ex::GenSpec spec{48, 96, BlockPartition::uniform(96, 4), 4, ex::IntraCorrelation::fixed(0.8),
                     true, 10.0 + t % 3 * 5.0, ex::derive_seed(2, 0, static_cast<std::uint64_t>(t))};
    const ex::Synthetic d = ex::synthesize(spec);

    // Default noisy runs: every gamma update, taken with B and lambda at their
    // current values, must not raise the cost.
    EmConfig em = noisy_config<EmConfig>(d.problem.y);
    em.track_descent = true;
    BoConfig bo = noisy_config<BoConfig>(d.problem.y);
    bo.track_descent = true;
    for (const RecoveryResult& r : {solve_em(d.problem, d.partition, em), solve_bo(d.problem, d.partition, bo)}) {
      for (const DescentStep& s : r.descent) {
        ++pairs;
        worst_rise = std::max(worst_rise, s.after - s.before);
        if (s.after > s.before + kDescentSlack) ++pair_violations;
      }
    }

    // With B and lambda held fixed the whole cost trace must be non-increasing.
    EmConfig em_fixed = em;
    em_fixed.lambda_rule = LambdaRule::Fixed;
    em_fixed.lambda_init = d.lambda_true;
    em_fixed.learn_correlation = false;
    BoConfig bo_fixed = bo;
    bo_fixed.lambda_rule = LambdaRule::Fixed;
    bo_fixed.lambda_init = d.lambda_true;
    bo_fixed.learn_correlation = false;
    check_trace(solve_em(d.problem, d.partition, em_fixed).cost_trace, trace_violations);
    check_trace(solve_bo(d.problem, d.partition, bo_fixed).cost_trace, trace_violations);

    GroupLassoProblem gl{d.problem.y, d.problem.phi, d.partition, 1.0};
    gl.reg = 0.05 * 2.0 * group_lasso_reg_max(gl.H, gl.y, gl.partition);
    check_trace(solve_group_lasso(gl).objective_trace, lasso_violations);
  }
  const bool pass = pair_violations == 0 && trace_violations == 0 && lasso_violations == 0;
  return {pass, fmt::format("{} gamma steps, {} trace steps; violations: gamma {}, trace {}, "
                            "group lasso {}; largest rise {:.3g}",
                            pairs, steps, pair_violations, trace_violations, lasso_violations,
                            worst_rise)};
}

// --- 3: correlation benefit ------------------------------------------------

Verdict correlation_benefit() {
  ex::CorrelationSweepConfig c;
  c.correlations = {0.95};
  c.algorithms = {{ex::AlgorithmId::BsblEm, true}, {ex::AlgorithmId::BsblEm, false}};
  c.trials = kCorrTrials;
  c.seed = 3;
  const ex::ExperimentResult r = ex::run_correlation_sweep(c);
  const ex::CellSummary& on = r.summary.at(0);
  const ex::CellSummary& off = r.summary.at(1);
  const double gain = off.median_nmse / on.median_nmse;
  return {on.success_rate >= kCorrSuccessRate && gain >= kCorrGain,
          fmt::format("success {:.2f} (learned) vs {:.2f} (identity B); median NMSE {:.3g} vs "
                      "{:.3g}, gain {:.3g}",
                      on.success_rate, off.success_rate, on.median_nmse, off.median_nmse, gain)};
}

// --- 4 and 5: noisy regime -------------------------------------------------

ex::ExperimentResult noise_run() {
  static std::optional<ex::ExperimentResult> cached;
  if (!cached) {
    ex::NoiseSweepConfig c;
    c.snrs_db = {15.0};
    c.algorithms = {{ex::AlgorithmId::BsblEm}, {ex::AlgorithmId::BsblBo},
                    {ex::AlgorithmId::GroupLasso}, {ex::AlgorithmId::Oracle}};
    c.trials = kNoiseTrials;
    c.seed = 4;
    cached = ex::run_noise_sweep(c);
  }
  return *cached;
}

const ex::CellSummary& find(const std::vector<ex::CellSummary>& s, const std::string& alg) {
  for (const auto& c : s) {
    if (c.algorithm == alg) return c;
  }
  throw std::runtime_error("missing summary for " + alg);
}

Verdict noisy_regime() {
  const auto r = noise_run();
  const double em = find(r.summary, "bsbl-em").median_nmse;
  const double bo = find(r.summary, "bsbl-bo").median_nmse;
  const double gl = find(r.summary, "group-lasso").median_nmse;
  const double orc = find(r.summary, "oracle").median_nmse;
  const bool pass = em <= kEmOverOracle * orc && bo <= kBoOverEm * em && em <= kBoOverEm * bo &&
                    gl > em && gl > bo;
  return {pass, fmt::format("median NMSE em {:.3g}, bo {:.3g}, group lasso {:.3g}, oracle {:.3g}; "
                            "em/oracle {:.2f}, bo/em {:.2f}",
                            em, bo, gl, orc, em / orc, bo / em)};
}

Verdict speed_ordering() {
  const auto r = noise_run();
  const double em = find(r.summary, "bsbl-em").median_iterations;
  const double bo = find(r.summary, "bsbl-bo").median_iterations;
  return {bo < em, fmt::format("median iterations bo {} vs em {}", bo, em)};
}

// --- 6: unknown partition --------------------------------------------------

Verdict window_insensitivity() {
  ex::UnknownPartitionConfig c;
  c.algorithms = {{ex::AlgorithmId::EbsblBo, true, 4},
                  {ex::AlgorithmId::EbsblBo, true, 8},
                  {ex::AlgorithmId::GroupLasso, true, 8, true}};
  c.trials = kUnknownTrials;
  c.seed = 6;
  // One cell per trial so the group count varies over 2..10 across trials.
  c.groups = {2, 4, 6, 8, 10};
  c.trials = kUnknownTrials / static_cast<int>(c.groups.size());
  const ex::ExperimentResult r = ex::run_unknown_partition(c);
  std::vector<double> h4;
  std::vector<double> h8;
  std::vector<double> gl;
  for (const auto& t : r.trials) {
    if (t.algorithm == "ebsbl-bo[h=4]") h4.push_back(t.nmse);
    if (t.algorithm == "ebsbl-bo[h=8]") h8.push_back(t.nmse);
    if (t.algorithm == "group-lasso[blocks=8]") gl.push_back(t.nmse);
  }
  const double m4 = ex::median(h4);
  const double m8 = ex::median(h8);
  const double mg = ex::median(gl);
  const double ratio = std::max(m4, m8) / std::min(m4, m8);
  return {ratio <= kWindowRatio && m4 <= mg && m8 <= mg,
          fmt::format("{} trials; median NMSE h=4 {:.3g}, h=8 {:.3g} (ratio {:.2f}), fixed-block "
                      "group lasso {:.3g}",
                      h4.size(), m4, m8, ratio, mg)};
}

// --- 7: reductions ---------------------------------------------------------

Verdict reductions() {
  bool gamma_equal = true;
  std::size_t traces = 0;
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const std::uint64_t seed = ex::derive_seed(7, 0, static_cast<std::uint64_t>(t));
    const ex::Synthetic d = ex::synthesize({30, 60, BlockPartition::uniform(60, 5), 2,
                                            ex::IntraCorrelation::fixed(0.8), true, 20.0, seed});
    const EmConfig c = noisy_config<EmConfig>(d.problem.y);
    const RecoveryResult a = solve_ebsbl(d.problem, 1, Algorithm::EM, c);
    const RecoveryResult b = solve_em(d.problem, BlockPartition::uniform(60, 1), c);
    gamma_equal = gamma_equal && a.gamma_trace.size() == b.gamma_trace.size();
    for (std::size_t k = 0; gamma_equal && k < a.gamma_trace.size(); ++k) {
      gamma_equal = a.gamma_trace[k] == b.gamma_trace[k];
    }
    traces += a.gamma_trace.size();

    L1Config l1 = L1Config::noisy(d.problem.y);
    l1.outer_iters = 1;
    l1.learn_correlation = false;
    l1.initial_weights = Vector::Ones(d.partition.num_blocks());
    l1.reg_rule = RegRule::UserValue;
    l1.reg_value = 0.1;
    l1.inner_tol = 1e-12;
    l1.inner_max_iters = 200000;
    const RecoveryResult lr = solve_l1(d.problem, d.partition, l1);
    const GroupLassoResult g =
        solve_group_lasso({d.problem.y, d.problem.phi, d.partition, 0.1}, 1e-12, 200000);
    worst = std::max(worst, (lr.x_hat - g.u).cwiseAbs().maxCoeff());
  }
  return {gamma_equal && worst <= kReductionTol,
          fmt::format("h=1 gamma traces {} over {} iterations; l1 vs group lasso max difference "
                      "{:.3g}",
                      gamma_equal ? "identical" : "differ", traces, worst)};
}

// --- 8: determinism --------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "bsbl_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  int codes = 0;
  for (const char* run : {"a", "b"}) {
    codes += cli::run({"bsbl", "bench", "--experiment", "noise", "--trials", "2", "--seed", "8",
                       "--out", (root / run).string()},
                      sink, sink);
  }
  const std::string a = slurp(root / "a" / "results.csv");
  const std::string b = slurp(root / "b" / "results.csv");
  fs::remove_all(root);
  return {codes == 0 && !a.empty() && a == b,
          fmt::format("exit codes {}, {} bytes, {}", codes, a.size(),
                      a == b ? "byte-identical" : "different")};
}

// --- 9: phase transition ---------------------------------------------------

Verdict phase_transition() {
  ex::PhaseTransitionConfig c;
  c.N = 200;
  c.block_size = 10;
  c.deltas = {0.25};
  c.rhos = {0.6, 0.8};
  c.correlations = {0.0, 0.95};
  c.trials = kPhaseTrials;
  c.seed = 9;
  const ex::ExperimentResult r = ex::run_phase_transition(c);
  auto rate = [&](const std::string& prefix) {
    for (const auto& s : r.summary) {
      if (s.cell.rfind(prefix, 0) == 0) return s.success_rate;
    }
    throw std::runtime_error("missing cell " + prefix);
  };
  const double r95_06 = rate("r=0.95;delta=0.25;rho=0.6");
  const double r95_08 = rate("r=0.95;delta=0.25;rho=0.8");
  const double r0_08 = rate("r=0;delta=0.25;rho=0.8");
  return {r95_06 >= kPhaseRate && r95_08 - r0_08 >= kPhaseTrend,
          fmt::format("success at rho 0.6 (r=0.95) {:.2f}; at rho 0.8: r=0.95 {:.2f}, r=0 {:.2f}",
                      r95_06, r95_08, r0_08)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
  double budget_s;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "dense-oracle equivalence", dense_oracle, kOracleBudgetS},
      {2, "descent", descent, kDescentBudgetS},
      {3, "correlation benefit", correlation_benefit, kCorrBudgetS},
      {4, "noisy regime", noisy_regime, kNoiseBudgetS},
      {5, "speed ordering", speed_ordering, kNoiseBudgetS},
      {6, "window insensitivity", window_insensitivity, kNoiseBudgetS},
      {7, "reductions", reductions, 60.0},
      {8, "determinism", determinism, 300.0},
      {9, "phase transition", phase_transition, kPhaseBudgetS},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (secs > c.budget_s) {
      v.pass = false;
      v.detail += fmt::format("; over the {:.0f} s budget", c.budget_s);
    }
    std::cout << fmt::format("criterion {} ({}): {} [{:.1f} s] {}", c.id, c.name,
                             v.pass ? "PASS" : "FAIL", secs, v.detail)
              << std::endl;
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
