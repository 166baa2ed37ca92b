#pragma once

#include "bsbl/ebsbl.hpp"
#include "bsbl/model.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bsbl::experiments {

using Rng = std::mt19937_64;

/// Deterministic seed for trial `trial` of experiment `experiment`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t experiment, std::uint64_t trial);

/// Intra-block AR(1) coefficient of the generated blocks: one value for all
/// blocks, or drawn per block uniformly from [lo, hi). hi may be 1, in which
/// case a draw arbitrarily close to 1 yields a nearly constant block.
struct IntraCorrelation {
  double lo = 0.0;
  double hi = 0.0;

  static IntraCorrelation fixed(double r) { return {r, r}; }
  static IntraCorrelation uniform(double lo, double hi) { return {lo, hi}; }
  bool is_fixed() const { return lo == hi; }
  void validate() const;
};

struct GenSpec {
  Index M = 0;
  Index N = 0;
  BlockPartition partition;
  Index k_active = 0;
  IntraCorrelation intra_corr;
  bool normalize_blocks = false;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Zero-mean Gaussian entries, columns scaled to unit norm.
Matrix gen_sensing_matrix(Index m, Index n, std::uint64_t seed);

/// AR(1) block x_t = r x_{t-1} + sqrt(1 - r^2) e_t, x_0 = e_0, which has
/// covariance Toeplitz([1, r, ..., r^(d-1)]).
Vector gen_ar1_block(Index d, double r, Rng& rng);

struct SignalDraw {
  Vector x;
  std::vector<Index> active_blocks;  // ascending
  std::vector<double> block_corr;    // per active block
};

/// k_active distinct blocks chosen uniformly, each an AR(1) draw, optionally
/// normalized to unit norm. Uses its own stream derived from spec.seed.
SignalDraw gen_signal(const GenSpec& spec);

struct NoisyMeasurement {
  Vector y;
  /// Per-entry noise variance |v|^2 / M of the realized noise.
  double lambda_true = 0.0;
};

/// Adds white Gaussian noise scaled so 20 log10(|clean| / |v|) equals snr_db
/// exactly. An infinite snr_db returns the input unchanged.
NoisyMeasurement add_noise(const Vector& clean, double snr_db, Rng& rng);

/// |x_hat - x_gen|^2 / |x_gen|^2.
double nmse(const Vector& x_hat, const Vector& x_gen);

inline constexpr double kSuccessNmse = 1e-5;

/// Least squares on the given columns, zeros elsewhere.
Vector oracle_ls(const Problem& problem, const std::vector<Index>& support);

/// Column indices covered by the given blocks.
std::vector<Index> block_support(const BlockPartition& partition, const std::vector<Index>& blocks);

struct Synthetic {
  Problem problem;
  Vector x_gen;
  BlockPartition partition;
  std::vector<Index> support;
  double lambda_true = 0.0;
  bool noisy = false;
};

Synthetic synthesize(const GenSpec& spec);

/// Unknown-partition signal: `nonzeros` entries split into `groups` blocks of
/// random size at random non-overlapping positions, AR(1) within each block.
struct RandomBlockSpec {
  Index M = 0;
  Index N = 0;
  Index nonzeros = 0;
  Index groups = 0;
  IntraCorrelation intra_corr;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
};

Synthetic synthesize_random_blocks(const RandomBlockSpec& spec);

// ---------------------------------------------------------------------------
// Algorithms and trials

enum class AlgorithmId { BsblEm, BsblBo, BsblL1, EbsblEm, EbsblBo, EbsblL1, GroupLasso, Oracle };

struct AlgorithmSpec {
  AlgorithmId id = AlgorithmId::BsblEm;
  bool learn_correlation = true;
  /// Window length for EBSBL variants; block size of the user-defined
  /// partition when a known-partition solver is run without the true one.
  Index h = kDefaultWindow;
  /// Run a known-partition solver on uniform blocks of size h instead of the
  /// true partition.
  bool fixed_partition = false;

  std::string label() const;
};

std::string to_string(AlgorithmId id);
std::optional<AlgorithmId> parse_algorithm(const std::string& name);

struct Outcome {
  Vector x_hat;
  int iterations = 0;
  bool converged = true;
  double learned_r = 0.0;
};

/// Runs one algorithm with the defaults for the measurement regime (noiseless
/// when the synthetic carries no noise).
Outcome run_algorithm(const AlgorithmSpec& spec, const Synthetic& data);

struct TrialRecord {
  std::string experiment;
  std::string cell;  // "key=value;key=value"
  std::string algorithm;
  int trial = 0;
  std::uint64_t seed = 0;
  double nmse = 0.0;
  bool success = false;
  int iterations = 0;
  bool converged = true;
  double wall_time_ms = 0.0;
  double learned_r = 0.0;
};

enum class Execution { Serial, Parallel };

/// Number of OpenMP workers; BSBL_NUM_THREADS overrides the OpenMP default.
int worker_count();

// ---------------------------------------------------------------------------
// Protocols

struct PhaseTransitionConfig {
  Index N = 200;
  Index block_size = 10;
  std::vector<double> deltas{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> rhos{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> correlations{0.0, 0.95};
  std::vector<AlgorithmSpec> algorithms{{AlgorithmId::BsblEm}};
  int trials = 25;
  double threshold = 0.9;
  std::uint64_t seed = 1;
};

struct CorrelationSweepConfig {
  Index M = 100;
  Index N = 300;
  Index block_size = 4;
  Index k_active = 20;
  std::vector<double> correlations{-0.99, -0.5, 0.0, 0.5, 0.9, 0.95, 0.99};
  std::vector<AlgorithmSpec> algorithms{{AlgorithmId::BsblEm, true},  {AlgorithmId::BsblEm, false},
                                        {AlgorithmId::BsblBo, true},  {AlgorithmId::BsblBo, false},
                                        {AlgorithmId::BsblL1, true},  {AlgorithmId::BsblL1, false}};
  int trials = 25;
  std::uint64_t seed = 1;
};

struct NoiseSweepConfig {
  Index M = 128;
  Index N = 512;
  Index block_size = 8;
  Index k_active = 7;
  IntraCorrelation intra_corr = IntraCorrelation::uniform(0.8, 1.0);
  std::vector<double> snrs_db{5, 10, 15, 20, 25};
  std::vector<AlgorithmSpec> algorithms{{AlgorithmId::BsblEm}, {AlgorithmId::BsblBo},
                                        {AlgorithmId::BsblL1}, {AlgorithmId::GroupLasso},
                                        {AlgorithmId::Oracle}};
  int trials = 25;
  std::uint64_t seed = 1;
};

struct UnknownPartitionConfig {
  Index M = 192;
  Index N = 512;
  Index nonzeros = 48;
  std::vector<Index> groups{2, 4, 6, 8, 10};
  IntraCorrelation intra_corr = IntraCorrelation::uniform(0.8, 1.0);
  double snr_db = 15.0;
  std::vector<AlgorithmSpec> algorithms{
      {AlgorithmId::EbsblBo, true, 4},  {AlgorithmId::EbsblBo, true, 8},
      {AlgorithmId::EbsblEm, true, 4},  {AlgorithmId::EbsblEm, true, 8},
      {AlgorithmId::GroupLasso, true, 8, true}, {AlgorithmId::Oracle}};
  int trials = 25;
  std::uint64_t seed = 1;
};

struct CellSummary {
  std::string experiment;
  std::string cell;
  std::string algorithm;
  int trials = 0;
  double success_rate = 0.0;
  double mean_nmse = 0.0;
  double median_nmse = 0.0;
  double median_iterations = 0.0;
};

struct TransitionPoint {
  std::string series;  // algorithm and correlation
  double delta = 0.0;
  /// Highest rho whose success rate met the threshold; 0 when none did.
  double rho = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  std::vector<CellSummary> summary;
  std::vector<TransitionPoint> transition;  // phase transition only
};

ExperimentResult run_phase_transition(const PhaseTransitionConfig& config,
                                      Execution exec = Execution::Parallel);
ExperimentResult run_correlation_sweep(const CorrelationSweepConfig& config,
                                       Execution exec = Execution::Parallel);
ExperimentResult run_noise_sweep(const NoiseSweepConfig& config,
                                 Execution exec = Execution::Parallel);
ExperimentResult run_unknown_partition(const UnknownPartitionConfig& config,
                                       Execution exec = Execution::Parallel);

/// Per (cell, algorithm) aggregates in first-appearance order.
std::vector<CellSummary> summarize(const std::vector<TrialRecord>& trials);

double median(std::vector<double> values);

}  // namespace bsbl::experiments
