#include "bsbl/experiments.hpp"

#include "bsbl/group_lasso.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bsbl::experiments {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sub-streams of one trial seed.
enum Stream : std::uint64_t { kPhiStream = 1, kSignalStream = 2, kNoiseStream = 3 };

std::vector<Index> sample_without_replacement(Index population, Index count, Rng& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(population));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, population - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

double draw_correlation(const IntraCorrelation& c, Rng& rng) {
  if (c.is_fixed()) return c.lo;
  std::uniform_real_distribution<double> u(c.lo, c.hi);
  return u(rng);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t experiment, std::uint64_t trial) {
  return splitmix64(splitmix64(splitmix64(master) ^ experiment) ^ trial);
}

void IntraCorrelation::validate() const {
  if (!(lo <= hi) || !(lo > -1.0) || !(hi <= 1.0) || (is_fixed() && !(hi < 1.0))) {
    throw Error(ErrorCode::InvalidCoefficient, "intra-block correlation range must lie in (-1, 1)");
  }
}

void GenSpec::validate() const {
  if (M < 1 || N < 1) throw Error(ErrorCode::InvalidArgument, "M and N must be positive");
  if (partition.total() != N) {
    throw Error(ErrorCode::DimensionMismatch, "partition does not cover N entries");
  }
  if (k_active < 0 || k_active > partition.num_blocks()) {
    throw Error(ErrorCode::InvalidArgument, "k_active must lie in [0, g]");
  }
  intra_corr.validate();
  if (snr_db && std::isnan(*snr_db)) throw Error(ErrorCode::InvalidArgument, "SNR is NaN");
}

Matrix gen_sensing_matrix(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw Error(ErrorCode::InvalidArgument, "M and N must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix phi(m, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) phi(i, j) = normal(rng);
    const double norm = phi.col(j).norm();
    if (norm > 0.0) phi.col(j) /= norm;
  }
  return phi;
}

Vector gen_ar1_block(Index d, double r, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innovation = std::sqrt(std::max(1.0 - r * r, 0.0));
  Vector x(d);
  x(0) = normal(rng);
  for (Index t = 1; t < d; ++t) x(t) = r * x(t - 1) + innovation * normal(rng);
  return x;
}

SignalDraw gen_signal(const GenSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, kSignalStream, 0));
  SignalDraw draw;
  draw.x = Vector::Zero(spec.N);
  draw.active_blocks = sample_without_replacement(spec.partition.num_blocks(), spec.k_active, rng);
  for (Index b : draw.active_blocks) {
    const double r = draw_correlation(spec.intra_corr, rng);
    Vector block = gen_ar1_block(spec.partition.size(b), r, rng);
    if (spec.normalize_blocks) block /= block.norm();
    draw.x.segment(spec.partition.offset(b), spec.partition.size(b)) = block;
    draw.block_corr.push_back(r);
  }
  return draw;
}

NoisyMeasurement add_noise(const Vector& clean, double snr_db, Rng& rng) {
  NoisyMeasurement out;
  out.y = clean;
  if (std::isinf(snr_db) && snr_db > 0.0) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(clean.size());
  for (Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  const double target = clean.norm() / std::pow(10.0, snr_db / 20.0);
  v *= target / v.norm();
  out.y += v;
  out.lambda_true = v.squaredNorm() / static_cast<double>(v.size());
  return out;
}

double nmse(const Vector& x_hat, const Vector& x_gen) {
  if (x_hat.size() != x_gen.size()) throw Error(ErrorCode::DimensionMismatch, "nmse: length mismatch");
  const double denom = x_gen.squaredNorm();
  if (denom == 0.0) throw Error(ErrorCode::InvalidArgument, "nmse: reference signal is zero");
  return (x_hat - x_gen).squaredNorm() / denom;
}

Vector oracle_ls(const Problem& problem, const std::vector<Index>& support) {
  problem.validate();
  Matrix sub(problem.rows(), static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (support[k] < 0 || support[k] >= problem.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "support index out of range");
    }
    sub.col(static_cast<Index>(k)) = problem.phi.col(support[k]);
  }
  Vector x = Vector::Zero(problem.cols());
  if (support.empty()) return x;
  Eigen::ColPivHouseholderQR<Matrix> qr(sub);
  if (qr.rank() < sub.cols()) {
    throw Error(ErrorCode::SingularSystem, "support columns are linearly dependent");
  }
  const Vector xs = qr.solve(problem.y);
  for (std::size_t k = 0; k < support.size(); ++k) x(support[k]) = xs(static_cast<Index>(k));
  return x;
}

std::vector<Index> block_support(const BlockPartition& partition, const std::vector<Index>& blocks) {
  std::vector<Index> support;
  for (Index b : blocks) {
    for (Index k = 0; k < partition.size(b); ++k) support.push_back(partition.offset(b) + k);
  }
  return support;
}

Synthetic synthesize(const GenSpec& spec) {
  spec.validate();
  Synthetic s;
  s.partition = spec.partition;
  s.problem.phi = gen_sensing_matrix(spec.M, spec.N, derive_seed(spec.seed, kPhiStream, 0));
  const SignalDraw draw = gen_signal(spec);
  s.x_gen = draw.x;
  s.support = block_support(spec.partition, draw.active_blocks);
  const Vector clean = s.problem.phi * s.x_gen;
  if (spec.snr_db && std::isfinite(*spec.snr_db)) {
    Rng rng(derive_seed(spec.seed, kNoiseStream, 0));
    NoisyMeasurement noisy = add_noise(clean, *spec.snr_db, rng);
    s.problem.y = std::move(noisy.y);
    s.lambda_true = noisy.lambda_true;
    s.noisy = true;
  } else {
    s.problem.y = clean;
  }
  return s;
}

Synthetic synthesize_random_blocks(const RandomBlockSpec& spec) {
  if (spec.groups < 1 || spec.nonzeros < spec.groups || spec.nonzeros > spec.N) {
    throw Error(ErrorCode::InvalidArgument, "need 1 <= groups <= nonzeros <= N");
  }
  spec.intra_corr.validate();
  Rng rng(derive_seed(spec.seed, kSignalStream, 0));

  // Block sizes: random composition of `nonzeros` into `groups` positive parts.
  std::vector<Index> cuts = sample_without_replacement(spec.nonzeros - 1, spec.groups - 1, rng);
  std::vector<Index> sizes;
  Index prev = 0;
  for (Index c : cuts) {
    sizes.push_back(c + 1 - prev);
    prev = c + 1;
  }
  sizes.push_back(spec.nonzeros - prev);

  // Gaps: composition of the free entries into groups + 1 nonnegative parts.
  const Index free = spec.N - spec.nonzeros;
  std::vector<Index> bars = sample_without_replacement(free + spec.groups, spec.groups, rng);
  std::vector<Index> gaps;
  prev = 0;
  for (Index b : bars) {
    gaps.push_back(b - prev);
    prev = b + 1;
  }
  gaps.push_back(free + spec.groups - prev);

  std::vector<Index> part_sizes;
  std::vector<Index> active;
  Synthetic s;
  s.x_gen = Vector::Zero(spec.N);
  Index pos = 0;
  for (Index k = 0; k < spec.groups; ++k) {
    if (gaps[static_cast<std::size_t>(k)] > 0) part_sizes.push_back(gaps[static_cast<std::size_t>(k)]);
    pos += gaps[static_cast<std::size_t>(k)];
    const Index d = sizes[static_cast<std::size_t>(k)];
    const double r = draw_correlation(spec.intra_corr, rng);
    s.x_gen.segment(pos, d) = gen_ar1_block(d, r, rng);
    active.push_back(static_cast<Index>(part_sizes.size()));
    part_sizes.push_back(d);
    pos += d;
  }
  if (gaps.back() > 0) part_sizes.push_back(gaps.back());

  s.partition = BlockPartition(part_sizes);
  s.support = block_support(s.partition, active);
  s.problem.phi = gen_sensing_matrix(spec.M, spec.N, derive_seed(spec.seed, kPhiStream, 0));
  const Vector clean = s.problem.phi * s.x_gen;
  if (spec.snr_db && std::isfinite(*spec.snr_db)) {
    Rng noise_rng(derive_seed(spec.seed, kNoiseStream, 0));
    NoisyMeasurement noisy = add_noise(clean, *spec.snr_db, noise_rng);
    s.problem.y = std::move(noisy.y);
    s.lambda_true = noisy.lambda_true;
    s.noisy = true;
  } else {
    s.problem.y = clean;
  }
  return s;
}

// ---------------------------------------------------------------------------

std::string to_string(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::BsblEm: return "bsbl-em";
    case AlgorithmId::BsblBo: return "bsbl-bo";
    case AlgorithmId::BsblL1: return "bsbl-l1";
    case AlgorithmId::EbsblEm: return "ebsbl-em";
    case AlgorithmId::EbsblBo: return "ebsbl-bo";
    case AlgorithmId::EbsblL1: return "ebsbl-l1";
    case AlgorithmId::GroupLasso: return "group-lasso";
    case AlgorithmId::Oracle: return "oracle";
  }
  return "unknown";
}

std::optional<AlgorithmId> parse_algorithm(const std::string& name) {
  for (AlgorithmId id : {AlgorithmId::BsblEm, AlgorithmId::BsblBo, AlgorithmId::BsblL1,
                         AlgorithmId::EbsblEm, AlgorithmId::EbsblBo, AlgorithmId::EbsblL1,
                         AlgorithmId::GroupLasso, AlgorithmId::Oracle}) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

namespace {

bool is_ebsbl(AlgorithmId id) {
  return id == AlgorithmId::EbsblEm || id == AlgorithmId::EbsblBo || id == AlgorithmId::EbsblL1;
}

bool uses_correlation(AlgorithmId id) {
  return id != AlgorithmId::GroupLasso && id != AlgorithmId::Oracle;
}

}  // namespace

std::string AlgorithmSpec::label() const {
  std::string s = to_string(id);
  if (is_ebsbl(id)) s += fmt::format("[h={}]", h);
  if (fixed_partition && !is_ebsbl(id)) s += fmt::format("[blocks={}]", h);
  if (uses_correlation(id) && !learn_correlation) s += "[corr=off]";
  return s;
}

Outcome run_algorithm(const AlgorithmSpec& spec, const Synthetic& data) {
  const Problem& problem = data.problem;
  const bool noisy = data.noisy;
  const BlockPartition partition =
      spec.fixed_partition ? BlockPartition::uniform(problem.cols(), spec.h) : data.partition;

  auto em_config = [&] {
    EmConfig c = noisy ? noisy_config<EmConfig>(problem.y) : noiseless_config<EmConfig>();
    c.learn_correlation = spec.learn_correlation;
    return c;
  };
  auto bo_config = [&] {
    BoConfig c = noisy ? noisy_config<BoConfig>(problem.y) : noiseless_config<BoConfig>();
    c.learn_correlation = spec.learn_correlation;
    return c;
  };
  auto l1_config = [&] {
    L1Config c = noisy ? L1Config::noisy(problem.y) : L1Config::noiseless();
    c.learn_correlation = spec.learn_correlation;
    return c;
  };
  auto from_result = [](RecoveryResult r) {
    return Outcome{std::move(r.x_hat), r.iterations, r.converged, r.learned_r};
  };

  switch (spec.id) {
    case AlgorithmId::BsblEm: return from_result(solve_em(problem, partition, em_config()));
    case AlgorithmId::BsblBo: return from_result(solve_bo(problem, partition, bo_config()));
    case AlgorithmId::BsblL1: return from_result(solve_l1(problem, partition, l1_config()));
    case AlgorithmId::EbsblEm:
      return from_result(solve_ebsbl(problem, spec.h, Algorithm::EM, em_config()));
    case AlgorithmId::EbsblBo:
      return from_result(solve_ebsbl(problem, spec.h, Algorithm::BO, bo_config()));
    case AlgorithmId::EbsblL1:
      return from_result(solve_ebsbl(problem, spec.h, Algorithm::L1, l1_config()));
    case AlgorithmId::GroupLasso: {
      GroupLassoProblem p{problem.y, problem.phi, partition, 1.0};
      p.reg = (noisy ? 0.01 : 1e-6) * 2.0 * group_lasso_reg_max(p.H, p.y, p.partition);
      GroupLassoResult r = solve_group_lasso(p);
      return Outcome{std::move(r.u), r.iterations, r.converged, 0.0};
    }
    case AlgorithmId::Oracle:
      return Outcome{oracle_ls(problem, data.support), 1, true, 0.0};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm");
}

int worker_count() {
  if (const char* env = std::getenv("BSBL_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& trials) {
  std::vector<CellSummary> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<std::vector<double>> nmses;
  std::vector<std::vector<double>> iters;
  for (const TrialRecord& t : trials) {
    const auto key = std::make_pair(t.cell, t.algorithm);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({t.experiment, t.cell, t.algorithm});
      nmses.emplace_back();
      iters.emplace_back();
    }
    CellSummary& s = out[it->second];
    s.trials += 1;
    s.success_rate += t.success ? 1.0 : 0.0;
    nmses[it->second].push_back(t.nmse);
    iters[it->second].push_back(t.iterations);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    CellSummary& s = out[k];
    s.success_rate /= s.trials;
    s.mean_nmse = std::accumulate(nmses[k].begin(), nmses[k].end(), 0.0) / s.trials;
    s.median_nmse = median(nmses[k]);
    s.median_iterations = median(iters[k]);
  }
  return out;
}

namespace {

struct Cell {
  std::string label;
  std::function<Synthetic(std::uint64_t)> make;
  std::vector<AlgorithmSpec> algorithms;
};

enum ExperimentId : std::uint64_t {
  kPhase = 1,
  kCorrelation = 2,
  kNoise = 3,
  kUnknownPartition = 4,
};

std::vector<TrialRecord> run_cells(const std::string& name, std::uint64_t experiment,
                                   const std::vector<Cell>& cells, int trials,
                                   std::uint64_t master, Execution exec) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  const std::size_t n_tasks = cells.size() * static_cast<std::size_t>(trials);
  std::vector<std::vector<TrialRecord>> slots(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);

  auto run_task = [&](std::size_t task) {
    try {
      const Cell& cell = cells[task / static_cast<std::size_t>(trials)];
      const int trial = static_cast<int>(task % static_cast<std::size_t>(trials));
      const std::uint64_t seed = derive_seed(master, experiment, static_cast<std::uint64_t>(trial));
      const Synthetic data = cell.make(seed);
      for (const AlgorithmSpec& alg : cell.algorithms) {
        const auto start = std::chrono::steady_clock::now();
        const Outcome out = run_algorithm(alg, data);
        const auto stop = std::chrono::steady_clock::now();
        TrialRecord rec;
        rec.experiment = name;
        rec.cell = cell.label;
        rec.algorithm = alg.label();
        rec.trial = trial;
        rec.seed = seed;
        rec.nmse = nmse(out.x_hat, data.x_gen);
        rec.success = rec.nmse <= kSuccessNmse;
        rec.iterations = out.iterations;
        rec.converged = out.converged;
        rec.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        rec.learned_r = out.learned_r;
        slots[task].push_back(std::move(rec));
      }
    } catch (...) {
      errors[task] = std::current_exception();
    }
  };

  if (exec == Execution::Parallel) {
    const long long count = static_cast<long long>(n_tasks);
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
    for (long long task = 0; task < count; ++task) run_task(static_cast<std::size_t>(task));
  } else {
    for (std::size_t task = 0; task < n_tasks; ++task) run_task(task);
  }

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<TrialRecord> out;
  for (auto& slot : slots) {
    for (auto& rec : slot) out.push_back(std::move(rec));
  }
  return out;
}

std::string num(double v) { return fmt::format("{:g}", v); }

}  // namespace

ExperimentResult run_phase_transition(const PhaseTransitionConfig& config, Execution exec) {
  if (config.N < 1 || config.block_size < 1 || config.N % config.block_size != 0) {
    throw Error(ErrorCode::InvalidBlockSize, "block size must divide N");
  }
  const BlockPartition partition = BlockPartition::uniform(config.N, config.block_size);
  struct CellInfo {
    double r, delta, rho;
  };
  std::vector<Cell> cells;
  std::vector<CellInfo> info;
  for (double r : config.correlations) {
    for (double delta : config.deltas) {
      const Index m = static_cast<Index>(std::lround(delta * static_cast<double>(config.N)));
      if (m < 1 || m > config.N) continue;
      for (double rho : config.rhos) {
        const Index k = static_cast<Index>(
            std::lround(rho * static_cast<double>(m) / static_cast<double>(config.block_size)));
        const Index nonzeros = k * config.block_size;
        if (k < 1 || k > partition.num_blocks() || nonzeros > m) continue;
        const double rho_exact = static_cast<double>(nonzeros) / static_cast<double>(m);
        const double delta_exact = static_cast<double>(m) / static_cast<double>(config.N);
        GenSpec spec;
        spec.M = m;
        spec.N = config.N;
        spec.partition = partition;
        spec.k_active = k;
        spec.intra_corr = IntraCorrelation::fixed(r);
        Cell cell;
        cell.label = fmt::format("r={};delta={};rho={};M={};K={}", num(r), num(delta_exact),
                                 num(rho_exact), m, nonzeros);
        cell.make = [spec](std::uint64_t seed) mutable {
          spec.seed = seed;
          return synthesize(spec);
        };
        cell.algorithms = config.algorithms;
        cells.push_back(std::move(cell));
        info.push_back({r, delta_exact, rho_exact});
      }
    }
  }

  ExperimentResult result;
  result.trials = run_cells("phase", kPhase, cells, config.trials, config.seed, exec);
  result.summary = summarize(result.trials);

  // Highest rho per (algorithm, r, delta) with success rate >= threshold.
  std::map<std::string, std::size_t> cell_index;
  for (std::size_t c = 0; c < cells.size(); ++c) cell_index[cells[c].label] = c;
  std::vector<TransitionPoint> points;
  std::map<std::string, std::size_t> point_index;
  for (const CellSummary& s : result.summary) {
    const CellInfo& ci = info[cell_index.at(s.cell)];
    const std::string series = fmt::format("{};r={}", s.algorithm, num(ci.r));
    const std::string key = series + fmt::format(";delta={}", num(ci.delta));
    auto it = point_index.find(key);
    if (it == point_index.end()) {
      it = point_index.emplace(key, points.size()).first;
      points.push_back({series, ci.delta, 0.0});
    }
    if (s.success_rate >= config.threshold) {
      points[it->second].rho = std::max(points[it->second].rho, ci.rho);
    }
  }
  result.transition = std::move(points);
  return result;
}

ExperimentResult run_correlation_sweep(const CorrelationSweepConfig& config, Execution exec) {
  const BlockPartition partition = BlockPartition::uniform(config.N, config.block_size);
  std::vector<Cell> cells;
  for (double r : config.correlations) {
    GenSpec spec;
    spec.M = config.M;
    spec.N = config.N;
    spec.partition = partition;
    spec.k_active = config.k_active;
    spec.intra_corr = IntraCorrelation::fixed(r);
    spec.normalize_blocks = true;
    Cell cell;
    cell.label = fmt::format("r={}", num(r));
    cell.make = [spec](std::uint64_t seed) mutable {
      spec.seed = seed;
      return synthesize(spec);
    };
    cell.algorithms = config.algorithms;
    cells.push_back(std::move(cell));
  }
  ExperimentResult result;
  result.trials = run_cells("correlation", kCorrelation, cells, config.trials, config.seed, exec);
  result.summary = summarize(result.trials);
  return result;
}

ExperimentResult run_noise_sweep(const NoiseSweepConfig& config, Execution exec) {
  const BlockPartition partition = BlockPartition::uniform(config.N, config.block_size);
  std::vector<Cell> cells;
  for (double snr : config.snrs_db) {
    GenSpec spec;
    spec.M = config.M;
    spec.N = config.N;
    spec.partition = partition;
    spec.k_active = config.k_active;
    spec.intra_corr = config.intra_corr;
    spec.snr_db = snr;
    Cell cell;
    cell.label = fmt::format("snr_db={}", num(snr));
    cell.make = [spec](std::uint64_t seed) mutable {
      spec.seed = seed;
      return synthesize(spec);
    };
    cell.algorithms = config.algorithms;
    cells.push_back(std::move(cell));
  }
  ExperimentResult result;
  result.trials = run_cells("noise", kNoise, cells, config.trials, config.seed, exec);
  result.summary = summarize(result.trials);
  return result;
}

ExperimentResult run_unknown_partition(const UnknownPartitionConfig& config, Execution exec) {
  std::vector<Cell> cells;
  for (Index groups : config.groups) {
    RandomBlockSpec spec;
    spec.M = config.M;
    spec.N = config.N;
    spec.nonzeros = config.nonzeros;
    spec.groups = groups;
    spec.intra_corr = config.intra_corr;
    spec.snr_db = config.snr_db;
    Cell cell;
    cell.label = fmt::format("groups={}", groups);
    cell.make = [spec](std::uint64_t seed) mutable {
      spec.seed = seed;
      return synthesize_random_blocks(spec);
    };
    cell.algorithms = config.algorithms;
    cells.push_back(std::move(cell));
  }
  ExperimentResult result;
  result.trials =
      run_cells("unknown-partition", kUnknownPartition, cells, config.trials, config.seed, exec);
  result.summary = summarize(result.trials);
  return result;
}

}  // namespace bsbl::experiments
