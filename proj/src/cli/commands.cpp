#include "bsbl/cli.hpp"

#include "bsbl/ebsbl.hpp"
#include "bsbl/experiments.hpp"
#include "bsbl/io.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <optional>

#ifndef BSBL_VERSION
#define BSBL_VERSION "0.0.0"
#endif

namespace bsbl::cli {

namespace fs = std::filesystem;
namespace ex = bsbl::experiments;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

std::string join_args(const std::vector<std::string>& args) {
  std::string s;
  for (const auto& a : args) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

json make_manifest(const std::vector<std::string>& args, const CLI::App& app, std::uint64_t seed,
                   const std::string& started) {
  return {{"command_line", join_args(args)},
          {"master_seed", seed},
          {"config", app.config_to_str(true, false)},
          {"version", BSBL_VERSION},
          {"started_at", started},
          {"finished_at", utc_now()}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

// --- synth -----------------------------------------------------------------

struct SynthOptions {
  std::string out;
  Index m = 100;
  Index n = 300;
  Index block_size = 4;
  Index k_active = 20;
  double corr = 0.0;
  std::optional<double> corr_hi;
  bool normalize = false;
  std::optional<double> snr_db;
  std::uint64_t seed = 1;
  Index groups = 0;
  Index nonzeros = 0;
};

int cmd_synth(const SynthOptions& o, const std::vector<std::string>& args, const CLI::App& app,
              const std::string& started, std::ostream& out) {
  const ex::IntraCorrelation corr =
      o.corr_hi ? ex::IntraCorrelation::uniform(o.corr, *o.corr_hi) : ex::IntraCorrelation::fixed(o.corr);
  ex::Synthetic data;
  json generation;
  if (o.groups > 0) {
    ex::RandomBlockSpec spec{o.m, o.n, o.nonzeros, o.groups, corr, o.snr_db, o.seed};
    data = ex::synthesize_random_blocks(spec);
    generation = {{"kind", "random-blocks"}, {"nonzeros", o.nonzeros}, {"groups", o.groups}};
  } else {
    ex::GenSpec spec;
    spec.M = o.m;
    spec.N = o.n;
    spec.partition = BlockPartition::uniform(o.n, o.block_size);
    spec.k_active = o.k_active;
    spec.intra_corr = corr;
    spec.normalize_blocks = o.normalize;
    spec.snr_db = o.snr_db;
    spec.seed = o.seed;
    data = ex::synthesize(spec);
    generation = {{"kind", "uniform-blocks"},
                  {"block_size", o.block_size},
                  {"k_active", o.k_active},
                  {"normalize_blocks", o.normalize}};
  }
  generation["M"] = o.m;
  generation["N"] = o.n;
  generation["corr_lo"] = corr.lo;
  generation["corr_hi"] = corr.hi;
  generation["snr_db"] = o.snr_db ? json(*o.snr_db) : json(nullptr);
  generation["seed"] = o.seed;
  generation["lambda_true"] = data.lambda_true;

  io::ProblemBundle bundle;
  bundle.problem = data.problem;
  bundle.partition = data.partition;
  bundle.x_gen = data.x_gen;
  bundle.support = data.support;
  bundle.noisy = data.noisy;
  bundle.generation = generation;
  bundle.manifest = make_manifest(args, app, o.seed, started);
  io::write_bundle(o.out, bundle);
  out << "wrote problem bundle to " << o.out << '\n';
  return kExitOk;
}

// --- recover ---------------------------------------------------------------

struct RecoverOptions {
  std::string problem;
  std::string out;
  std::string algo = "bsbl-em";
  Index h = kDefaultWindow;
  std::string learn_corr = "on";
  std::string noise = "noiseless";
  int max_iters = 0;
  Index partition_size = 0;
  std::optional<double> reg_fraction;
};

struct NoiseMode {
  enum Kind { Noiseless, Learn, Fixed } kind = Noiseless;
  double value = 0.0;
};

NoiseMode parse_noise(const std::string& s) {
  if (s == "noiseless") return {NoiseMode::Noiseless};
  if (s == "learn") return {NoiseMode::Learn};
  if (s.rfind("fixed:", 0) == 0) {
    const std::string v = s.substr(6);
    char* end = nullptr;
    const double value = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !(value > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "--noise fixed:<val> needs a positive number");
    }
    return {NoiseMode::Fixed, value};
  }
  throw Error(ErrorCode::InvalidArgument, "--noise must be noiseless, learn or fixed:<val>");
}

template <class Config>
Config sbl_config(const NoiseMode& noise, const Vector& y, bool learn_corr, int max_iters) {
  Config c = noise.kind == NoiseMode::Learn ? noisy_config<Config>(y) : noiseless_config<Config>();
  if (noise.kind == NoiseMode::Fixed) c.lambda_init = noise.value;
  c.learn_correlation = learn_corr;
  if (max_iters > 0) c.max_iters = max_iters;
  return c;
}

L1Config l1_config(const NoiseMode& noise, const Vector& y, bool learn_corr, int max_iters,
                   std::optional<double> reg_fraction) {
  L1Config c = noise.kind == NoiseMode::Noiseless ? L1Config::noiseless() : L1Config::noisy(y);
  if (noise.kind == NoiseMode::Fixed) c.lambda = noise.value;
  c.learn_correlation = learn_corr;
  if (max_iters > 0) c.outer_iters = max_iters;
  if (reg_fraction) c.reg_value = *reg_fraction;
  return c;
}

int cmd_recover(const RecoverOptions& o, const std::vector<std::string>& args, const CLI::App& app,
                const std::string& started, std::ostream& out) {
  const auto algo = ex::parse_algorithm(o.algo);
  if (!algo) throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + o.algo + "'");
  if (o.learn_corr != "on" && o.learn_corr != "off") {
    throw Error(ErrorCode::InvalidArgument, "--learn-corr must be on or off");
  }
  const bool learn_corr = o.learn_corr == "on";
  const NoiseMode noise = parse_noise(o.noise);
  if (o.h < 1) throw Error(ErrorCode::InvalidBlockSize, "--h must be at least 1");

  const io::ProblemBundle bundle = io::read_bundle(o.problem);
  const Problem& problem = bundle.problem;
  const BlockPartition partition = o.partition_size > 0
                                       ? BlockPartition::uniform(problem.cols(), o.partition_size)
                                       : bundle.partition;

  RecoveryResult r;
  switch (*algo) {
    case ex::AlgorithmId::BsblEm:
      r = solve_em(problem, partition, sbl_config<EmConfig>(noise, problem.y, learn_corr, o.max_iters));
      break;
    case ex::AlgorithmId::BsblBo:
      r = solve_bo(problem, partition, sbl_config<BoConfig>(noise, problem.y, learn_corr, o.max_iters));
      break;
    case ex::AlgorithmId::BsblL1:
      r = solve_l1(problem, partition,
                   l1_config(noise, problem.y, learn_corr, o.max_iters, o.reg_fraction));
      break;
    case ex::AlgorithmId::EbsblEm:
      r = solve_ebsbl(problem, o.h, Algorithm::EM,
                      sbl_config<EmConfig>(noise, problem.y, learn_corr, o.max_iters));
      break;
    case ex::AlgorithmId::EbsblBo:
      r = solve_ebsbl(problem, o.h, Algorithm::BO,
                      sbl_config<BoConfig>(noise, problem.y, learn_corr, o.max_iters));
      break;
    case ex::AlgorithmId::EbsblL1:
      r = solve_ebsbl(problem, o.h, Algorithm::L1,
                      l1_config(noise, problem.y, learn_corr, o.max_iters, o.reg_fraction));
      break;
    case ex::AlgorithmId::GroupLasso: {
      GroupLassoProblem p{problem.y, problem.phi, partition, 1.0};
      const double fraction =
          o.reg_fraction.value_or(noise.kind == NoiseMode::Noiseless ? 1e-6 : 0.01);
      p.reg = fraction * 2.0 * group_lasso_reg_max(p.H, p.y, p.partition);
      GroupLassoResult g = o.max_iters > 0 ? solve_group_lasso(p, 1e-10, o.max_iters)
                                           : solve_group_lasso(p);
      r.x_hat = std::move(g.u);
      r.iterations = g.iterations;
      r.converged = g.converged;
      r.cost_trace = std::move(g.objective_trace);
      break;
    }
    case ex::AlgorithmId::Oracle: {
      std::vector<Index> support = bundle.support;
      if (support.empty() && bundle.x_gen) {
        for (Index i = 0; i < bundle.x_gen->size(); ++i) {
          if ((*bundle.x_gen)(i) != 0.0) support.push_back(i);
        }
      }
      if (support.empty()) {
        throw Error(ErrorCode::InvalidArgument, "oracle needs a support or x_gen in the bundle");
      }
      r.x_hat = ex::oracle_ls(problem, support);
      r.iterations = 1;
      r.converged = true;
      break;
    }
  }

  fs::create_directories(o.out);
  io::write_matrix_csv(fs::path(o.out) / "x_hat.csv", Matrix(r.x_hat));
  json result;
  result["algorithm"] = o.algo;
  result["iterations"] = r.iterations;
  result["converged"] = r.converged;
  result["learned_r"] = r.learned_r;
  result["cost_trace"] = r.cost_trace;
  if (r.hyperparams.gamma.size() > 0) result["lambda"] = r.hyperparams.lambda;
  if (bundle.x_gen) {
    const double e = ex::nmse(r.x_hat, *bundle.x_gen);
    result["nmse"] = e;
    result["success"] = e <= ex::kSuccessNmse;
  }
  result["x_hat"] = "x_hat.csv";
  result["manifest"] = make_manifest(args, app, 0, started);
  write_json(fs::path(o.out) / "result.json", result);

  out << fmt::format("{}: {} iterations, {}", o.algo, r.iterations,
                     r.converged ? "converged" : "iteration limit reached");
  if (bundle.x_gen) out << fmt::format(", nmse {:.6g}", result["nmse"].get<double>());
  out << '\n';
  return r.converged ? kExitOk : kExitMaxIters;
}

// --- bench -----------------------------------------------------------------

struct BenchOptions {
  std::string experiment;
  int trials = 25;
  std::uint64_t seed = 1;
  std::string out;
  bool wall_time = false;
  bool serial = false;
};

int cmd_bench(const BenchOptions& o, const std::vector<std::string>& args, const CLI::App& app,
              const std::string& started, std::ostream& out) {
  if (o.trials < 1) throw Error(ErrorCode::InvalidArgument, "--trials must be positive");
  const ex::Execution exec = o.serial ? ex::Execution::Serial : ex::Execution::Parallel;
  ex::ExperimentResult result;
  if (o.experiment == "phase") {
    ex::PhaseTransitionConfig c;
    c.trials = o.trials;
    c.seed = o.seed;
    result = ex::run_phase_transition(c, exec);
  } else if (o.experiment == "correlation") {
    ex::CorrelationSweepConfig c;
    c.trials = o.trials;
    c.seed = o.seed;
    result = ex::run_correlation_sweep(c, exec);
  } else if (o.experiment == "noise") {
    ex::NoiseSweepConfig c;
    c.trials = o.trials;
    c.seed = o.seed;
    result = ex::run_noise_sweep(c, exec);
  } else if (o.experiment == "unknown-partition") {
    ex::UnknownPartitionConfig c;
    c.trials = o.trials;
    c.seed = o.seed;
    result = ex::run_unknown_partition(c, exec);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown experiment '" + o.experiment + "'");
  }

  const fs::path dir(o.out);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "results.csv", std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot write results.csv");
    os << "# manifest=manifest.json\n";
    io::write_trials_csv(os, result.trials, o.wall_time);
  }
  const json manifest = make_manifest(args, app, o.seed, started);
  write_json(dir / "manifest.json", manifest);

  json summary;
  summary["experiment"] = o.experiment;
  summary["results"] = "results.csv";
  summary["cells"] = json::array();
  for (const auto& s : result.summary) summary["cells"].push_back(io::to_json(s));
  if (!result.transition.empty()) {
    summary["transition"] = json::array();
    for (const auto& p : result.transition) summary["transition"].push_back(io::to_json(p));
  }
  summary["manifest"] = manifest;
  write_json(dir / "summary.json", summary);

  out << fmt::format("{}: {} trial records written to {}\n", o.experiment, result.trials.size(),
                     (dir / "results.csv").string());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  CLI::App app{"Block sparse Bayesian learning toolkit"};
  app.set_config("--config", "", "TOML or INI file; sections name subcommands");
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", BSBL_VERSION);

  SynthOptions so;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic problem bundle");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--m", so.m, "Number of measurements")->capture_default_str();
  synth->add_option("--n", so.n, "Signal length")->capture_default_str();
  synth->add_option("--block-size", so.block_size, "Block size")->capture_default_str();
  synth->add_option("--k-active", so.k_active, "Number of nonzero blocks")->capture_default_str();
  synth->add_option("--corr", so.corr, "AR(1) coefficient, or lower end with --corr-hi")
      ->capture_default_str();
  synth->add_option("--corr-hi", so.corr_hi, "Draw r per block uniformly from [corr, corr-hi)");
  synth->add_flag("--normalize", so.normalize, "Scale every nonzero block to unit norm");
  synth->add_option("--snr-db", so.snr_db, "Measurement SNR in dB; noiseless when absent");
  synth->add_option("--seed", so.seed, "Random seed")->capture_default_str();
  synth->add_option("--groups", so.groups,
                    "Place --nonzeros entries in this many random-size blocks instead");
  synth->add_option("--nonzeros", so.nonzeros, "Nonzero count with --groups");

  RecoverOptions ro;
  CLI::App* recover = app.add_subcommand("recover", "Recover a signal from a problem bundle");
  recover->add_option("--problem", ro.problem, "Problem bundle directory")->required();
  recover->add_option("--out", ro.out, "Output directory")->required();
  recover->add_option("--algo", ro.algo, "Algorithm")
      ->capture_default_str()
      ->check(CLI::IsMember({"bsbl-em", "bsbl-bo", "bsbl-l1", "ebsbl-em", "ebsbl-bo", "ebsbl-l1",
                             "group-lasso", "oracle"}));
  recover->add_option("--h", ro.h, "Window length for ebsbl-*")->capture_default_str();
  recover->add_option("--learn-corr", ro.learn_corr, "Learn intra-block correlation")
      ->capture_default_str()
      ->check(CLI::IsMember({"on", "off"}));
  recover->add_option("--noise", ro.noise, "noiseless, learn or fixed:<lambda>")
      ->capture_default_str();
  recover->add_option("--max-iters", ro.max_iters, "Iteration budget; 0 keeps the default")
      ->capture_default_str();
  recover->add_option("--partition-size", ro.partition_size,
                      "Use uniform blocks of this size instead of the bundle partition")
      ->capture_default_str();
  recover->add_option("--reg-fraction", ro.reg_fraction,
                      "Group lasso regularization as a fraction of its maximum");

  BenchOptions bo;
  CLI::App* bench = app.add_subcommand("bench", "Run an experiment sweep");
  bench->add_option("--experiment", bo.experiment, "Experiment")
      ->required()
      ->check(CLI::IsMember({"phase", "correlation", "noise", "unknown-partition"}));
  bench->add_option("--trials", bo.trials, "Trials per cell")->capture_default_str();
  bench->add_option("--seed", bo.seed, "Master seed")->capture_default_str();
  bench->add_option("--out", bo.out, "Output directory")->required();
  bench->add_flag("--wall-time", bo.wall_time, "Record wall-clock times in results.csv");
  bench->add_flag("--serial", bo.serial, "Run trials on one thread");

  std::vector<std::string> reversed(args.size() > 0 ? args.begin() + 1 : args.begin(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*synth) return cmd_synth(so, args, app, started, out);
    if (*recover) return cmd_recover(ro, args, app, started, out);
    if (*bench) return cmd_bench(bo, args, app, started, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace bsbl::cli
