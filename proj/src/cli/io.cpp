#include "bsbl/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace bsbl::io {

namespace fs = std::filesystem;

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_matrix_csv(std::ostream& os, const Matrix& m) {
  os << "rows=" << m.rows() << ",cols=" << m.cols() << '\n';
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    os << line;
  }
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_matrix_csv(os, m);
}

namespace {

double parse_double(std::string_view field, Index row) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  // strtod handles inf/nan spellings that from_chars in libstdc++ 11 may not.
  std::string tmp(field);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
    throw Error(ErrorCode::Io, "bad number '" + tmp + "' in row " + std::to_string(row));
  }
  return v;
}

}  // namespace

Matrix read_matrix_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(ErrorCode::Io, "missing matrix header");
  long long rows = -1;
  long long cols = -1;
  if (std::sscanf(header.c_str(), "rows=%lld,cols=%lld", &rows, &cols) != 2 || rows < 0 || cols < 0) {
    throw Error(ErrorCode::Io, "malformed matrix header '" + header + "'");
  }
  Matrix m(rows, cols);
  std::string line;
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(is, line)) throw Error(ErrorCode::Io, "matrix ends early");
    std::string_view rest(line);
    for (Index j = 0; j < cols; ++j) {
      const std::size_t comma = rest.find(',');
      const bool last = j + 1 == cols;
      if (last != (comma == std::string_view::npos)) {
        throw Error(ErrorCode::Io, "row " + std::to_string(i) + " has the wrong field count");
      }
      m(i, j) = parse_double(rest.substr(0, comma), i);
      if (!last) rest.remove_prefix(comma + 1);
    }
  }
  return m;
}

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return read_matrix_csv(is);
}

Vector read_vector_csv(const fs::path& path) {
  Matrix m = read_matrix_csv(path);
  if (m.cols() != 1) throw Error(ErrorCode::Io, path.string() + " is not a column vector");
  return m.col(0);
}

void write_bundle(const fs::path& dir, const ProblemBundle& bundle) {
  fs::create_directories(dir);
  write_matrix_csv(dir / "phi.csv", bundle.problem.phi);
  write_matrix_csv(dir / "y.csv", Matrix(bundle.problem.y));
  nlohmann::json desc;
  desc["format"] = kBundleFormat;
  desc["phi"] = "phi.csv";
  desc["y"] = "y.csv";
  if (bundle.x_gen) {
    write_matrix_csv(dir / "x_gen.csv", Matrix(*bundle.x_gen));
    desc["x_gen"] = "x_gen.csv";
  }
  desc["M"] = bundle.problem.rows();
  desc["N"] = bundle.problem.cols();
  desc["partition"] = bundle.partition.sizes();
  desc["support"] = bundle.support;
  desc["noisy"] = bundle.noisy;
  desc["generation"] = bundle.generation;
  desc["manifest"] = bundle.manifest;
  std::ofstream os(dir / kBundleDescriptor, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write descriptor in " + dir.string());
  os << desc.dump(2) << '\n';
}

ProblemBundle read_bundle(const fs::path& dir) {
  std::ifstream is(dir / kBundleDescriptor, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "no " + std::string(kBundleDescriptor) + " in " + dir.string());
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("bad descriptor: ") + e.what());
  }
  if (desc.value("format", "") != kBundleFormat) {
    throw Error(ErrorCode::Io, "unsupported bundle format");
  }
  ProblemBundle b;
  try {
    b.problem.phi = read_matrix_csv(dir / desc.at("phi").get<std::string>());
    b.problem.y = read_vector_csv(dir / desc.at("y").get<std::string>());
    if (desc.contains("x_gen")) b.x_gen = read_vector_csv(dir / desc.at("x_gen").get<std::string>());
    b.partition = BlockPartition(desc.at("partition").get<std::vector<Index>>());
    b.support = desc.value("support", std::vector<Index>{});
    b.noisy = desc.value("noisy", false);
    b.generation = desc.value("generation", nlohmann::json::object());
    b.manifest = desc.value("manifest", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("bad descriptor: ") + e.what());
  }
  b.problem.validate();
  if (b.partition.total() != b.problem.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "partition does not cover the columns of phi");
  }
  if (b.x_gen && b.x_gen->size() != b.problem.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "x_gen length does not match phi");
  }
  return b;
}

void write_trials_csv(std::ostream& os, const std::vector<experiments::TrialRecord>& trials,
                      bool include_wall_time) {
  os << "experiment,cell,algorithm,trial,seed,nmse,success,iterations,converged,wall_time_ms,"
        "learned_r\n";
  for (const auto& t : trials) {
    os << t.experiment << ',' << t.cell << ',' << t.algorithm << ',' << t.trial << ',' << t.seed
       << ',' << format_double(t.nmse) << ',' << (t.success ? 1 : 0) << ',' << t.iterations << ','
       << (t.converged ? 1 : 0) << ','
       << (include_wall_time ? fmt::format("{:.3f}", t.wall_time_ms) : std::string("NA")) << ','
       << format_double(t.learned_r) << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<experiments::CellSummary>& summary) {
  os << "experiment,cell,algorithm,trials,success_rate,mean_nmse,median_nmse,median_iterations\n";
  for (const auto& s : summary) {
    os << s.experiment << ',' << s.cell << ',' << s.algorithm << ',' << s.trials << ','
       << format_double(s.success_rate) << ',' << format_double(s.mean_nmse) << ','
       << format_double(s.median_nmse) << ',' << format_double(s.median_iterations) << '\n';
  }
}

nlohmann::json to_json(const experiments::CellSummary& s) {
  return {{"experiment", s.experiment},     {"cell", s.cell},
          {"algorithm", s.algorithm},       {"trials", s.trials},
          {"success_rate", s.success_rate}, {"mean_nmse", s.mean_nmse},
          {"median_nmse", s.median_nmse},   {"median_iterations", s.median_iterations}};
}

nlohmann::json to_json(const experiments::TransitionPoint& p) {
  return {{"series", p.series}, {"delta", p.delta}, {"rho", p.rho}};
}

}  // namespace bsbl::io
