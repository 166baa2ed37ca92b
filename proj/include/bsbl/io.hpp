#pragma once

#include "bsbl/experiments.hpp"
#include "bsbl/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bsbl::io {

/// Shortest round-trip text for a double (17 significant digits).
std::string format_double(double v);

/// Text matrix: a header line "rows=<m>,cols=<n>" followed by m comma
/// separated rows. Vectors are written as n x 1 matrices.
void write_matrix_csv(std::ostream& os, const Matrix& m);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(std::istream& is);
Matrix read_matrix_csv(const std::filesystem::path& path);
Vector read_vector_csv(const std::filesystem::path& path);

inline constexpr const char* kBundleFormat = "bsbl-problem/1";
inline constexpr const char* kBundleDescriptor = "problem.json";

/// A problem on disk: a directory holding problem.json plus the CSV files it
/// names (phi, y, optionally x_gen).
struct ProblemBundle {
  Problem problem;
  BlockPartition partition;
  std::optional<Vector> x_gen;
  std::vector<Index> support;
  bool noisy = false;
  nlohmann::json generation = nlohmann::json::object();
  nlohmann::json manifest = nlohmann::json::object();
};

void write_bundle(const std::filesystem::path& dir, const ProblemBundle& bundle);
ProblemBundle read_bundle(const std::filesystem::path& dir);

/// Trial table. wall_time_ms is written as "NA" unless include_wall_time is
/// set, which keeps the file byte-identical across reruns.
void write_trials_csv(std::ostream& os, const std::vector<experiments::TrialRecord>& trials,
                      bool include_wall_time);
void write_summary_csv(std::ostream& os, const std::vector<experiments::CellSummary>& summary);

nlohmann::json to_json(const experiments::CellSummary& s);
nlohmann::json to_json(const experiments::TransitionPoint& p);

}  // namespace bsbl::io
