#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "choquard/asymptotics.hpp"
#include "choquard/grid.hpp"
#include "choquard/groundstate.hpp"
#include "choquard/params.hpp"
#include "choquard/thomas_fermi.hpp"

namespace choquard {

using Json = nlohmann::ordered_json;

// Unreadable or unwritable files, malformed CSV or JSON.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string tool_version();

// %.17g; round-trips every double.
std::string format_double(double x);

std::uint64_t fnv1a(std::string_view bytes);
// 16 lowercase hex digits.
std::string hash_hex(std::uint64_t h);

// Embedded in every JSON document written by a command.
struct RunStamp {
  std::string command;
  std::string config_hash;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws IoError for a missing column or a non-numeric cell.
  std::vector<double> column(const std::string& name) const;
};

// Columns of equal length; numbers written with format_double.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// Two-space indent, trailing newline. Parent directories are created.
void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

Json to_json(const ProblemParams& p);
ProblemParams params_from_json(const Json& j);
Json to_json(const GridSpec& g);
GridSpec grid_spec_from_json(const Json& j);
Json to_json(const SolverOptions& s);
Json to_json(const GroundstateResult& r);
Json to_json(const TFProfile& p);
Json to_json(const SweepReport& r);

// field.csv (r, u), summary.json, residual_history.csv (iteration, phase, energy, residual, step).
void write_solve_bundle(const std::filesystem::path& dir, const GroundstateResult& result, const SolverOptions& solver,
                        const RunStamp& stamp);
// Non-converged solve: residual_history.csv from the trace and a summary marking the failure.
void write_solve_failure(const std::filesystem::path& dir, const ProblemParams& params, const GridSpec& grid,
                         const std::string& reason, const std::vector<double>& history, const RunStamp& stamp);
// density.csv (r, rho), v0.csv (r, v0) on the scaled grid, tf.json.
void write_tf_bundle(const std::filesystem::path& dir, const TFProfile& profile, const Field& v0, double q,
                     const Json& checks, const RunStamp& stamp);
// sweep.json and sweep_<norm>.csv (eps, error) per norm, plus sweep.csv with every column.
void write_sweep_bundle(const std::filesystem::path& dir, const SweepReport& report, const RunStamp& stamp);

// Samples column `value` of a CSV whose `r` column reproduces the grid nodes.
Field read_field_csv(const std::filesystem::path& path, const GridPtr<double>& grid, const std::string& value,
                     bool nonnegative = false);

}  // namespace choquard
