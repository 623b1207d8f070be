#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "hessavg/data.hpp"
#include "hessavg/optimizer.hpp"

namespace hessavg {

using Json = nlohmann::json;

struct DataOptions {
  std::filesystem::path manifest = default_manifest_path();
  std::filesystem::path data_dir = default_data_dir();
  HttpFetcher fetcher;  // empty: libcurl
};

/// A parsed run configuration. `problem` and `init` stay as JSON because the
/// problem is only materialized when the run starts.
struct ExperimentConfig {
  std::string name = "run";
  std::string label;
  std::vector<std::uint64_t> seeds{0};
  Json problem;
  Json init = "zeros";
  RunConfig run;
  /// Theoretical-bound mode without explicit constants: estimate them at run start.
  bool estimate_constants = false;
  /// Canonical dump of the source document, hashed into every artifact.
  std::string canonical;

  std::string display_label() const;
};

/// Schema-checked config; unknown keys are rejected. `origin` names the source in messages.
ExperimentConfig parse_config(const Json& doc, const std::string& origin = "config");
ExperimentConfig load_config(const std::filesystem::path& file);
std::string config_hash(const ExperimentConfig& config);

std::unique_ptr<FiniteSumOracle> build_problem(const Json& problem, const DataOptions& data);
/// "zeros", {"normal": scale} drawn from the run seed's "init" stream, or {"value": [..]}.
Vec build_initial_point(const Json& init, Index dim, std::uint64_t seed);

struct ExperimentResult {
  std::string name;
  std::string label;
  std::uint64_t seed = 0;
  std::string config_hash;
  RunTrace trace;
  std::filesystem::path csv_path;
  std::filesystem::path summary_path;
};

/// Runs one seed; writes <out>/<name>_seed<s>.csv and .json when `out` is non-empty.
ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, const DataOptions& data,
                                const std::filesystem::path& out);

void write_trace_csv(std::ostream& os, const RunTrace& trace, const std::string& hash, std::uint64_t seed);
Json summary_json(const ExperimentResult& result, const ExperimentConfig& config);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& file, const std::string& contents);

/// Columns of a trace CSV by header name; empty cells read as NaN.
struct TraceTable {
  std::string meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const;
};
TraceTable read_trace_csv(const std::filesystem::path& file);

struct RateReport {
  Index k_start = 0;
  Index k_end = 0;
  std::vector<Index> ks;
  std::vector<double> ratios;  // ρ_k = e_{k+1}/e_k
  double slope = 0.0;          // least squares of log ρ_k on log(k+1)
  double intercept = 0.0;
  double mean_ratio = 0.0;     // geometric mean of ρ_k
  Index points = 0;

  Json to_json() const;
};

/// Fits the ratio decay over k ∈ [k_start, k_end] (k_end < 0: to the end of the series),
/// using only pairs with both errors above `floor`. Needs at least `min_points` ratios.
RateReport estimate_rates(const std::vector<double>& errors, Index k_start, Index k_end = -1,
                          double floor = 1e-13, Index min_points = 10);

struct SweepRow {
  std::string label;
  std::string method;
  std::string alpha;
  Index rank = 0;
  std::uint64_t seed = 0;
  double final_f = 0.0;
  double eec = 0.0;
  bool diverged = false;
  std::string error;
};

struct SweepGroup {
  std::string label;
  std::string method;
  std::string alpha;
  Index rank = 0;
  Index runs = 0;
  Index diverged = 0;
  double mean_final_f = 0.0;  // over converged runs
  double mean_eec = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepGroup> groups;

  std::string rows_csv() const;
  std::string table_text() const;
};

/// Runs every (config, seed) pair on up to `parallelism` threads. Per-run failures are
/// recorded in the row, not rethrown. Results are ordered by config, then seed.
SweepResult sweep(const std::vector<ExperimentConfig>& configs, const DataOptions& data,
                  const std::filesystem::path& out, unsigned parallelism = 0);

std::vector<ExperimentConfig> load_config_dir(const std::filesystem::path& dir);

std::string alpha_label(const AlphaSchedule& s);

}  // namespace hessavg
