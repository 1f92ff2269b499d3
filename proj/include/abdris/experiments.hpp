#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "abdris/channels.hpp"
#include "abdris/model.hpp"
#include "abdris/optimizer.hpp"

namespace abdris {

enum class Axis { total_power_dbm, n_cells, group_size };

std::string to_string(Axis a);
Axis parse_axis(const std::string& s);

/// One row of a comparison: "active-cwfc-nr", "active-cwfc-r", "active-cwgc-nr",
/// "active-cwgc-r", "active-star" or "no-ris".
struct Scheme {
  std::string id;
  bool ris = true;
  Reciprocity reciprocity = Reciprocity::non_reciprocal;
  Architecture architecture = Architecture::cw_fully;
};

Scheme parse_scheme(const std::string& id);
const std::vector<std::string>& scheme_ids();

struct SweepSpec {
  Axis axis = Axis::total_power_dbm;
  std::vector<double> values;
  std::vector<std::string> schemes;
  int realizations = 100;
  std::uint64_t seed = 1;
  SystemConfig base;
  Geometry geometry;
  FadingSpec fading;
  BcdOptions solver;
  double nonconvergence_threshold = 0.25;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  /// Concrete configuration for one (scheme, axis value) cell.
  SystemConfig resolve(const Scheme& scheme, double value) const;
};

SweepSpec parse_spec(const nlohmann::json& j);
SweepSpec load_spec(const std::string& path);
nlohmann::json spec_to_json(const SweepSpec& spec);

struct ResultRow {
  std::string scheme;
  std::string axis;
  double value = 0.0;
  int realization = 0;
  std::uint64_t seed = 0;
  double sum_rate = 0.0;
  int iterations = 0;
  bool converged = false;
  double wall_ms = 0.0;
};

struct RowFailure {
  std::string scheme;
  double value = 0.0;
  int realization = 0;
  std::string kind;  // "infeasible", "config", "numerical"
  std::string message;
};

struct SummaryCell {
  std::string scheme;
  double value = 0.0;
  int n = 0;
  double mean = 0.0;
  double std = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SweepResult {
  std::vector<ResultRow> rows;
  std::vector<RowFailure> failures;
  std::vector<SummaryCell> summary;
};

struct RunOptions {
  int jobs = 1;
  bool record_timing = false;
};

/// Seed of the channel stream: shared by every scheme and power level so
/// comparisons are paired.
std::uint64_t channel_seed(std::uint64_t master, int n_cells);
/// Seed of the solver's random starts.
std::uint64_t solver_seed(std::uint64_t master, const std::string& scheme, double value,
                          int realization);

SweepResult run_sweep(const SweepSpec& spec, const RunOptions& run = {});

/// Mean, sample standard deviation and Student-t 95% interval per (scheme, value).
std::vector<SummaryCell> summarize(const std::vector<ResultRow>& rows);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
nlohmann::json rows_to_json(const std::vector<ResultRow>& rows);
std::vector<ResultRow> rows_from_json(const nlohmann::json& j);

/// Writes results.csv, results.json, summary.csv and plot/<scheme>.dat into `dir`.
void emit_outputs(const SweepSpec& spec, const SweepResult& result, const std::string& dir);

}  // namespace abdris
