#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "macau/config.hpp"
#include "macau/io.hpp"
#include "macau/rng.hpp"
#include "macau/sampler.hpp"

namespace macau {

/// Partition indices 0..n-1 into (train, test) with round(fraction * n) test
/// entries, deterministically for a given stream. Both sides must be nonempty.
std::pair<std::vector<Index>, std::vector<Index>> split_holdout_indices(
    Index n, double fraction, RngStream& rng);

/// Observation-level convenience wrapper around split_holdout_indices.
std::pair<ObservationData, ObservationData> split_holdout(
    const ObservationData& observations, double fraction, RngStream& rng);

/// Rows of a feature matrix selected by index, preserving order.
FeatureMatrix take_rows(const FeatureMatrix& X, const std::vector<Index>& rows);

struct RelationResult {
  std::string name;
  Index test_cells = 0;
  double rmse = 0.0;
  std::string predictions_path;
};

struct RepetitionResult {
  int repetition = 0;
  std::uint64_t sampler_seed = 0;
  double rmse = 0.0;  // pooled over all test cells
  std::vector<RelationResult> relations;
  double train_rmse_final = 0.0;
  int samples = 0;
  double seconds_per_sweep = 0.0;
  SolveStats solves;
};

struct RunReport {
  std::vector<RepetitionResult> repetitions;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;  // sample standard deviation across repetitions
  std::string report_path;
};

/// Executes the configured run: per repetition build the model from files,
/// validate, split or load the test set, run the sampler, accumulate
/// posterior-mean predictions on the test cells, and persist a prediction CSV
/// per relation plus a machine-readable report. Throws ConfigError /
/// ParseError on bad inputs, ValidationError when the model is rejected, and
/// NumericError on numeric failure.
RunReport run(const RunConfig& config);

/// Builds the model from the config with all observations (no split) and
/// validates it.
ValidationReport validate_config(const RunConfig& config);

}  // namespace macau
