#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "macau/io.hpp"
#include "macau/linop.hpp"

namespace macau {

struct EntitySpec {
  std::string name;
  Index count = 0;
  std::string feature_path;  // empty when the entity has no side information
  FeatureFormat feature_format = FeatureFormat::DenseCsv;
  SolverKind solver = SolverKind::Auto;
};

struct RelationSpec {
  std::string name;
  std::vector<std::string> entities;
  std::string observation_path;
  double alpha = 0.0;           // mandatory, must be > 0
  std::string test_path;        // fixed test set, or
  double test_fraction = 0.0;   // random holdout in (0, 1); 0 means none
  std::string feature_path;     // per-cell relation features, row-aligned
  FeatureFormat feature_format = FeatureFormat::DenseCsv;
  std::string test_feature_path;  // feature rows for the fixed test set
  FeatureFormat test_feature_format = FeatureFormat::DenseCsv;
};

enum class VaryMode { Seed, Split };

struct RunConfig {
  std::vector<EntitySpec> entities;
  std::vector<RelationSpec> relations;

  int latent_dim = 30;
  int total = 1000;
  int burnin = 800;
  std::uint64_t seed = 0;

  std::optional<std::pair<double, double>> clamp;
  bool center = false;
  int repetitions = 1;
  VaryMode vary = VaryMode::Seed;
  bool parallel_repetitions = false;

  std::string output_dir = ".";
  std::string output_prefix = "macau";

  // Runtime-only (set by the caller, not read from the file).
  std::function<void(const std::string&)> log;
};

/// Parses an INI-style config: [sampler], [options], [output], and one
/// [entity NAME] / [relation NAME] section per entity/relation. Unknown
/// sections or keys are rejected; violations are reported with their key
/// path. Relative data paths are resolved against the config file location.
RunConfig parse_config(const std::string& path);

}  // namespace macau
