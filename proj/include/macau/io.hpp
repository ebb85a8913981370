#pragma once

#include <string>
#include <vector>

#include "macau/linop.hpp"
#include "macau/types.hpp"

namespace macau {

/// Sparse cells of a k-ary relation; indices are 0-based internally and
/// 1-based in files.
struct ObservationData {
  int degree = 0;
  std::vector<int> indices;  // count * degree
  Vector values;

  Index count() const { return values.size(); }
};

enum class FeatureFormat { DenseCsv, SparseTriplet };

/// Reads "j_1 ... j_k value" lines, whitespace separated, skipping blank and
/// "%"-prefixed lines. Throws ParseError with the offending line number.
ObservationData load_observations(const std::string& path, int degree);

/// Writes observations in the same format, indices 1-based.
void save_observations(const std::string& path, const ObservationData& data);

/// Dense CSV (one instance per row) or sparse triplets with a leading
/// "%%shape N F" header followed by 1-based "row col value" lines.
FeatureMatrix load_features(const std::string& path, FeatureFormat format);

FeatureFormat parse_feature_format(const std::string& name);  // throws ConfigError

/// Degree of an observation file: columns of the first data line minus one.
int infer_degree(const std::string& path);

}  // namespace macau
