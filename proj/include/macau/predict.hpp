#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "macau/sampler.hpp"
#include "macau/types.hpp"

namespace macau {

/// A fixed set of cells of one relation to predict across a chain, with
/// optional ground truth and optional per-cell relation-feature rows.
struct PredictionQuery {
  Index relation = 0;
  int degree = 0;
  std::vector<int> cells;              // count * degree, 0-based
  std::optional<Vector> truth;         // length count
  std::optional<Matrix> cell_features; // count x F_R

  Index count() const {
    return degree > 0 ? static_cast<Index>(cells.size()) / degree : 0;
  }
  std::span<const int> cell(Index i) const {
    return {cells.data() + i * degree, static_cast<std::size_t>(degree)};
  }
};

/// Point prediction of one cell from the current state: sum of the
/// element-wise product of the cell's latent vectors, plus the relation
/// feature term when a feature row is supplied.
double predict_point(const Model& model, const SamplerState& state,
                     Index relation, std::span<const int> cell);
double predict_point(const Model& model, const SamplerState& state,
                     Index relation, std::span<const int> cell,
                     const Vector& feature_row);

/// Streaming per-cell moments of the posterior predictive (Welford), plus
/// per-cell min/max. Memory is O(cells), independent of the chain length.
class PredictionAccumulator {
 public:
  PredictionAccumulator() = default;
  explicit PredictionAccumulator(Index cells);

  Index cells() const { return mean_.size(); }
  long samples() const { return n_; }

  /// Folds in one posterior sample's predictions.
  void add(const Vector& values);

  /// Combines with an accumulator over the same cells (pairwise Welford).
  void merge(const PredictionAccumulator& other);

  const Vector& mean() const { return mean_; }
  Vector variance() const;  // sample variance, requires >= 2 samples
  Vector stddev() const;
  const Vector& min() const { return min_; }
  const Vector& max() const { return max_; }

 private:
  long n_ = 0;
  Vector mean_, m2_, min_, max_;
};

/// Predicts every query cell from the state and folds into the accumulator.
void accumulate(PredictionAccumulator& acc, const Model& model,
                const SamplerState& state, const PredictionQuery& query);

/// Root mean squared error; lengths must match and be nonempty.
double rmse(const Vector& predicted, const Vector& truth);

/// Normal-approximation credibility interval mean +- z(level) * std from the
/// accumulated moments. Exact posterior quantiles would require storing every
/// sample; this approximation keeps memory bounded.
std::pair<Vector, Vector> credibility_interval(const PredictionAccumulator& acc,
                                               double level);

/// Element-wise clamp to [low, high].
Vector clamp_predictions(Vector values, double low, double high);

/// Quantile of the standard normal distribution.
double normal_quantile(double p);

}  // namespace macau
