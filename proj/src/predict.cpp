#include "macau/predict.hpp"

#include <cmath>
#include <limits>

namespace macau {

double predict_point(const Model& model, const SamplerState& state,
                     Index relation, std::span<const int> cell) {
  const Relation& rel = model.relation(relation);
  if (static_cast<int>(cell.size()) != rel.degree())
    throw std::invalid_argument("predict_point: cell arity mismatch");
  for (int m = 0; m < rel.degree(); ++m) {
    if (cell[m] < 0 || cell[m] >= model.entity(rel.entity_ids[m]).count)
      throw std::out_of_range("predict_point: cell index out of range");
  }
  return latent_prediction(model, state, relation, cell);
}

double predict_point(const Model& model, const SamplerState& state,
                     Index relation, std::span<const int> cell,
                     const Vector& feature_row) {
  const auto& beta = state.relations[relation].beta;
  if (feature_row.size() != beta.size())
    throw std::invalid_argument("predict_point: feature row length mismatch");
  return predict_point(model, state, relation, cell) + beta.dot(feature_row);
}

PredictionAccumulator::PredictionAccumulator(Index cells)
    : mean_(Vector::Zero(cells)),
      m2_(Vector::Zero(cells)),
      min_(Vector::Constant(cells, std::numeric_limits<double>::infinity())),
      max_(Vector::Constant(cells, -std::numeric_limits<double>::infinity())) {}

void PredictionAccumulator::add(const Vector& values) {
  if (mean_.size() == 0 && n_ == 0) *this = PredictionAccumulator(values.size());
  if (values.size() != mean_.size())
    throw std::invalid_argument("PredictionAccumulator: cell count mismatch");
  ++n_;
  Vector delta = values - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_.array() += delta.array() * (values - mean_).array();
  min_ = min_.cwiseMin(values);
  max_ = max_.cwiseMax(values);
}

void PredictionAccumulator::merge(const PredictionAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size())
    throw std::invalid_argument("PredictionAccumulator::merge: cell count mismatch");
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double nt = na + nb;
  Vector delta = other.mean_ - mean_;
  mean_ += delta * (nb / nt);
  m2_ += other.m2_ + delta.cwiseProduct(delta) * (na * nb / nt);
  min_ = min_.cwiseMin(other.min_);
  max_ = max_.cwiseMax(other.max_);
  n_ += other.n_;
}

Vector PredictionAccumulator::variance() const {
  if (n_ < 2)
    throw std::logic_error("PredictionAccumulator: variance needs >= 2 samples");
  return m2_ / static_cast<double>(n_ - 1);
}

Vector PredictionAccumulator::stddev() const { return variance().cwiseSqrt(); }

void accumulate(PredictionAccumulator& acc, const Model& model,
                const SamplerState& state, const PredictionQuery& query) {
  const Index n = query.count();
  if (query.truth && query.truth->size() != n)
    throw std::invalid_argument("accumulate: truth length mismatch");
  if (acc.cells() != 0 || acc.samples() != 0) {
    if (acc.cells() != n) throw std::invalid_argument("accumulate: query/accumulator mismatch");
  }
  Vector values(n);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i)
    values(i) = latent_prediction(model, state, query.relation, query.cell(i));
  if (query.cell_features) {
    const auto& beta = state.relations[query.relation].beta;
    if (query.cell_features->cols() != beta.size())
      throw std::invalid_argument("accumulate: cell feature width mismatch");
    values.noalias() += *query.cell_features * beta;
  }
  acc.add(values);
}

double rmse(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("rmse: length mismatch");
  if (predicted.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((predicted - truth).squaredNorm() /
                   static_cast<double>(predicted.size()));
}

namespace {

// Rational approximation of the normal quantile (Acklam), polished with one
// Halley step against erfc for near-machine accuracy.
double normal_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) return -normal_quantile_approx(1 - p);
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  double x = normal_quantile_approx(p);
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

std::pair<Vector, Vector> credibility_interval(const PredictionAccumulator& acc,
                                               double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("credibility_interval: level must be in (0, 1)");
  const double z = normal_quantile(0.5 + level / 2.0);
  Vector half = z * acc.stddev();
  return {acc.mean() - half, acc.mean() + half};
}

Vector clamp_predictions(Vector values, double low, double high) {
  if (low > high)
    throw std::invalid_argument("clamp_predictions: low must be <= high");
  return values.cwiseMax(low).cwiseMin(high);
}

}  // namespace macau
