#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "macau/mvnormal.hpp"
#include "macau/predict.hpp"

using Catch::Approx;
using namespace macau;

namespace {

Model three_way_model() {
  Model model(HyperParams::defaults(2));
  model.add_entity("a", 2);
  model.add_entity("b", 2);
  model.add_entity("c", 2);
  Vector vals(1);
  vals << 1.0;
  model.add_relation("t", {"a", "b", "c"}, {0, 0, 0}, vals, 1.0);
  return model;
}

}  // namespace

TEST_CASE("predict_point/matrix cases") {
  Model model(HyperParams::defaults(1));
  model.add_entity("row", 1);
  model.add_entity("col", 1);
  Vector vals(1);
  vals << 1.0;
  model.add_relation("m", {"row", "col"}, {0, 0}, vals, 1.0);
  SamplerState state = init_state(model);
  state.entities[0].U(0, 0) = 2.0;
  state.entities[1].U(0, 0) = 3.0;
  int cell[] = {0, 0};
  REQUIRE(predict_point(model, state, 0, cell) == Approx(6.0));

  Model model2(HyperParams::defaults(2));
  model2.add_entity("row", 1);
  model2.add_entity("col", 1);
  model2.add_relation("m", {"row", "col"}, {0, 0}, vals, 1.0);
  SamplerState state2 = init_state(model2);
  state2.entities[0].U.col(0) << 1.0, 0.0;
  state2.entities[1].U.col(0) << 0.0, 1.0;
  REQUIRE(predict_point(model2, state2, 0, cell) == 0.0);
}

TEST_CASE("predict_point/three-way element-wise product") {
  Model model = three_way_model();
  SamplerState state = init_state(model);
  state.entities[0].U.col(0) << 1.0, 1.0;
  state.entities[1].U.col(0) << 2.0, 2.0;
  state.entities[2].U.col(0) << 3.0, 0.5;
  int cell[] = {0, 0, 0};
  REQUIRE(predict_point(model, state, 0, cell) == Approx(7.0));
}

TEST_CASE("predict_point/out of range and feature term") {
  Model model = three_way_model();
  SamplerState state = init_state(model);
  int bad[] = {0, 0, 2};
  REQUIRE_THROWS_AS(predict_point(model, state, 0, bad), std::out_of_range);

  state.relations[0].beta = Vector(2);
  state.relations[0].beta << 0.5, -1.0;
  Vector row(2);
  row << 2.0, 1.0;
  int cell[] = {0, 0, 0};
  REQUIRE(predict_point(model, state, 0, cell, row) ==
          Approx(predict_point(model, state, 0, cell) + 0.5 * 2.0 - 1.0));
  Vector short_row(1);
  short_row << 1.0;
  REQUIRE_THROWS_AS(predict_point(model, state, 0, cell, short_row),
                    std::invalid_argument);
}

TEST_CASE("predict_point/multilinear in one entity's latents") {
  RngStream rng(1);
  Model model = three_way_model();
  SamplerState state = init_state(model);
  for (auto& es : state.entities) fill_standard_normal(es.U, rng);
  int cell[] = {1, 0, 1};
  const double base = predict_point(model, state, 0, cell);
  state.entities[1].U.col(0) *= 3.5;
  REQUIRE(predict_point(model, state, 0, cell) == Approx(3.5 * base));
}

TEST_CASE("accumulator/welford by hand") {
  PredictionAccumulator acc(1);
  Vector v(1);
  v << 1.0;
  acc.add(v);
  REQUIRE(acc.samples() == 1);
  REQUIRE(acc.mean()(0) == Approx(1.0));
  REQUIRE_THROWS_AS(acc.variance(), std::logic_error);

  v << 3.0;
  acc.add(v);
  REQUIRE(acc.mean()(0) == Approx(2.0));
  REQUIRE(acc.variance()(0) == Approx(2.0));
  REQUIRE(acc.min()(0) == 1.0);
  REQUIRE(acc.max()(0) == 3.0);
}

TEST_CASE("accumulator/mean equals arithmetic mean of samples") {
  RngStream rng(2);
  const Index cells = 7;
  const int samples = 53;
  PredictionAccumulator acc(cells);
  Vector total = Vector::Zero(cells);
  for (int s = 0; s < samples; ++s) {
    Vector v(cells);
    for (Index i = 0; i < cells; ++i) v(i) = rng.normal();
    acc.add(v);
    total += v;
  }
  REQUIRE((acc.mean() - total / samples).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("accumulator/merge matches a single pass") {
  RngStream rng(3);
  const Index cells = 5;
  PredictionAccumulator whole(cells), left(cells), right(cells);
  for (int s = 0; s < 40; ++s) {
    Vector v(cells);
    for (Index i = 0; i < cells; ++i) v(i) = rng.normal() * 2.0 + 1.0;
    whole.add(v);
    (s < 17 ? left : right).add(v);
  }
  left.merge(right);
  REQUIRE(left.samples() == whole.samples());
  REQUIRE((left.mean() - whole.mean()).lpNorm<Eigen::Infinity>() <= 1e-12);
  REQUIRE((left.variance() - whole.variance()).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("accumulate/uses relation features when provided") {
  Model model(HyperParams::defaults(2));
  model.add_entity("row", 2);
  model.add_entity("col", 2);
  Vector vals(1);
  vals << 1.0;
  Matrix relfeat(1, 2);
  relfeat << 1.0, 1.0;
  model.add_relation("m", {"row", "col"}, {0, 0}, vals, 1.0, FeatureMatrix(relfeat));
  SamplerState state = init_state(model);
  state.entities[0].U.col(0) << 1.0, 2.0;
  state.entities[1].U.col(1) << 3.0, -1.0;
  state.relations[0].beta = Vector(2);
  state.relations[0].beta << 0.25, 0.75;

  PredictionQuery query;
  query.relation = 0;
  query.degree = 2;
  query.cells = {0, 1};
  Matrix qf(1, 2);
  qf << 2.0, 0.0;
  query.cell_features = qf;

  PredictionAccumulator acc(1);
  accumulate(acc, model, state, query);
  REQUIRE(acc.mean()(0) == Approx(1.0 * 3.0 + 2.0 * -1.0 + 0.5));
}

TEST_CASE("rmse/examples") {
  Vector a(2), b(2);
  a << 1.0, 2.0;
  b << 1.0, 2.0;
  REQUIRE(rmse(a, b) == 0.0);

  a << 0.0, 0.0;
  b << 3.0, 4.0;
  REQUIRE(rmse(a, b) == Approx(std::sqrt(12.5)));

  Vector c(1), d(1);
  c << 1.0;
  d << 2.0;
  REQUIRE(rmse(c, d) == Approx(1.0));

  Vector empty;
  REQUIRE_THROWS_AS(rmse(empty, empty), std::invalid_argument);
  REQUIRE_THROWS_AS(rmse(a, c), std::invalid_argument);
}

TEST_CASE("rmse/permutation invariant") {
  RngStream rng(4);
  const Index n = 31;
  Vector pred(n), truth(n);
  for (Index i = 0; i < n; ++i) {
    pred(i) = rng.normal();
    truth(i) = rng.normal();
  }
  const double base = rmse(pred, truth);
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_below(static_cast<std::uint64_t>(i) + 1)]);
  Vector pred2(n), truth2(n);
  for (Index i = 0; i < n; ++i) {
    pred2(i) = pred(perm[i]);
    truth2(i) = truth(perm[i]);
  }
  REQUIRE(rmse(pred2, truth2) == Approx(base).epsilon(1e-12));
}

TEST_CASE("credibility_interval/standard normal quantile") {
  REQUIRE(normal_quantile(0.975) == Approx(1.959963985).margin(1e-6));
  REQUIRE(normal_quantile(0.5) == Approx(0.0).margin(1e-12));
  REQUIRE(normal_quantile(0.025) == Approx(-1.959963985).margin(1e-6));

  PredictionAccumulator acc(1);
  Vector v(1);
  v << -1.0;
  acc.add(v);
  v << 1.0;
  acc.add(v);  // mean 0, sample std sqrt(2)
  auto [lo, hi] = credibility_interval(acc, 0.95);
  const double half = 1.959963985 * std::sqrt(2.0);
  REQUIRE(lo(0) == Approx(-half).margin(0.01 * half));
  REQUIRE(hi(0) == Approx(half).margin(0.01 * half));
}

TEST_CASE("credibility_interval/degenerate and width scaling") {
  PredictionAccumulator acc(1);
  Vector v(1);
  v << 2.5;
  acc.add(v);
  acc.add(v);
  auto [lo, hi] = credibility_interval(acc, 0.95);
  REQUIRE(lo(0) == Approx(2.5));
  REQUIRE(hi(0) == Approx(2.5));

  // width is linear in the accumulated standard deviation
  PredictionAccumulator narrow(1), wide(1);
  Vector a(1), b(1);
  a << -1.0;
  b << 1.0;
  narrow.add(a);
  narrow.add(b);
  a << -3.0;
  b << 3.0;
  wide.add(a);
  wide.add(b);
  auto [nlo, nhi] = credibility_interval(narrow, 0.9);
  auto [wlo, whi] = credibility_interval(wide, 0.9);
  REQUIRE((whi(0) - wlo(0)) == Approx(3.0 * (nhi(0) - nlo(0))));

  PredictionAccumulator single(1);
  single.add(a);
  REQUIRE_THROWS_AS(credibility_interval(single, 0.9), std::logic_error);
  REQUIRE_THROWS_AS(credibility_interval(narrow, 1.5), std::invalid_argument);
}

TEST_CASE("clamp_predictions/examples") {
  Vector v(2);
  v << 0.5, 5.7;
  Vector c = clamp_predictions(v, 1.0, 5.0);
  REQUIRE(c(0) == 1.0);
  REQUIRE(c(1) == 5.0);

  Vector inside(3);
  inside << 1.5, 2.0, 4.9;
  REQUIRE((clamp_predictions(inside, 1.0, 5.0) - inside).norm() == 0.0);

  Vector any(3);
  any << -10.0, 0.0, 10.0;
  Vector all_c = clamp_predictions(any, 3.0, 3.0);
  REQUIRE(all_c.minCoeff() == 3.0);
  REQUIRE(all_c.maxCoeff() == 3.0);

  REQUIRE_THROWS_AS(clamp_predictions(any, 5.0, 1.0), std::invalid_argument);
}
