#include "macau/run.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "macau/predict.hpp"

namespace macau {

namespace {

constexpr std::uint64_t kSplitTag = 101;
constexpr std::uint64_t kChainTag = 102;

ObservationData subset(const ObservationData& obs, const std::vector<Index>& rows) {
  ObservationData out;
  out.degree = obs.degree;
  out.indices.reserve(rows.size() * obs.degree);
  out.values.resize(static_cast<Index>(rows.size()));
  Index at = 0;
  for (Index o : rows) {
    for (int m = 0; m < obs.degree; ++m)
      out.indices.push_back(obs.indices[o * obs.degree + m]);
    out.values(at++) = obs.values(o);
  }
  return out;
}

}  // namespace

std::pair<std::vector<Index>, std::vector<Index>> split_holdout_indices(
    Index n, double fraction, RngStream& rng) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_holdout: fraction must be in (0, 1)");
  if (n < 2) throw std::invalid_argument("split_holdout: need at least 2 observations");
  const Index n_test = static_cast<Index>(
      std::lround(fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n)
    throw std::invalid_argument("split_holdout: degenerate split sizes");

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<Index> test(order.begin(), order.begin() + n_test);
  std::vector<Index> train(order.begin() + n_test, order.end());
  return {std::move(train), std::move(test)};
}

std::pair<ObservationData, ObservationData> split_holdout(
    const ObservationData& observations, double fraction, RngStream& rng) {
  auto [train, test] = split_holdout_indices(observations.count(), fraction, rng);
  return {subset(observations, train), subset(observations, test)};
}

FeatureMatrix take_rows(const FeatureMatrix& X, const std::vector<Index>& rows) {
  if (!X.is_sparse()) {
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (Index i = 0; i < out.rows(); ++i) out.row(i) = X.dense().row(rows[i]);
    return FeatureMatrix(std::move(out));
  }
  std::vector<Index> position(X.rows(), -1);
  for (Index i = 0; i < static_cast<Index>(rows.size()); ++i) position[rows[i]] = i;
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index col = 0; col < X.sparse().outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(X.sparse(), col); it; ++it) {
      if (position[it.row()] >= 0)
        triplets.emplace_back(position[it.row()], it.col(), it.value());
    }
  }
  SparseMatrix out(static_cast<Index>(rows.size()), X.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return FeatureMatrix(std::move(out));
}

namespace {

struct LoadedEntity {
  std::optional<FeatureMatrix> features;
};

struct LoadedRelation {
  ObservationData observations;
  std::optional<FeatureMatrix> features;
  std::optional<ObservationData> fixed_test;
  std::optional<FeatureMatrix> fixed_test_features;
};

void write_predictions_csv(const std::string& path, const PredictionQuery& query,
                           const Vector& mean, const Vector& stddev) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int m = 0; m < query.degree; ++m) out << "index_" << m + 1 << ',';
  out << "mean,std";
  if (query.truth) out << ",truth,error";
  out << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Index i = 0; i < query.count(); ++i) {
    auto cell = query.cell(i);
    for (int m = 0; m < query.degree; ++m) out << cell[m] + 1 << ',';
    put(mean(i));
    out << ',';
    put(stddev(i));
    if (query.truth) {
      out << ',';
      put((*query.truth)(i));
      out << ',';
      put(mean(i) - (*query.truth)(i));
    }
    out << '\n';
  }
}

RepetitionResult run_repetition(const RunConfig& config,
                                const std::vector<LoadedEntity>& loaded_entities,
                                const std::vector<LoadedRelation>& loaded_relations,
                                int rep) {
  const RngStream base(config.seed);
  const RngStream split_base =
      base.fork(kSplitTag).fork(config.vary == VaryMode::Split ? rep : 0);
  const RngStream chain_rng = base.fork(kChainTag).fork(rep);

  Model model(HyperParams::defaults(config.latent_dim));
  for (std::size_t e = 0; e < config.entities.size(); ++e) {
    const auto& spec = config.entities[e];
    model.add_entity(spec.name, spec.count, loaded_entities[e].features, spec.solver);
  }

  std::vector<PredictionQuery> queries;
  std::vector<double> offsets;  // per relation, from the center option
  for (std::size_t r = 0; r < config.relations.size(); ++r) {
    const auto& spec = config.relations[r];
    const auto& data = loaded_relations[r];
    const int degree = data.observations.degree;

    ObservationData train;
    PredictionQuery query;
    query.degree = degree;
    std::optional<FeatureMatrix> train_features;
    if (spec.test_fraction > 0.0) {
      RngStream srng = split_base.fork(r);
      auto [train_idx, test_idx] =
          split_holdout_indices(data.observations.count(), spec.test_fraction, srng);
      train = subset(data.observations, train_idx);
      ObservationData test = subset(data.observations, test_idx);
      query.cells = test.indices;
      query.truth = test.values;
      if (data.features) {
        query.cell_features = take_rows(*data.features, test_idx).to_dense();
        train_features = take_rows(*data.features, train_idx);
      }
    } else {
      train = data.observations;
      train_features = data.features;
      if (data.fixed_test) {
        query.cells = data.fixed_test->indices;
        query.truth = data.fixed_test->values;
        if (data.fixed_test_features)
          query.cell_features = data.fixed_test_features->to_dense();
      }
    }

    // Centering shifts the training values; predictions add the offset back.
    double offset = 0.0;
    if (config.center && train.count() > 0) {
      offset = train.values.mean();
      train.values.array() -= offset;
    }
    query.relation = model.add_relation(spec.name, spec.entities, train.indices,
                                        train.values, spec.alpha,
                                        std::move(train_features));
    offsets.push_back(offset);
    queries.push_back(std::move(query));
  }

  ValidationReport report = validate(model);
  if (!report.ok) throw ValidationError(report.to_string());

  std::vector<PredictionAccumulator> accs(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q)
    accs[q] = PredictionAccumulator(queries[q].count());

  SamplerConfig sampler_config;
  sampler_config.total = config.total;
  sampler_config.burnin = config.burnin;
  if (config.log) {
    const int every = std::max(1, config.total / 20);
    sampler_config.log_every = every;
    sampler_config.log = [&config, rep](const std::string& line) {
      config.log("rep " + std::to_string(rep + 1) + ": " + line);
    };
  }
  PosteriorSummary summary = run_sampler(
      model, sampler_config,
      [&](const SamplerState& state, int) {
        for (std::size_t q = 0; q < queries.size(); ++q)
          if (queries[q].count() > 0) accumulate(accs[q], model, state, queries[q]);
      },
      chain_rng);

  RepetitionResult result;
  result.repetition = rep;
  result.sampler_seed = chain_rng.stream();
  result.samples = summary.samples;
  result.seconds_per_sweep = summary.seconds_per_sweep;
  result.solves = summary.solves;
  result.train_rmse_final =
      summary.train_rmse.empty() ? 0.0 : summary.train_rmse.back();

  double pooled_sq = 0.0;
  Index pooled_n = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& query = queries[q];
    if (query.count() == 0) continue;
    Vector mean = accs[q].mean().array() + offsets[q];
    if (config.clamp)
      mean = clamp_predictions(std::move(mean), config.clamp->first, config.clamp->second);
    Vector stddev = accs[q].samples() >= 2 ? accs[q].stddev()
                                           : Vector::Zero(query.count());
    RelationResult rr;
    rr.name = config.relations[q].name;
    rr.test_cells = query.count();
    rr.rmse = rmse(mean, *query.truth);
    rr.predictions_path =
        (std::filesystem::path(config.output_dir) /
         (config.output_prefix + "_rep" + std::to_string(rep + 1) + "_" +
          rr.name + "_predictions.csv"))
            .string();
    write_predictions_csv(rr.predictions_path, query, mean, stddev);
    pooled_sq += (mean - *query.truth).squaredNorm();
    pooled_n += query.count();
    result.relations.push_back(std::move(rr));
  }
  result.rmse = pooled_n > 0 ? std::sqrt(pooled_sq / static_cast<double>(pooled_n)) : 0.0;
  return result;
}

}  // namespace

ValidationReport validate_config(const RunConfig& config) {
  Model model(HyperParams::defaults(config.latent_dim));
  for (const auto& spec : config.entities) {
    std::optional<FeatureMatrix> features;
    if (!spec.feature_path.empty())
      features = load_features(spec.feature_path, spec.feature_format);
    model.add_entity(spec.name, spec.count, std::move(features), spec.solver);
  }
  for (const auto& spec : config.relations) {
    ObservationData obs = load_observations(spec.observation_path,
                                            static_cast<int>(spec.entities.size()));
    std::optional<FeatureMatrix> features;
    if (!spec.feature_path.empty())
      features = load_features(spec.feature_path, spec.feature_format);
    model.add_relation(spec.name, spec.entities, obs.indices, obs.values,
                       spec.alpha, std::move(features));
  }
  return validate(model);
}

RunReport run(const RunConfig& config) {
  std::vector<LoadedEntity> loaded_entities;
  for (const auto& spec : config.entities) {
    LoadedEntity le;
    if (!spec.feature_path.empty())
      le.features = load_features(spec.feature_path, spec.feature_format);
    loaded_entities.push_back(std::move(le));
  }
  std::vector<LoadedRelation> loaded_relations;
  for (const auto& spec : config.relations) {
    LoadedRelation lr;
    const int degree = static_cast<int>(spec.entities.size());
    lr.observations = load_observations(spec.observation_path, degree);
    if (!spec.feature_path.empty())
      lr.features = load_features(spec.feature_path, spec.feature_format);
    if (!spec.test_path.empty())
      lr.fixed_test = load_observations(spec.test_path, degree);
    if (!spec.test_feature_path.empty())
      lr.fixed_test_features =
          load_features(spec.test_feature_path, spec.test_feature_format);
    loaded_relations.push_back(std::move(lr));
  }

  std::filesystem::create_directories(config.output_dir);

  RunReport report;
  report.repetitions.resize(config.repetitions);
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  if (config.parallel_repetitions && config.repetitions > 1) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int rep = 0; rep < config.repetitions; ++rep) {
      if (failed.load(std::memory_order_relaxed)) continue;
      try {
        report.repetitions[rep] =
            run_repetition(config, loaded_entities, loaded_relations, rep);
      } catch (...) {
#pragma omp critical
        if (!failed.exchange(true)) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (int rep = 0; rep < config.repetitions; ++rep)
      report.repetitions[rep] =
          run_repetition(config, loaded_entities, loaded_relations, rep);
  }

  const int n = config.repetitions;
  double mean = 0.0;
  for (const auto& r : report.repetitions) mean += r.rmse;
  mean /= n;
  double var = 0.0;
  for (const auto& r : report.repetitions) var += (r.rmse - mean) * (r.rmse - mean);
  report.rmse_mean = mean;
  report.rmse_std = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;

  nlohmann::ordered_json j;
  j["latent_dim"] = config.latent_dim;
  j["total"] = config.total;
  j["burnin"] = config.burnin;
  j["seed"] = config.seed;
  j["repetitions"] = nlohmann::ordered_json::array();
  for (const auto& r : report.repetitions) {
    nlohmann::ordered_json jr;
    jr["repetition"] = r.repetition + 1;
    jr["rmse"] = r.rmse;
    jr["samples"] = r.samples;
    jr["train_rmse_final"] = r.train_rmse_final;
    jr["seconds_per_sweep"] = r.seconds_per_sweep;
    jr["jitter_events"] = r.solves.jitter_events;
    jr["cg_solves"] = r.solves.cg_solves;
    jr["cg_iterations"] = r.solves.cg_iterations;
    jr["cg_nonconverged"] = r.solves.cg_nonconverged;
    jr["relations"] = nlohmann::ordered_json::array();
    for (const auto& rel : r.relations) {
      jr["relations"].push_back({{"name", rel.name},
                                 {"test_cells", rel.test_cells},
                                 {"rmse", rel.rmse},
                                 {"predictions", rel.predictions_path}});
    }
    j["repetitions"].push_back(std::move(jr));
  }
  j["rmse_mean"] = report.rmse_mean;
  j["rmse_std"] = report.rmse_std;

  report.report_path = (std::filesystem::path(config.output_dir) /
                        (config.output_prefix + "_report.json"))
                           .string();
  std::ofstream out(report.report_path);
  if (!out) throw std::runtime_error("cannot write " + report.report_path);
  out << j.dump(2) << '\n';
  return report;
}

}  // namespace macau
