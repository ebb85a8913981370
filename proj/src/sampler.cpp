#include "macau/sampler.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>

#include "macau/chol.hpp"
#include "macau/mvnormal.hpp"

namespace macau {

namespace {

// Phase tags for deterministic stream derivation within one sweep.
enum Phase : std::uint64_t {
  kLatent = 1,
  kEntityBeta = 2,
  kEntityLambda = 3,
  kEntityPrior = 4,
  kRelationBeta = 5,
  kRelationLambda = 6,
};

struct LatentSystem {
  Matrix precision;  // D x D, full symmetric
  Vector rhs;        // precision * mean
};

LatentSystem build_latent_system(const Model& model, const SamplerState& state,
                                 Index e, Index i) {
  const auto& es = state.entities[e];
  const Index dim = es.U.rows();
  LatentSystem sys;
  sys.precision = es.Lambda;
  Vector prior_mean = es.mu;
  if (es.Ubar.size() > 0) prior_mean += es.Ubar.row(i).transpose();
  sys.rhs.noalias() = es.Lambda * prior_mean;

  Vector q(dim);
  for (auto [rid, mode] : model.links(e)) {
    const Relation& rel = model.relation(rid);
    const auto& rs = state.relations[rid];
    for (Index o : rel.mode_index[mode].of(i)) {
      auto cell = rel.cell(o);
      q.setOnes();
      for (int m = 0; m < rel.degree(); ++m) {
        if (m == mode) continue;
        q.array() *= state.entities[rel.entity_ids[m]].U.col(cell[m]).array();
      }
      double resid = rel.values(o);
      if (rs.feature_shift.size() > 0) resid -= rs.feature_shift(o);
      sys.precision.selfadjointView<Eigen::Lower>().rankUpdate(q, rel.alpha);
      sys.rhs.noalias() += (rel.alpha * resid) * q;
    }
  }
  sys.precision.triangularView<Eigen::StrictlyUpper>() =
      sys.precision.transpose();
  return sys;
}

}  // namespace

SamplerState init_state(const Model& model) {
  const int dim = model.hyper().latent_dim;
  SamplerState state;
  state.entities.reserve(model.entities().size());
  for (const auto& ent : model.entities()) {
    EntityState es;
    es.U = Matrix::Zero(dim, ent.count);
    es.mu = Vector::Zero(dim);
    es.Lambda = Matrix::Identity(dim, dim);
    es.lambda_beta = model.hyper().gamma_mu;
    if (ent.has_features()) {
      es.beta = Matrix::Zero(ent.feature_dim, dim);
      es.Ubar = Matrix::Zero(ent.count, dim);
    }
    state.entities.push_back(std::move(es));
  }
  state.relations.reserve(model.relations().size());
  for (const auto& rel : model.relations()) {
    RelationState rs;
    rs.lambda_beta = model.hyper().gamma_mu;
    if (rel.has_features()) {
      rs.beta = Vector::Zero(rel.feature_dim);
      rs.feature_shift = Vector::Zero(rel.nnz());
    }
    state.relations.push_back(std::move(rs));
  }
  return state;
}

double latent_prediction(const Model& model, const SamplerState& state,
                         Index relation, std::span<const int> cell) {
  const Relation& rel = model.relation(relation);
  const Index dim = state.entities[rel.entity_ids[0]].U.rows();
  double sum = 0.0;
  for (Index d = 0; d < dim; ++d) {
    double prod = 1.0;
    for (int m = 0; m < rel.degree(); ++m)
      prod *= state.entities[rel.entity_ids[m]].U(d, cell[m]);
    sum += prod;
  }
  return sum;
}

LatentConditional latent_conditional(const Model& model, const SamplerState& state,
                                     Index e, Index i) {
  LatentSystem sys = build_latent_system(model, state, e, i);
  auto chol = cholesky_psd<double>(sys.precision);
  LatentConditional out;
  out.mean = cholesky_solve(chol.L, sys.rhs);
  out.precision = std::move(sys.precision);
  return out;
}

Vector sample_latent(const Model& model, const SamplerState& state, Index e,
                     Index i, RngStream& rng, SolveStats* stats) {
  LatentSystem sys = build_latent_system(model, state, e, i);
  auto chol = cholesky_psd<double>(sys.precision);
  if (stats && chol.jitter > 0.0) ++stats->jitter_events;
  Vector z(sys.rhs.size());
  for (Index d = 0; d < z.size(); ++d) z(d) = rng.normal();
  Vector mean = cholesky_solve(chol.L, sys.rhs);
  return mean + chol.L.transpose().triangularView<Eigen::Upper>().solve(z);
}

NormalWishartParams entity_prior_conditional(const Model& model,
                                             const SamplerState& state, Index e) {
  const HyperParams& h = model.hyper();
  const Entity& ent = model.entity(e);
  const auto& es = state.entities[e];
  const Index dim = h.latent_dim;
  const double n = static_cast<double>(ent.count);

  NormalWishartParams out;
  if (ent.count == 0) {
    out.mu0 = h.mu0;
    out.beta0 = h.beta0;
    out.W0 = h.W0;
    out.nu0 = h.nu0;
    return out;
  }

  Matrix resid = es.U;  // D x N, residuals u_i - beta' x_i
  if (es.Ubar.size() > 0) resid -= es.Ubar.transpose();
  Vector resid_mean = resid.rowwise().mean();
  Matrix second_moment = Matrix::Zero(dim, dim);
  second_moment.selfadjointView<Eigen::Lower>().rankUpdate(resid, 1.0 / n);
  second_moment.triangularView<Eigen::StrictlyUpper>() = second_moment.transpose();

  out.beta0 = h.beta0 + n;
  out.nu0 = h.nu0 + n + static_cast<double>(ent.feature_dim);
  out.mu0 = (h.beta0 * h.mu0 + n * resid_mean) / out.beta0;

  auto w0_chol = cholesky_psd<double>(h.W0);
  Matrix w0_inv = cholesky_solve(w0_chol.L, Matrix::Identity(dim, dim).eval());
  Matrix wstar_inv = w0_inv + n * second_moment;
  wstar_inv.noalias() += h.beta0 * h.mu0 * h.mu0.transpose();
  wstar_inv.noalias() -= out.beta0 * out.mu0 * out.mu0.transpose();
  if (ent.has_features())
    wstar_inv.noalias() += es.lambda_beta * es.beta.transpose() * es.beta;
  wstar_inv = ((wstar_inv + wstar_inv.transpose()) / 2.0).eval();

  auto wstar_chol = cholesky_psd<double>(wstar_inv);
  Matrix wstar = cholesky_solve(wstar_chol.L, Matrix::Identity(dim, dim).eval());
  out.W0 = ((wstar + wstar.transpose()) / 2.0).eval();
  return out;
}

std::pair<Vector, Matrix> sample_entity_prior(const Model& model,
                                              const SamplerState& state, Index e,
                                              RngStream& rng) {
  NormalWishartParams p = entity_prior_conditional(model, state, e);
  return sample_normal_wishart(p.mu0, p.beta0, p.W0, p.nu0, rng);
}

Matrix weight_draw_with_noise(const FeatureMatrix& X, const Matrix& targets,
                              double c, double reg, const Matrix& noise_data,
                              const Matrix& noise_prior,
                              const WeightSolveOptions& options,
                              const Matrix* gram_cache, SolveStats* stats) {
  const Index nfeat = X.cols();
  const Index ncols = targets.cols();
  if (reg <= 0.0)
    throw std::invalid_argument("weight_draw_with_noise: prior precision must be > 0");
  if (noise_data.rows() != targets.rows() || noise_data.cols() != ncols ||
      noise_prior.rows() != nfeat || noise_prior.cols() != ncols)
    throw std::invalid_argument("weight_draw_with_noise: noise shape mismatch");

  Matrix rhs = c * multiply_transpose(X, targets + noise_data);
  rhs.noalias() += std::sqrt(reg) * noise_prior;

  const SolverKind solver = resolve_solver(options.solver, X);
  if (solver == SolverKind::Direct) {
    Matrix a = gram_cache ? *gram_cache : gram(X);
    a *= c;
    a.diagonal().array() += reg;
    return solve_direct(a, rhs);
  }

  const Index maxiter =
      options.cg_maxiter > 0 ? options.cg_maxiter : std::min<Index>(nfeat, 1000);
  auto apply = ridge_operator(X, c, reg);
  Matrix draw(nfeat, ncols);
  std::atomic<long> iters{0}, failures{0};
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < ncols; ++j) {
    CgResult res = solve_cg(apply, rhs.col(j), options.cg_tol, maxiter);
    draw.col(j) = res.x;
    iters += res.iterations;
    if (!res.converged) ++failures;
  }
  if (stats) {
    stats->cg_solves += ncols;
    stats->cg_iterations += iters.load();
    stats->cg_nonconverged += failures.load();
  }
  return draw;
}

Matrix sample_beta_entity(const Model& model, const SamplerState& state, Index e,
                          SolverKind solver, RngStream& rng,
                          const WeightSolveOptions& options, SolveStats* stats) {
  const Entity& ent = model.entity(e);
  if (!ent.has_features())
    throw std::invalid_argument("sample_beta_entity: entity has no features");
  const auto& es = state.entities[e];

  auto chol = cholesky_psd<double>(es.Lambda);
  Matrix noise_data = sample_rows_gaussian(ent.count, chol.L, rng);
  Matrix noise_prior = sample_rows_gaussian(ent.feature_dim, chol.L, rng);
  Matrix targets = (es.U.colwise() - es.mu).transpose();  // N x D

  WeightSolveOptions opt = options;
  opt.solver = solver;
  const Matrix* gram_cache =
      ent.gram_cache && resolve_solver(solver, ent.features) == SolverKind::Direct
          ? &*ent.gram_cache
          : nullptr;
  return weight_draw_with_noise(ent.features, targets, 1.0, es.lambda_beta,
                                noise_data, noise_prior, opt, gram_cache, stats);
}

Vector sample_beta_relation(const Model& model, const SamplerState& state, Index r,
                            RngStream& rng, const WeightSolveOptions& options,
                            SolveStats* stats) {
  const Relation& rel = model.relation(r);
  if (!rel.has_features())
    throw std::invalid_argument("sample_beta_relation: relation has no features");
  const auto& rs = state.relations[r];

  Matrix targets(rel.nnz(), 1);
  for (Index o = 0; o < rel.nnz(); ++o)
    targets(o, 0) = rel.values(o) - latent_prediction(model, state, r, rel.cell(o));

  // Data-side noise scaled to variance 1/alpha and prior-side noise to
  // variance 1 so the solved draw has covariance (alpha X'X + lambda I)^-1.
  const double inv_sqrt_alpha = 1.0 / std::sqrt(rel.alpha);
  Matrix noise_data(rel.nnz(), 1);
  for (Index o = 0; o < rel.nnz(); ++o) noise_data(o, 0) = inv_sqrt_alpha * rng.normal();
  Matrix noise_prior(rel.feature_dim, 1);
  for (Index f = 0; f < rel.feature_dim; ++f) noise_prior(f, 0) = rng.normal();

  const Matrix* gram_cache = rel.gram_cache ? &*rel.gram_cache : nullptr;
  Matrix draw = weight_draw_with_noise(rel.features, targets, rel.alpha,
                                       rs.lambda_beta, noise_data, noise_prior,
                                       options, gram_cache, stats);
  return draw.col(0);
}

GammaPosterior lambda_beta_entity_posterior(const SamplerState& state, Index e,
                                            const HyperParams& hyper) {
  const auto& es = state.entities[e];
  if (es.beta.size() == 0)
    throw std::invalid_argument("lambda_beta_entity_posterior: entity has no features");
  const double fd = static_cast<double>(es.beta.rows() * es.beta.cols());
  const double trace = es.beta.cwiseProduct(es.beta * es.Lambda).sum();
  GammaPosterior post;
  post.nu = fd + hyper.gamma_nu;
  post.mu = post.nu * hyper.gamma_mu / (hyper.gamma_nu + hyper.gamma_mu * trace);
  return post;
}

double sample_lambda_beta_entity(const SamplerState& state, Index e,
                                 const HyperParams& hyper, RngStream& rng) {
  GammaPosterior post = lambda_beta_entity_posterior(state, e, hyper);
  return sample_gamma(post.mu, post.nu, rng);
}

GammaPosterior lambda_beta_relation_posterior(const SamplerState& state, Index r,
                                              const HyperParams& hyper) {
  const auto& rs = state.relations[r];
  if (rs.beta.size() == 0)
    throw std::invalid_argument("lambda_beta_relation_posterior: relation has no features");
  GammaPosterior post;
  post.nu = static_cast<double>(rs.beta.size()) + hyper.gamma_nu;
  post.mu = post.nu * hyper.gamma_mu /
            (hyper.gamma_nu + hyper.gamma_mu * rs.beta.squaredNorm());
  return post;
}

double sample_lambda_beta_relation(const SamplerState& state, Index r,
                                   const HyperParams& hyper, RngStream& rng) {
  GammaPosterior post = lambda_beta_relation_posterior(state, r, hyper);
  return sample_gamma(post.mu, post.nu, rng);
}

void gibbs_step(const Model& model, SamplerState& state, const RngStream& rng,
                const WeightSolveOptions& options, SolveStats* stats) {
  const RngStream sweep = rng.fork(static_cast<std::uint64_t>(state.iteration));

  for (Index e = 0; e < static_cast<Index>(model.entities().size()); ++e) {
    const Entity& ent = model.entity(e);
    auto& es = state.entities[e];

    const RngStream latent_base = sweep.fork(kLatent).fork(e);
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    long jitter = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : jitter)
    for (Index i = 0; i < ent.count; ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      try {
        SolveStats local;
        RngStream si = latent_base.fork(static_cast<std::uint64_t>(i));
        es.U.col(i) = sample_latent(model, state, e, i, si, &local);
        jitter += local.jitter_events;
      } catch (...) {
#pragma omp critical
        if (!failed.exchange(true)) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    if (stats) stats->jitter_events += jitter;

    if (ent.has_features()) {
      RngStream sb = sweep.fork(kEntityBeta).fork(e);
      es.beta = sample_beta_entity(model, state, e, ent.solver, sb, options, stats);
      es.Ubar = multiply(ent.features, es.beta);
      RngStream sl = sweep.fork(kEntityLambda).fork(e);
      es.lambda_beta = sample_lambda_beta_entity(state, e, model.hyper(), sl);
    }

    RngStream sp = sweep.fork(kEntityPrior).fork(e);
    std::tie(es.mu, es.Lambda) = sample_entity_prior(model, state, e, sp);
  }

  for (Index r = 0; r < static_cast<Index>(model.relations().size()); ++r) {
    if (!model.relation(r).has_features()) continue;
    auto& rs = state.relations[r];
    RngStream sb = sweep.fork(kRelationBeta).fork(r);
    rs.beta = sample_beta_relation(model, state, r, sb, options, stats);
    rs.feature_shift = multiply(model.relation(r).features, Matrix(rs.beta)).col(0);
    RngStream sl = sweep.fork(kRelationLambda).fork(r);
    rs.lambda_beta = sample_lambda_beta_relation(state, r, model.hyper(), sl);
  }

  ++state.iteration;
}

namespace {

double train_rmse_subsample(const Model& model, const SamplerState& state,
                            Index cap) {
  Index total = 0;
  for (const auto& rel : model.relations()) total += rel.nnz();
  if (total == 0) return 0.0;
  const Index stride = std::max<Index>(1, total / std::max<Index>(cap, 1));
  double se = 0.0;
  Index used = 0;
  Index base = 0;
  Index next = 0;  // next global cell id to take
  for (Index r = 0; r < static_cast<Index>(model.relations().size()); ++r) {
    const Relation& rel = model.relation(r);
    const auto& shift = state.relations[r].feature_shift;
    while (next < base + rel.nnz()) {
      const Index o = next - base;
      double pred = latent_prediction(model, state, r, rel.cell(o));
      if (shift.size() > 0) pred += shift(o);
      const double diff = pred - rel.values(o);
      se += diff * diff;
      ++used;
      next += stride;
    }
    base += rel.nnz();
  }
  return used > 0 ? std::sqrt(se / static_cast<double>(used)) : 0.0;
}

}  // namespace

PosteriorSummary run_sampler(const Model& model, const SamplerConfig& config,
                             const SampleSink& sink, const RngStream& rng) {
  if (config.burnin >= config.total || config.total < 1)
    throw std::invalid_argument("run_sampler: need 0 <= burnin < total");
  ValidationReport report = validate(model);
  if (!report.ok)
    throw ValidationError("run_sampler: model failed validation: " + report.to_string());

  PosteriorSummary summary;
  SamplerState state = init_state(model);
  const auto t_start = std::chrono::steady_clock::now();
  for (int t = 0; t < config.total; ++t) {
    gibbs_step(model, state, rng, config.weights, &summary.solves);
    const double rmse = train_rmse_subsample(model, state, config.train_rmse_cap);
    summary.train_rmse.push_back(rmse);
    if (t >= config.burnin) {
      if (sink) sink(state, t);
      ++summary.samples;
    }
    if (config.log &&
        ((t + 1) % std::max(config.log_every, 1) == 0 || t + 1 == config.total)) {
      char line[128];
      std::snprintf(line, sizeof(line), "sweep %d/%d train rmse %.6f%s", t + 1,
                    config.total, rmse, t >= config.burnin ? " [sampling]" : "");
      config.log(line);
    }
  }
  const auto t_end = std::chrono::steady_clock::now();
  summary.seconds_total = std::chrono::duration<double>(t_end - t_start).count();
  summary.seconds_per_sweep = summary.seconds_total / config.total;
  return summary;
}

}  // namespace macau
