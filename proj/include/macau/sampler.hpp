#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "macau/model.hpp"
#include "macau/rng.hpp"
#include "macau/types.hpp"

namespace macau {

struct EntityState {
  Matrix U;                  // D x N, one latent vector per instance
  Vector mu;                 // prior mean, D
  Matrix Lambda;             // prior precision, D x D
  Matrix beta;               // feature weights, F x D (0x0 when no features)
  double lambda_beta = 1.0;  // weight precision
  Matrix Ubar;               // cache of X * beta, N x D (0x0 when no features)
};

struct RelationState {
  Vector beta;               // feature weights, F_R (empty when no features)
  double lambda_beta = 1.0;
  Vector feature_shift;      // cache of X_R * beta per observation (empty when no features)
};

struct SamplerState {
  std::vector<EntityState> entities;
  std::vector<RelationState> relations;
  int iteration = 0;
};

/// U = 0, beta = 0, mu = 0, Lambda = I, lambda_beta = hyperprior mean.
SamplerState init_state(const Model& model);

/// Counters for numeric events across a run.
struct SolveStats {
  long jitter_events = 0;
  long cg_solves = 0;
  long cg_iterations = 0;
  long cg_nonconverged = 0;

  void merge(const SolveStats& o) {
    jitter_events += o.jitter_events;
    cg_solves += o.cg_solves;
    cg_iterations += o.cg_iterations;
    cg_nonconverged += o.cg_nonconverged;
  }
};

struct WeightSolveOptions {
  SolverKind solver = SolverKind::Auto;
  double cg_tol = 1e-6;   // relative residual
  Index cg_maxiter = 0;   // 0 means min(F, 1000)
};

/// Model mean of one cell from the latent factors alone: the sum over latent
/// dimensions of the product of the cell's latent coordinates.
double latent_prediction(const Model& model, const SamplerState& state,
                         Index relation, std::span<const int> cell);

struct LatentConditional {
  Matrix precision;  // D x D
  Vector mean;       // D
};

/// Gaussian conditional of one latent vector given all other variables.
/// The precision is the prior precision plus alpha-weighted outer products of
/// the co-factor vectors q_j (element-wise products over the cell's other
/// modes, computed as direct products, never by division); the mean folds in
/// the feature-shifted prior and the feature-corrected residuals.
LatentConditional latent_conditional(const Model& model, const SamplerState& state,
                                     Index e, Index i);

/// Draw one latent vector from its conditional.
Vector sample_latent(const Model& model, const SamplerState& state, Index e,
                     Index i, RngStream& rng, SolveStats* stats = nullptr);

struct NormalWishartParams {
  Vector mu0;
  double beta0 = 0.0;
  Matrix W0;
  double nu0 = 0.0;
};

/// Posterior Normal-Wishart parameters for (mu_e, Lambda_e), computed over the
/// residuals u_i - beta' x_i. The Wishart dof picks up both the instance count
/// and the feature dimension, and the scale picks up lambda_beta * beta' beta,
/// both stemming from the weight prior's coupling to Lambda_e.
NormalWishartParams entity_prior_conditional(const Model& model,
                                             const SamplerState& state, Index e);

std::pair<Vector, Matrix> sample_entity_prior(const Model& model,
                                              const SamplerState& state, Index e,
                                              RngStream& rng);

/// Noise-injection weight draw, deterministic given the injected noise:
/// solves (c X'X + reg I) B = c X'(targets + noise_data) + sqrt(reg) noise_prior.
/// With noise_data rows ~ N(0, Lambda^-1 / c) and noise_prior rows scaled so
/// that sqrt(reg) * row ~ N(0, reg Lambda^-1), the solution has mean equal to
/// the ridge solution and covariance Lambda^-1 kron (c X'X + reg I)^-1.
/// The direct path factors once for all columns; the CG path solves columns
/// independently and matrix-free. CG non-convergence is counted in stats and
/// the best iterate is used.
Matrix weight_draw_with_noise(const FeatureMatrix& X, const Matrix& targets,
                              double c, double reg, const Matrix& noise_data,
                              const Matrix& noise_prior,
                              const WeightSolveOptions& options = {},
                              const Matrix* gram_cache = nullptr,
                              SolveStats* stats = nullptr);

/// Draw the entity feature-weight matrix from its matrix-Gaussian conditional.
Matrix sample_beta_entity(const Model& model, const SamplerState& state, Index e,
                          SolverKind solver, RngStream& rng,
                          const WeightSolveOptions& options = {},
                          SolveStats* stats = nullptr);

/// Draw the relation feature-weight vector; targets are the per-observation
/// residuals R_j - latent prediction, with noise precision alpha_R.
Vector sample_beta_relation(const Model& model, const SamplerState& state, Index r,
                            RngStream& rng, const WeightSolveOptions& options = {},
                            SolveStats* stats = nullptr);

struct GammaPosterior {
  double mu = 0.0;  // distribution mean
  double nu = 0.0;  // degrees of freedom (shape nu/2, rate nu/(2 mu))
};

/// Conditional for the entity weight precision: dof F_e*D + nu, mean
/// (F_e*D + nu) mu / (nu + mu tr(beta' beta Lambda)).
GammaPosterior lambda_beta_entity_posterior(const SamplerState& state, Index e,
                                            const HyperParams& hyper);
double sample_lambda_beta_entity(const SamplerState& state, Index e,
                                 const HyperParams& hyper, RngStream& rng);

/// Relation analogue: dof F_R + nu, mean (F_R + nu) mu / (nu + mu beta' beta).
GammaPosterior lambda_beta_relation_posterior(const SamplerState& state, Index r,
                                              const HyperParams& hyper);
double sample_lambda_beta_relation(const SamplerState& state, Index r,
                                   const HyperParams& hyper, RngStream& rng);

/// One full sweep in fixed order: per entity all latent vectors (parallel over
/// instances), then beta, lambda_beta, and the Normal-Wishart prior; then per
/// relation with features beta and lambda_beta. Caches are refreshed and the
/// iteration counter advances. All randomness is forked from (rng identity,
/// iteration, phase, index), so results do not depend on thread scheduling.
void gibbs_step(const Model& model, SamplerState& state, const RngStream& rng,
                const WeightSolveOptions& options = {}, SolveStats* stats = nullptr);

struct SamplerConfig {
  int total = 1000;
  int burnin = 800;
  WeightSolveOptions weights;
  Index train_rmse_cap = 100000;  // cells per sweep used for the progress RMSE
  std::function<void(const std::string&)> log;  // optional progress sink
  int log_every = 1;
};

struct PosteriorSummary {
  std::vector<double> train_rmse;  // one entry per sweep
  int samples = 0;                 // post-burn-in states forwarded to the sink
  double seconds_total = 0.0;
  double seconds_per_sweep = 0.0;
  SolveStats solves;
};

using SampleSink = std::function<void(const SamplerState&, int iteration)>;

/// Runs `total` sweeps from the zero-initialized state and forwards each
/// post-burn-in state to the sink.
PosteriorSummary run_sampler(const Model& model, const SamplerConfig& config,
                             const SampleSink& sink, const RngStream& rng);

}  // namespace macau
