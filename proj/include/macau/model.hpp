#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macau/linop.hpp"
#include "macau/types.hpp"

namespace macau {

struct HyperParams {
  int latent_dim = 0;       // D
  Vector mu0;               // prior mean location, length D
  double beta0 = 2.0;       // prior mean concentration
  Matrix W0;                // Wishart scale, D x D
  double nu0 = 0.0;         // Wishart dof, >= D
  double gamma_mu = 1.0;    // gamma hyperprior mean for weight precisions
  double gamma_nu = 1.0;    // gamma hyperprior dof

  /// Uninformative defaults: mu0 = 0, beta0 = 2, W0 = I, nu0 = D, gammas = 1.
  static HyperParams defaults(int latent_dim);
};

struct Entity {
  std::string name;
  Index count = 0;                        // number of instances N_e
  FeatureMatrix features;                 // N_e x F_e; 0x0 when absent
  Index feature_dim = 0;                  // F_e
  SolverKind solver = SolverKind::Auto;   // override for the weight solver
  std::optional<Matrix> gram_cache;       // X'X, present when the direct solver applies

  bool has_features() const { return feature_dim > 0; }
};

/// Per-mode adjacency: which observations touch each instance of one entity.
struct ModeIndex {
  std::vector<Index> offsets;  // size N_e + 1
  std::vector<Index> obs;      // observation ids grouped by instance

  std::span<const Index> of(Index instance) const {
    return {obs.data() + offsets[instance],
            static_cast<std::size_t>(offsets[instance + 1] - offsets[instance])};
  }
};

struct Relation {
  std::string name;
  std::vector<Index> entity_ids;          // ordered, degree k >= 2
  std::vector<int> indices;               // nnz * k, 0-based, row-major per cell
  Vector values;                          // nnz
  double alpha = 0.0;                     // observation noise precision
  FeatureMatrix features;                 // nnz x F_R; 0x0 when absent
  Index feature_dim = 0;                  // F_R
  std::optional<Matrix> gram_cache;
  std::vector<ModeIndex> mode_index;      // one per mode

  int degree() const { return static_cast<int>(entity_ids.size()); }
  Index nnz() const { return values.size(); }
  bool has_features() const { return feature_dim > 0; }

  std::span<const int> cell(Index o) const {
    return {indices.data() + o * degree(), static_cast<std::size_t>(degree())};
  }
};

struct ValidationFinding {
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationFinding> findings;

  std::string to_string() const;
};

/// The entity/relation hypergraph plus global hyperparameters. Built once,
/// then immutable; a built model is safe to share read-only across threads.
class Model {
 public:
  explicit Model(HyperParams hyper) : hyper_(std::move(hyper)) {}

  /// Registers an entity. Throws std::invalid_argument on duplicate name or
  /// feature row-count mismatch.
  Index add_entity(const std::string& name, Index count,
                   std::optional<FeatureMatrix> features = std::nullopt,
                   SolverKind solver = SolverKind::Auto);

  /// Registers a k-ary relation over existing entities. `indices` holds nnz*k
  /// 0-based entries, one cell per row. Throws on unknown entity, out-of-range
  /// index, duplicate cell, diagonal cell of a repeated entity, alpha <= 0, or
  /// feature row misalignment.
  Index add_relation(const std::string& name,
                     const std::vector<std::string>& entity_names,
                     std::vector<int> indices, Vector values, double alpha,
                     std::optional<FeatureMatrix> features = std::nullopt);

  const HyperParams& hyper() const { return hyper_; }
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const Entity& entity(Index e) const { return entities_[e]; }
  const Relation& relation(Index r) const { return relations_[r]; }
  Index entity_index(const std::string& name) const;  // -1 when unknown

  /// Relations touching entity e, as (relation id, mode) pairs.
  const std::vector<std::pair<Index, int>>& links(Index e) const { return links_[e]; }

 private:
  HyperParams hyper_;
  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::vector<std::vector<std::pair<Index, int>>> links_;
};

/// Checks that the model is factorizable: at most one relation between any
/// pair of entities and no relation listing the same entity twice. Findings
/// name the offending relations and suggest tensorization via a type entity.
ValidationReport validate(const Model& model);

/// Solver the weight sampler will use for a design matrix: direct for dense
/// features up to 20,000 columns, conjugate gradient otherwise.
SolverKind resolve_solver(SolverKind requested, const FeatureMatrix& X);

}  // namespace macau
