#include "macau/model.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "macau/rng.hpp"

namespace macau {

HyperParams HyperParams::defaults(int latent_dim) {
  HyperParams h;
  h.latent_dim = latent_dim;
  h.mu0 = Vector::Zero(latent_dim);
  h.beta0 = 2.0;
  h.W0 = Matrix::Identity(latent_dim, latent_dim);
  h.nu0 = static_cast<double>(latent_dim);
  h.gamma_mu = 1.0;
  h.gamma_nu = 1.0;
  return h;
}

SolverKind resolve_solver(SolverKind requested, const FeatureMatrix& X) {
  if (requested != SolverKind::Auto) return requested;
  return (!X.is_sparse() && X.cols() <= 20000) ? SolverKind::Direct : SolverKind::Cg;
}

Index Model::entity_index(const std::string& name) const {
  for (Index e = 0; e < static_cast<Index>(entities_.size()); ++e)
    if (entities_[e].name == name) return e;
  return -1;
}

Index Model::add_entity(const std::string& name, Index count,
                        std::optional<FeatureMatrix> features, SolverKind solver) {
  if (count < 1) throw std::invalid_argument("entity '" + name + "': count must be >= 1");
  if (entity_index(name) >= 0)
    throw std::invalid_argument("entity '" + name + "': duplicate name");
  Entity e;
  e.name = name;
  e.count = count;
  e.solver = solver;
  if (features) {
    if (features->rows() != count)
      throw std::invalid_argument("entity '" + name + "': feature matrix has " +
                                  std::to_string(features->rows()) + " rows, expected " +
                                  std::to_string(count));
    e.features = std::move(*features);
    e.feature_dim = e.features.cols();
    if (e.feature_dim > 0 && resolve_solver(solver, e.features) == SolverKind::Direct)
      e.gram_cache = gram(e.features);
  }
  entities_.push_back(std::move(e));
  links_.emplace_back();
  return static_cast<Index>(entities_.size()) - 1;
}

namespace {

std::uint64_t hash_cell(std::span<const int> cell) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (int v : cell) h = detail::mix64(h ^ static_cast<std::uint64_t>(v));
  return h;
}

ModeIndex build_mode_index(const Relation& r, int mode, Index instance_count) {
  ModeIndex mi;
  mi.offsets.assign(instance_count + 1, 0);
  const int k = r.degree();
  for (Index o = 0; o < r.nnz(); ++o) ++mi.offsets[r.indices[o * k + mode] + 1];
  for (Index i = 0; i < instance_count; ++i) mi.offsets[i + 1] += mi.offsets[i];
  mi.obs.resize(r.nnz());
  std::vector<Index> cursor(mi.offsets.begin(), mi.offsets.end() - 1);
  for (Index o = 0; o < r.nnz(); ++o)
    mi.obs[cursor[r.indices[o * k + mode]]++] = o;
  return mi;
}

}  // namespace

Index Model::add_relation(const std::string& name,
                          const std::vector<std::string>& entity_names,
                          std::vector<int> indices, Vector values, double alpha,
                          std::optional<FeatureMatrix> features) {
  const std::string where = "relation '" + name + "': ";
  const int k = static_cast<int>(entity_names.size());
  if (k < 2) throw std::invalid_argument(where + "degree must be >= 2");
  if (alpha <= 0.0) throw std::invalid_argument(where + "alpha must be > 0");

  Relation r;
  r.name = name;
  r.alpha = alpha;
  for (const auto& en : entity_names) {
    Index e = entity_index(en);
    if (e < 0) throw std::invalid_argument(where + "unknown entity '" + en + "'");
    r.entity_ids.push_back(e);
  }
  const Index nnz = values.size();
  if (static_cast<Index>(indices.size()) != nnz * k)
    throw std::invalid_argument(where + "index/value length mismatch");
  r.indices = std::move(indices);
  r.values = std::move(values);

  // Repeated-entity modes: a cell sitting on their diagonal breaks the latent
  // conditional and is rejected here; validate() flags the relation itself.
  std::vector<std::pair<int, int>> repeated;
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      if (r.entity_ids[a] == r.entity_ids[b]) repeated.emplace_back(a, b);

  std::unordered_map<std::uint64_t, std::vector<Index>> seen;
  seen.reserve(static_cast<std::size_t>(nnz) * 2);
  for (Index o = 0; o < nnz; ++o) {
    auto cell = r.cell(o);
    for (int m = 0; m < k; ++m) {
      const Index n = entities_[r.entity_ids[m]].count;
      if (cell[m] < 0 || cell[m] >= n)
        throw std::invalid_argument(where + "cell " + std::to_string(o) +
                                    " index out of range for entity '" +
                                    entities_[r.entity_ids[m]].name + "'");
    }
    for (auto [a, b] : repeated)
      if (cell[a] == cell[b])
        throw std::invalid_argument(where +
                                    "self-relation with diagonal observation rejected "
                                    "(cell " + std::to_string(o) + ")");
    auto& bucket = seen[hash_cell(cell)];
    for (Index prev : bucket)
      if (std::equal(cell.begin(), cell.end(), r.cell(prev).begin()))
        throw std::invalid_argument(where + "duplicate cell at row " + std::to_string(o));
    bucket.push_back(o);
  }

  if (features) {
    if (features->rows() != nnz)
      throw std::invalid_argument(where + "feature rows (" +
                                  std::to_string(features->rows()) +
                                  ") must match observation count (" +
                                  std::to_string(nnz) + ")");
    if (features->cols() < 1)
      throw std::invalid_argument(where + "feature matrix has no columns");
    r.features = std::move(*features);
    r.feature_dim = r.features.cols();
    if (resolve_solver(SolverKind::Auto, r.features) == SolverKind::Direct)
      r.gram_cache = gram(r.features);
  }

  for (int m = 0; m < k; ++m)
    r.mode_index.push_back(build_mode_index(r, m, entities_[r.entity_ids[m]].count));

  const Index rid = static_cast<Index>(relations_.size());
  for (int m = 0; m < k; ++m) links_[r.entity_ids[m]].emplace_back(rid, m);
  relations_.push_back(std::move(r));
  return rid;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  os << (ok ? "ok" : "not factorizable");
  for (const auto& f : findings) os << "\n  - " << f.message;
  return os.str();
}

ValidationReport validate(const Model& model) {
  ValidationReport report;
  if (model.relations().empty() || model.entities().empty()) {
    report.ok = false;
    report.findings.push_back({"model has no entities or no relations"});
    return report;
  }

  // Self-relations: an entity listed twice in one relation.
  for (const auto& r : model.relations()) {
    std::set<Index> uniq(r.entity_ids.begin(), r.entity_ids.end());
    if (uniq.size() != r.entity_ids.size()) {
      report.ok = false;
      report.findings.push_back(
          {"relation '" + r.name +
           "' links an entity to itself; introduce a distinct entity for the "
           "second role (e.g. a copy or a type entity)"});
    }
  }

  // Each unordered entity pair may carry at most one relation.
  std::map<std::pair<Index, Index>, std::vector<std::string>> pair_edges;
  for (const auto& r : model.relations()) {
    std::set<Index> uniq(r.entity_ids.begin(), r.entity_ids.end());
    for (auto a = uniq.begin(); a != uniq.end(); ++a)
      for (auto b = std::next(a); b != uniq.end(); ++b)
        pair_edges[{*a, *b}].push_back(r.name);
  }
  for (const auto& [pair, names] : pair_edges) {
    if (names.size() <= 1) continue;
    report.ok = false;
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "'" : ", '") + n + "'";
    report.findings.push_back(
        {"entities '" + model.entity(pair.first).name + "' and '" +
         model.entity(pair.second).name + "' are linked by " +
         std::to_string(names.size()) + " relations (" + list +
         "): the model is not factorizable; merge them into one tensor "
         "relation with an added type entity"});
  }
  return report;
}

}  // namespace macau
