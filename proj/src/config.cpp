#include "macau/config.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>

namespace macau {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

struct KeyContext {
  std::string section;
  std::string key;

  std::string path() const { return "[" + section + "] " + key; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(path() + ": " + what);
  }
};

long to_int(const std::string& v, const KeyContext& ctx) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    ctx.fail("expected integer, got '" + v + "'");
  return out;
}

double to_real(const std::string& v, const KeyContext& ctx) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    ctx.fail("expected real number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, const KeyContext& ctx) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  ctx.fail("expected boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    std::size_t comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma == std::string::npos
                                           ? std::string::npos
                                           : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

SolverKind to_solver(const std::string& v, const KeyContext& ctx) {
  if (v == "auto") return SolverKind::Auto;
  if (v == "direct") return SolverKind::Direct;
  if (v == "cg") return SolverKind::Cg;
  ctx.fail("expected auto, direct or cg, got '" + v + "'");
}

}  // namespace

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  const auto base_dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base_dir / fp).string();
  };

  RunConfig cfg;
  std::string section;  // "sampler", "options", "output", "entity NAME", ...
  EntitySpec* entity = nullptr;
  RelationSpec* relation = nullptr;

  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(path + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      entity = nullptr;
      relation = nullptr;
      if (section == "sampler" || section == "options" || section == "output") continue;
      if (section.rfind("entity ", 0) == 0) {
        std::string name = trim(section.substr(7));
        if (name.empty()) throw ConfigError(path + ": entity section without a name");
        cfg.entities.push_back({});
        cfg.entities.back().name = name;
        entity = &cfg.entities.back();
        continue;
      }
      if (section.rfind("relation ", 0) == 0) {
        std::string name = trim(section.substr(9));
        if (name.empty()) throw ConfigError(path + ": relation section without a name");
        cfg.relations.push_back({});
        cfg.relations.back().name = name;
        relation = &cfg.relations.back();
        continue;
      }
      throw ConfigError(path + ": unknown section [" + section + "]");
    }

    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const KeyContext ctx{section, key};
    if (section.empty()) ctx.fail("key outside any section");

    if (section == "sampler") {
      if (key == "latent_dim") {
        cfg.latent_dim = static_cast<int>(to_int(value, ctx));
      } else if (key == "total") {
        cfg.total = static_cast<int>(to_int(value, ctx));
      } else if (key == "burnin") {
        cfg.burnin = static_cast<int>(to_int(value, ctx));
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(to_int(value, ctx));
      } else {
        ctx.fail("unknown key");
      }
    } else if (section == "options") {
      if (key == "clamp") {
        auto parts = split_list(value);
        if (parts.size() != 2) ctx.fail("expected 'low, high'");
        cfg.clamp = {to_real(parts[0], ctx), to_real(parts[1], ctx)};
      } else if (key == "center") {
        cfg.center = to_bool(value, ctx);
      } else if (key == "repetitions") {
        cfg.repetitions = static_cast<int>(to_int(value, ctx));
      } else if (key == "vary") {
        if (value == "seed") cfg.vary = VaryMode::Seed;
        else if (value == "split") cfg.vary = VaryMode::Split;
        else ctx.fail("expected seed or split, got '" + value + "'");
      } else if (key == "parallel_repetitions") {
        cfg.parallel_repetitions = to_bool(value, ctx);
      } else {
        ctx.fail("unknown key");
      }
    } else if (section == "output") {
      if (key == "dir") cfg.output_dir = resolve(value);
      else if (key == "prefix") cfg.output_prefix = value;
      else ctx.fail("unknown key");
    } else if (entity) {
      if (key == "count") {
        entity->count = to_int(value, ctx);
      } else if (key == "features") {
        entity->feature_path = resolve(value);
      } else if (key == "features_format") {
        entity->feature_format = parse_feature_format(value);
      } else if (key == "solver") {
        entity->solver = to_solver(value, ctx);
      } else {
        ctx.fail("unknown key");
      }
    } else if (relation) {
      if (key == "entities") {
        relation->entities = split_list(value);
      } else if (key == "observations") {
        relation->observation_path = resolve(value);
      } else if (key == "alpha") {
        relation->alpha = to_real(value, ctx);
      } else if (key == "test_file") {
        relation->test_path = resolve(value);
      } else if (key == "test_fraction") {
        relation->test_fraction = to_real(value, ctx);
      } else if (key == "features") {
        relation->feature_path = resolve(value);
      } else if (key == "features_format") {
        relation->feature_format = parse_feature_format(value);
      } else if (key == "test_features") {
        relation->test_feature_path = resolve(value);
      } else if (key == "test_features_format") {
        relation->test_feature_format = parse_feature_format(value);
      } else {
        ctx.fail("unknown key");
      }
    } else {
      ctx.fail("unknown key");
    }
  }

  // Cross-key constraints, reported with their key paths.
  if (cfg.latent_dim < 1) throw ConfigError("[sampler] latent_dim: must be >= 1");
  if (cfg.total < 1) throw ConfigError("[sampler] total: must be >= 1");
  if (cfg.burnin < 0 || cfg.burnin >= cfg.total)
    throw ConfigError("[sampler] burnin: must satisfy 0 <= burnin < total "
                      "([sampler] total = " + std::to_string(cfg.total) +
                      ", [sampler] burnin = " + std::to_string(cfg.burnin) + ")");
  if (cfg.repetitions < 1) throw ConfigError("[options] repetitions: must be >= 1");
  if (cfg.clamp && cfg.clamp->first > cfg.clamp->second)
    throw ConfigError("[options] clamp: low must be <= high");
  if (cfg.entities.empty()) throw ConfigError("config defines no [entity ...] section");
  if (cfg.relations.empty()) throw ConfigError("config defines no [relation ...] section");
  for (const auto& e : cfg.entities) {
    const std::string at = "[entity " + e.name + "] ";
    if (e.count < 1) throw ConfigError(at + "count: must be >= 1");
  }
  for (const auto& r : cfg.relations) {
    const std::string at = "[relation " + r.name + "] ";
    if (r.entities.size() < 2) throw ConfigError(at + "entities: need at least two entity names");
    if (r.observation_path.empty()) throw ConfigError(at + "observations: missing");
    if (r.alpha <= 0.0)
      throw ConfigError(at + "alpha: mandatory and must be > 0 (the noise "
                        "precision is treated as known)");
    if (!r.test_path.empty() && r.test_fraction != 0.0)
      throw ConfigError(at + "test_file and test_fraction are mutually exclusive");
    if (r.test_fraction != 0.0 && !(r.test_fraction > 0.0 && r.test_fraction < 1.0))
      throw ConfigError(at + "test_fraction: must be in (0, 1)");
    if (!r.test_feature_path.empty() && r.test_path.empty())
      throw ConfigError(at + "test_features: requires test_file");
    if (!r.test_feature_path.empty() && r.feature_path.empty())
      throw ConfigError(at + "test_features: requires features");
  }
  return cfg;
}

}  // namespace macau
