#include "macau/io.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <string_view>
#include <vector>

namespace macau {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
      field.remove_prefix(1);
    while (!field.empty() &&
           (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int parse_int(std::string_view tok, const std::string& path, long line) {
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(path, line, "expected integer, got '" + std::string(tok) + "'");
  return v;
}

double parse_real(std::string_view tok, const std::string& path, long line) {
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(path, line, "expected real number, got '" + std::string(tok) + "'");
  return v;
}

bool is_comment(std::string_view line) {
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == '\r') continue;
    return c == '%';
  }
  return true;  // blank
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return in;
}

}  // namespace

ObservationData load_observations(const std::string& path, int degree) {
  if (degree < 2) throw std::invalid_argument("load_observations: degree must be >= 2");
  auto in = open_or_throw(path);
  ObservationData data;
  data.degree = degree;
  std::vector<double> values;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment(line)) continue;
    auto tok = split_ws(line);
    if (static_cast<int>(tok.size()) != degree + 1)
      throw ParseError(path, lineno,
                       "expected " + std::to_string(degree + 1) + " columns, got " +
                           std::to_string(tok.size()));
    for (int m = 0; m < degree; ++m) {
      int idx = parse_int(tok[m], path, lineno);
      if (idx < 1) throw ParseError(path, lineno, "indices are 1-based; got " + std::to_string(idx));
      data.indices.push_back(idx - 1);
    }
    values.push_back(parse_real(tok[degree], path, lineno));
  }
  data.values = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  return data;
}

void save_observations(const std::string& path, const ObservationData& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[64];
  for (Index o = 0; o < data.count(); ++o) {
    for (int m = 0; m < data.degree; ++m)
      out << data.indices[o * data.degree + m] + 1 << ' ';
    std::snprintf(buf, sizeof(buf), "%.17g", data.values(o));
    out << buf << '\n';
  }
}

namespace {

FeatureMatrix load_dense_csv(const std::string& path) {
  auto in = open_or_throw(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment(line)) continue;
    auto tok = split_csv(line);
    std::vector<double> row;
    row.reserve(tok.size());
    for (auto t : tok) row.push_back(parse_real(t, path, lineno));
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError(path, lineno,
                       "ragged row: " + std::to_string(row.size()) + " columns, expected " +
                           std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return FeatureMatrix(std::move(m));
}

FeatureMatrix load_sparse_triplet(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  long lineno = 0;
  Index n = -1, f = -1;
  std::vector<Eigen::Triplet<double>> triplets;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = split_ws(line);
    if (n < 0) {
      // First non-blank line must declare the shape; trailing all-zero
      // rows/columns would otherwise be ambiguous.
      if (tok.empty()) continue;
      if (tok.size() != 3 || tok[0] != "%%shape")
        throw ParseError(path, lineno, "expected '%%shape N F' header");
      n = parse_int(tok[1], path, lineno);
      f = parse_int(tok[2], path, lineno);
      if (n < 1 || f < 1) throw ParseError(path, lineno, "shape must be positive");
      continue;
    }
    if (is_comment(line)) continue;
    if (tok.size() != 3)
      throw ParseError(path, lineno, "expected 'row col value' triplet");
    int row = parse_int(tok[0], path, lineno);
    int col = parse_int(tok[1], path, lineno);
    double val = parse_real(tok[2], path, lineno);
    if (row < 1 || row > n || col < 1 || col > f)
      throw ParseError(path, lineno, "triplet index out of declared shape");
    triplets.emplace_back(row - 1, col - 1, val);
  }
  if (n < 0) throw ParseError(path + ": missing '%%shape N F' header");
  SparseMatrix m(n, f);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return FeatureMatrix(std::move(m));
}

}  // namespace

FeatureMatrix load_features(const std::string& path, FeatureFormat format) {
  return format == FeatureFormat::DenseCsv ? load_dense_csv(path)
                                           : load_sparse_triplet(path);
}

int infer_degree(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment(line)) continue;
    const int cols = static_cast<int>(split_ws(line).size());
    if (cols < 3) throw ParseError(path, lineno, "need at least two index columns and a value");
    return cols - 1;
  }
  throw ParseError(path + ": no data lines");
}

FeatureFormat parse_feature_format(const std::string& name) {
  if (name == "dense-csv") return FeatureFormat::DenseCsv;
  if (name == "sparse-triplet") return FeatureFormat::SparseTriplet;
  throw ConfigError("unknown feature format '" + name +
                    "' (expected dense-csv or sparse-triplet)");
}

}  // namespace macau
