#pragma once

#include <functional>
#include <utility>
#include <variant>

#include "macau/types.hpp"

namespace macau {

enum class SolverKind { Auto, Direct, Cg };

/// Dense or compressed-sparse design matrix (instances x features).
class FeatureMatrix {
 public:
  FeatureMatrix() : data_(Matrix(0, 0)) {}
  explicit FeatureMatrix(Matrix dense) : data_(std::move(dense)) {}
  explicit FeatureMatrix(SparseMatrix sparse) : data_(std::move(sparse)) {
    std::get<SparseMatrix>(data_).makeCompressed();
  }

  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(data_); }
  Index rows() const {
    return is_sparse() ? std::get<SparseMatrix>(data_).rows()
                       : std::get<Matrix>(data_).rows();
  }
  Index cols() const {
    return is_sparse() ? std::get<SparseMatrix>(data_).cols()
                       : std::get<Matrix>(data_).cols();
  }
  Index size() const { return rows() * cols(); }

  const Matrix& dense() const { return std::get<Matrix>(data_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(data_); }

  Matrix to_dense() const {
    return is_sparse() ? Matrix(sparse()) : dense();
  }

 private:
  std::variant<Matrix, SparseMatrix> data_;
};

/// X * B
Matrix multiply(const FeatureMatrix& X, const Matrix& B);
/// X' * B
Matrix multiply_transpose(const FeatureMatrix& X, const Matrix& B);
/// X' * X as a dense matrix. Intended for the direct solver path; callers
/// keeping X sparse for conjugate gradient never materialize this.
Matrix gram(const FeatureMatrix& X);

/// Solve A X = B for symmetric PD A (jitter policy applies), all columns at
/// once. Postcondition: per-column relative residual <= 1e-10; a system that
/// cannot reach it after iterative refinement throws NumericError.
Matrix solve_direct(const Matrix& A, const Matrix& B);

struct CgResult {
  Vector x;
  Index iterations = 0;
  double residual = 0.0;  // relative, |A x - b| / |b|
  bool converged = true;
};

/// Conjugate gradient on a matrix-free SPD operator. Stops when the true
/// relative residual reaches tol or at maxiter (best iterate returned,
/// converged = false). b = 0 returns x = 0 in zero iterations.
CgResult solve_cg(const std::function<void(const Vector&, Vector&)>& apply,
                  const Vector& b, double tol, Index maxiter);

/// v -> c * X'(X v) + reg * v without forming X'X.
std::function<void(const Vector&, Vector&)> ridge_operator(const FeatureMatrix& X,
                                                           double c, double reg);

}  // namespace macau
