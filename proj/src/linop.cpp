#include "macau/linop.hpp"

#include <cmath>

#include "macau/chol.hpp"

namespace macau {

Matrix multiply(const FeatureMatrix& X, const Matrix& B) {
  return X.is_sparse() ? Matrix(X.sparse() * B) : Matrix(X.dense() * B);
}

Matrix multiply_transpose(const FeatureMatrix& X, const Matrix& B) {
  return X.is_sparse() ? Matrix(X.sparse().transpose() * B)
                       : Matrix(X.dense().transpose() * B);
}

Matrix gram(const FeatureMatrix& X) {
  if (X.is_sparse()) {
    SparseMatrix g = SparseMatrix(X.sparse().transpose()) * X.sparse();
    return Matrix(g);
  }
  const Index f = X.cols();
  Matrix g = Matrix::Zero(f, f);
  g.selfadjointView<Eigen::Lower>().rankUpdate(X.dense().transpose());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Matrix solve_direct(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows())
    throw std::invalid_argument("solve_direct: shape mismatch");
  auto chol = cholesky_psd<double>(A);
  Matrix X = cholesky_solve(chol.L, B);
  // One refinement pass, then verify the per-column residual bound.
  for (int pass = 0; pass < 2; ++pass) {
    Matrix R = B - A * X;
    bool ok = true;
    for (Index j = 0; j < B.cols(); ++j) {
      const double bnorm = B.col(j).norm();
      if (R.col(j).norm() > 1e-10 * (bnorm > 0 ? bnorm : 1.0)) ok = false;
    }
    if (ok) return X;
    if (pass == 0) X += cholesky_solve(chol.L, R);
  }
  throw NumericError("solve_direct: residual bound not reached (singular system?)");
}

CgResult solve_cg(const std::function<void(const Vector&, Vector&)>& apply,
                  const Vector& b, double tol, Index maxiter) {
  if (tol <= 0.0) throw std::invalid_argument("solve_cg: tol must be > 0");
  const Index n = b.size();
  CgResult out;
  out.x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;

  Vector r = b;
  Vector p = r;
  Vector ap(n);
  double rr = r.squaredNorm();
  for (Index it = 0; it < maxiter; ++it) {
    apply(p, ap);
    const double pap = p.dot(ap);
    if (pap <= 0.0)
      throw NumericError("solve_cg: operator is not positive definite");
    const double alpha = rr / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    out.iterations = it + 1;
    if (std::sqrt(rr_next) <= tol * bnorm) {
      // Confirm with the true residual; the recurrence can drift.
      apply(out.x, ap);
      Vector true_r = b - ap;
      const double true_norm = true_r.norm();
      if (true_norm <= tol * bnorm) {
        out.residual = true_norm / bnorm;
        return out;
      }
      r = std::move(true_r);
      rr = r.squaredNorm();
      p = r;
      continue;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  apply(out.x, ap);
  out.residual = (b - ap).norm() / bnorm;
  out.converged = out.residual <= tol;
  return out;
}

std::function<void(const Vector&, Vector&)> ridge_operator(const FeatureMatrix& X,
                                                           double c, double reg) {
  if (X.is_sparse()) {
    const SparseMatrix& s = X.sparse();
    return [&s, c, reg](const Vector& v, Vector& out) {
      out.noalias() = c * (s.transpose() * (s * v).eval());
      out += reg * v;
    };
  }
  const Matrix& d = X.dense();
  return [&d, c, reg](const Vector& v, Vector& out) {
    out.noalias() = c * (d.transpose() * (d * v).eval());
    out += reg * v;
  };
}

}  // namespace macau
