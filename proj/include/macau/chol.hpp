#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "macau/types.hpp"

namespace macau {

template <typename Scalar>
struct PsdCholesky {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> L;  // lower, L*L' = A + jitter*I
  Scalar jitter{0};
};

/// Cholesky factorization with diagonal jitter escalation.
///
/// Tries to factor A as given; on failure adds jitter starting at
/// 1e-10 * trace(A)/dim and escalates tenfold up to 1e-6 * trace(A)/dim.
/// For matrices with nonpositive trace the jitter scale falls back to 1,
/// so a zero matrix factors to sqrt(jitter) * I.
template <typename Scalar>
PsdCholesky<Scalar> cholesky_psd(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index dim = A.rows();
  if (dim == 0 || A.cols() != dim)
    throw std::invalid_argument("cholesky_psd: matrix must be square and nonempty");
  const Scalar asym = (A - A.transpose()).template lpNorm<Eigen::Infinity>();
  if (asym > Scalar(1e-12) * (Scalar(1) + A.template lpNorm<Eigen::Infinity>()))
    throw std::invalid_argument("cholesky_psd: matrix is not symmetric");

  const Scalar trace_scale = A.trace() / Scalar(dim);
  const Scalar scale = trace_scale > Scalar(0) ? trace_scale : Scalar(1);
  const Scalar max_jitter = Scalar(1e-6) * scale;

  Mat sym = (A + A.transpose()) / Scalar(2);
  Scalar jitter = 0;
  while (true) {
    Mat shifted = sym;
    if (jitter > Scalar(0)) shifted.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Mat L = llt.matrixL();
      if (L.allFinite()) return {std::move(L), jitter};
    }
    if (jitter == Scalar(0)) {
      jitter = Scalar(1e-10) * scale;
    } else if (jitter * Scalar(10) <= max_jitter * Scalar(1 + 1e-12)) {
      jitter *= Scalar(10);
    } else {
      throw NumericError("cholesky_psd: matrix not positive definite after max jitter");
    }
  }
}

/// Solve A x = b for PD A using an existing lower factor (L L' = A).
template <typename Scalar, typename Rhs>
typename Rhs::PlainObject cholesky_solve(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& L,
    const Eigen::MatrixBase<Rhs>& b) {
  typename Rhs::PlainObject y =
      L.template triangularView<Eigen::Lower>().solve(b.derived());
  typename Rhs::PlainObject x =
      L.transpose().template triangularView<Eigen::Upper>().solve(y);
  return x;
}

}  // namespace macau
