#include "macau/mvnormal.hpp"

#include <cmath>

#include "macau/chol.hpp"

namespace macau {

void fill_standard_normal(Matrix& out, RngStream& rng) {
  double* p = out.data();
  const Index n = out.size();
  for (Index i = 0; i < n; ++i) p[i] = rng.normal();
}

Matrix sample_rows_gaussian(Index rows, const Matrix& precision_chol_lower,
                            RngStream& rng) {
  const Index dim = precision_chol_lower.rows();
  Matrix z(dim, rows);
  fill_standard_normal(z, rng);
  // row x of the result solves L' x = z, giving cov(x) = (L L')^-1.
  Matrix solved = precision_chol_lower.transpose()
                      .triangularView<Eigen::Upper>()
                      .solve(z);
  return solved.transpose();
}

Vector sample_mvnormal(const Vector& mean, const Matrix& precision, RngStream& rng) {
  if (mean.size() != precision.rows())
    throw std::invalid_argument("sample_mvnormal: dimension mismatch");
  auto chol = cholesky_psd<double>(precision);
  // A pivot that exists only because of the jitter marks a direction of
  // unbounded variance; refuse to draw from it.
  const double dmin = chol.L.diagonal().minCoeff();
  if (chol.jitter > 0.0 && dmin * dmin <= 10.0 * chol.jitter)
    throw NumericError("sample_mvnormal: precision numerically singular after jitter");
  Vector z(mean.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + chol.L.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix sample_wishart(const Matrix& scale, double dof, RngStream& rng) {
  const Index dim = scale.rows();
  if (dof < static_cast<double>(dim))
    throw std::invalid_argument("sample_wishart: dof must be >= dimension");
  auto chol = cholesky_psd<double>(scale);
  // Bartlett: A lower triangular, A_ii^2 ~ chi2(dof - i), A_ij ~ N(0,1).
  Matrix a = Matrix::Zero(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(dof - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  Matrix la = chol.L * a;
  return la * la.transpose();
}

std::pair<Vector, Matrix> sample_normal_wishart(const Vector& mu0, double beta0,
                                                const Matrix& W0, double nu0,
                                                RngStream& rng) {
  if (beta0 <= 0.0)
    throw std::invalid_argument("sample_normal_wishart: beta0 must be > 0");
  Matrix lambda = sample_wishart(W0, nu0, rng);
  Vector mu = sample_mvnormal(mu0, Matrix(beta0 * lambda), rng);
  return {std::move(mu), std::move(lambda)};
}

double sample_gamma(double mu, double nu, RngStream& rng) {
  if (mu <= 0.0 || nu <= 0.0)
    throw std::invalid_argument("sample_gamma: mu and nu must be > 0");
  return rng.gamma_shape_rate(nu / 2.0, nu / (2.0 * mu));
}

}  // namespace macau
