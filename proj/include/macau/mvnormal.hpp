#pragma once

#include <utility>

#include "macau/rng.hpp"
#include "macau/types.hpp"

namespace macau {

/// Draw from N(mean, precision^-1). The precision matrix is factored with the
/// jitter policy of cholesky_psd; a precision that is singular relative to its
/// own scale (a direction of unbounded variance) is rejected.
Vector sample_mvnormal(const Vector& mean, const Matrix& precision, RngStream& rng);

/// Wishart draw W(scale, dof) via Bartlett decomposition; E[draw] = dof * scale.
Matrix sample_wishart(const Matrix& scale, double dof, RngStream& rng);

/// Draw (mu, Lambda) with Lambda ~ W(W0, nu0) and mu ~ N(mu0, (beta0 Lambda)^-1).
std::pair<Vector, Matrix> sample_normal_wishart(const Vector& mu0, double beta0,
                                                const Matrix& W0, double nu0,
                                                RngStream& rng);

/// Gamma draw with density p(x) ~ x^(nu/2 - 1) exp(-nu x / (2 mu)), i.e. shape
/// nu/2 and rate nu/(2 mu). The distribution mean is exactly mu. Note this is
/// neither the usual shape/scale nor shape/rate convention.
double sample_gamma(double mu, double nu, RngStream& rng);

/// Fill a matrix with standard normal draws, column-major order.
void fill_standard_normal(Matrix& out, RngStream& rng);

/// Matrix whose rows are i.i.d. N(0, Lambda^-1), given the lower Cholesky
/// factor of the precision Lambda.
Matrix sample_rows_gaussian(Index rows, const Matrix& precision_chol_lower, RngStream& rng);

}  // namespace macau
