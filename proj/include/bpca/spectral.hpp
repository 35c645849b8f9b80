#pragma once

#include <Eigen/Dense>

#include "bpca/dataset.hpp"

namespace bpca {

// Eigenstructure of XX' and X'X. Both share the d positive eigenvalues
// lambda_1 > ... > lambda_d; the remaining eigenvalues of XX' are zero.
// Each left eigenvector mu_i is sign-normalized so its largest-magnitude
// entry is positive, and nu_i = X' mu_i / sqrt(lambda_i) for i <= d, which
// keeps the two bases consistently oriented.
struct SpectralDecomposition {
  Eigen::VectorXd eigvals;       // length n, nonincreasing, trailing zeros
  Eigen::MatrixXd eigvecs_left;  // n x n orthonormal columns (XX')
  Eigen::MatrixXd eigvecs_right; // d x d orthonormal columns (X'X)
  Eigen::VectorXd gaps;          // rho_i = lambda_i - lambda_{i+1}, i < d
  bool distinct_ok = true;       // false when some relative gap < 1e-9

  int n() const { return static_cast<int>(eigvecs_left.rows()); }
  int d() const { return static_cast<int>(eigvecs_right.rows()); }
};

inline constexpr double kRankTol = 1e-10;       // smallest/largest singular value
inline constexpr double kDistinctGapTol = 1e-9; // relative eigenvalue gap

// Throws std::runtime_error if X is rank-deficient below kRankTol. A
// violation of the strict-gap assumption only clears distinct_ok (the
// directional rate bounds are then unreliable, everything else stands).
SpectralDecomposition spectral_decompose(const DataMatrix& data);

}  // namespace bpca
