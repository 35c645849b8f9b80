#include "bpca/spectral.hpp"

#include <stdexcept>

#include <Eigen/SVD>

namespace bpca {

SpectralDecomposition spectral_decompose(const DataMatrix& data) {
  const Eigen::MatrixXd& x = data.x;
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (n < d) throw std::invalid_argument("spectral_decompose: need n >= d");

  // SVD of X gives both eigenbases at once: XX' = U S^2 U', X'X = V S^2 V'.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success)
    throw std::runtime_error("spectral_decompose: SVD did not converge");
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv(d - 1) > kRankTol * sv(0)))
    throw std::runtime_error(
        "spectral_decompose: X is rank-deficient (smallest/largest singular "
        "value below tolerance)");

  SpectralDecomposition spectral;
  spectral.eigvals = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < d; ++i) spectral.eigvals(i) = sv(i) * sv(i);
  spectral.eigvecs_left = svd.matrixU();
  spectral.eigvecs_right = svd.matrixV();

  // Deterministic orientation: flip mu_i so its largest-magnitude entry is
  // positive, and flip nu_i with it so that X' mu_i = s_i nu_i still holds.
  for (int i = 0; i < n; ++i) {
    Eigen::Index arg = 0;
    spectral.eigvecs_left.col(i).cwiseAbs().maxCoeff(&arg);
    if (spectral.eigvecs_left(arg, i) < 0.0) {
      spectral.eigvecs_left.col(i) *= -1.0;
      if (i < d) spectral.eigvecs_right.col(i) *= -1.0;
    }
  }

  spectral.gaps = Eigen::VectorXd::Zero(d > 1 ? d - 1 : 0);
  spectral.distinct_ok = true;
  for (int i = 0; i + 1 < d; ++i) {
    spectral.gaps(i) = spectral.eigvals(i) - spectral.eigvals(i + 1);
    if (spectral.gaps(i) < kDistinctGapTol * spectral.eigvals(0))
      spectral.distinct_ok = false;
  }
  return spectral;
}

}  // namespace bpca
