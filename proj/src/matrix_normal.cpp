#include "bpca/matrix_normal.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace bpca {

void MatrixNormal::validate() const {
  if (row_cov.rows() != row_cov.cols() || row_cov.rows() != mean.cols())
    throw std::invalid_argument("MatrixNormal: row_cov must be k x k");
  const double asym =
      (row_cov - row_cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12)
    throw std::invalid_argument("MatrixNormal: row_cov not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(row_cov);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("MatrixNormal: row_cov not positive definite");
}

Eigen::MatrixXd MatrixNormal::sample(Rng& rng) const {
  Eigen::LLT<Eigen::MatrixXd> llt(row_cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("MatrixNormal::sample: Cholesky failed");
  const Eigen::MatrixXd l = llt.matrixL();
  return mean + rng.gaussian_matrix(rows(), k()) * l.transpose();
}

void VariationalState::validate() const {
  q_w.validate();
  q_z.validate();
  if (q_w.k() != q_z.k())
    throw std::invalid_argument("VariationalState: blocks disagree on k");
}

MomentSummary moment_summary(const VariationalState& state) {
  const double d = static_cast<double>(state.q_w.rows());
  const double n = static_cast<double>(state.q_z.rows());
  return {d * state.q_w.row_cov +
              state.q_w.mean.transpose() * state.q_w.mean,
          n * state.q_z.row_cov +
              state.q_z.mean.transpose() * state.q_z.mean};
}

}  // namespace bpca
