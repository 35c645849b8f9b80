#pragma once

#include <Eigen/Dense>

#include "bpca/rng.hpp"

namespace bpca {

// Matrix normal N(mean, I_r (x) row_cov): r independent rows sharing the
// k x k row covariance. This is the only covariance shape the CAVI updates
// ever produce, so the type enforces it.
struct MatrixNormal {
  Eigen::MatrixXd mean;     // r x k
  Eigen::MatrixXd row_cov;  // k x k symmetric positive definite

  int rows() const { return static_cast<int>(mean.rows()); }
  int k() const { return static_cast<int>(mean.cols()); }

  // Throws std::invalid_argument on asymmetry (> 1e-12 max-norm) or a
  // non-positive-definite row covariance.
  void validate() const;

  // One draw: mean + E L' with E standard normal and L L' = row_cov.
  Eigen::MatrixXd sample(Rng& rng) const;
};

struct VariationalState {
  MatrixNormal q_w;  // rows = d
  MatrixNormal q_z;  // rows = n

  int k() const { return q_w.k(); }
  void validate() const;
};

// Gamma_W = d Sigma_W + mu_W' mu_W and Gamma_Z = n Sigma_Z + mu_Z' mu_Z.
struct MomentSummary {
  Eigen::MatrixXd gamma_w;
  Eigen::MatrixXd gamma_z;
};

MomentSummary moment_summary(const VariationalState& state);

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace bpca
