#pragma once

#include <vector>

#include "bpca/cavi.hpp"

namespace bpca {

// Packing of (mu_W, Sigma_W, mu_Z, Sigma_Z) into one flat vector:
// mu_W row-major, upper triangle of Sigma_W (row by row), mu_Z row-major,
// upper triangle of Sigma_Z. Off-diagonal covariance coordinates represent
// both symmetric entries, so their partial derivatives pick up a factor 2.
struct FlatLayout {
  int n = 0;
  int d = 0;
  int k = 0;

  int tri() const { return k * (k + 1) / 2; }
  int size() const { return d * k + n * k + 2 * tri(); }

  Eigen::VectorXd pack(const VariationalState& state) const;
  // Throws when an unpacked covariance is not positive definite.
  VariationalState unpack(const Eigen::VectorXd& theta,
                          bool check_pd = true) const;
  bool unpack_is_pd(const Eigen::VectorXd& theta) const;
};

FlatLayout layout_for(const Hyper& hyper);

inline constexpr double kSingTol = 1e-8;  // min|eig| / max|eig| threshold

// Psi with its constant dropped ("Psi_0"):
//   (tau0/2)||X - mu_Z mu_W'||^2 + (1/2) tr(mu_W Lambda mu_W')
//   + (1/2) tr(mu_Z' mu_Z) + (d/2) tr(Lambda Sigma_W) + (n/2) tr(Sigma_Z)
//   + (tau0 d n/2) tr(Sigma_W Sigma_Z) + (tau0 d/2) tr(Sigma_W mu_Z' mu_Z)
//   + (tau0 n/2) tr(mu_W' mu_W Sigma_Z)
//   - (d/2) logdet Sigma_W - (n/2) logdet Sigma_Z.
double psi_loss(const VariationalState& state, const DataMatrix& data,
                const Hyper& hyper);

// Coercive minorant of psi_loss (every dropped term is nonnegative):
//   (1/2) lmin(Lambda) ||mu_W||^2 + (1/2) ||mu_Z||^2
//   + (1/2)(d lmin(Lambda) tr Sigma_W - d logdet Sigma_W)
//   + (1/2)(n tr Sigma_Z - n logdet Sigma_Z).
double psi_coercive_lower_bound(const VariationalState& state,
                                const Hyper& hyper);

// Analytic gradient of psi_loss in FlatLayout coordinates.
Eigen::VectorXd psi_gradient(const Eigen::VectorXd& theta,
                             const DataMatrix& data, const Hyper& hyper);

struct HessianReport {
  Eigen::VectorXd eigvals;  // ascending
  double min_abs_over_max_abs = 0.0;
  bool singular_flag = false;
  double grad_norm_at_point = 0.0;
};

// Central finite-difference Hessian of psi_loss (differencing the analytic
// gradient, step h = 1e-5 (1 + |theta_i|)), symmetrized.
Eigen::MatrixXd psi_hessian_fd(const Eigen::VectorXd& theta,
                               const DataMatrix& data, const Hyper& hyper,
                               double h0 = 1e-5);

HessianReport hessian_spectrum(const VariationalState& state,
                               const DataMatrix& data, const Hyper& hyper);

struct NewtonResult {
  VariationalState state;
  HessianReport report;
  int iterations = 0;
};

// Damped Newton on psi_loss. The step solves the symmetrized
// finite-difference Hessian through its eigendecomposition with
// magnitudes clamped at 1e-12 max|eig| (pseudo-inverse on the flat
// rotation mode when Lambda is proportional to the identity). Step halving
// keeps the covariances PD and psi_loss non-increasing up to a
// 1e-12 (1 + |psi|) roundoff allowance; 60 failed halvings abort.
NewtonResult newton_refine(const VariationalState& start,
                           const DataMatrix& data, const Hyper& hyper,
                           double tol);

// q R = (mu_W R, R' Sigma_W R, mu_Z R, R' Sigma_Z R) for orthogonal R.
VariationalState rotate_state(const VariationalState& state,
                              const Eigen::MatrixXd& r);

Eigen::MatrixXd random_orthogonal(int k, Rng& rng);

}  // namespace bpca
