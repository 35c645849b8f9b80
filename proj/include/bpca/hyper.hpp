#pragma once

#include <Eigen/Dense>

namespace bpca {

// Model hyperparameters: X is n x d, the loading matrix W is d x k with
// row precision Lambda = diag(lambda_diag), the latent Z is n x k, and the
// noise precision tau0 is fixed (not learned).
struct Hyper {
  int n = 0;
  int d = 0;
  int k = 0;
  double tau0 = 0.0;
  Eigen::VectorXd lambda_diag;  // length k, strictly positive

  Eigen::MatrixXd lambda() const {
    return Eigen::MatrixXd(lambda_diag.asDiagonal());
  }

  // Throws std::invalid_argument unless n >= d >= k >= 1, tau0 > 0 and
  // every entry of lambda_diag is positive.
  void validate() const;
};

Hyper make_hyper(int n, int d, int k, double tau0,
                 const Eigen::VectorXd& lambda_diag);

// Convenience overload for a shared precision on all k components.
Hyper make_hyper(int n, int d, int k, double tau0, double lambda = 1.0);

}  // namespace bpca
