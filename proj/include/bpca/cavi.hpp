#pragma once

#include <string>
#include <vector>

#include "bpca/dataset.hpp"
#include "bpca/hyper.hpp"
#include "bpca/matrix_normal.hpp"

namespace bpca {

struct CaviConfig {
  double epsilon = 1e-15;
  long max_iters = 100000;
  Eigen::MatrixXd mu_z0;     // n x k, must be nonzero
  Eigen::MatrixXd sigma_z0;  // k x k SPD
  bool record_states = false;

  // mu_z0 = 0 would pin every iterate at the trivial fixed point, so it is
  // rejected up front.
  void validate(const Hyper& hyper) const;
};

// All entries 0.1 for mu_Z and the identity for Sigma_Z.
CaviConfig default_cavi_config(const Hyper& hyper);

struct TraceLog {
  struct Entry {
    long t = 0;
    double elbo = 0.0;
    double delta_rel = 0.0;
    double mu_z_norm = 0.0;
    double mu_w_norm = 0.0;
    double sigma_z_fro = 0.0;
    double sigma_w_fro = 0.0;
  };
  enum class Status { converged, max_iters };

  std::vector<Entry> entries;
  Status status = Status::max_iters;
  long total_sweeps = 0;
  std::vector<VariationalState> states;  // filled when record_states is set
};

// One half-sweep each; the companion block is left untouched.
//   Sigma_W <- (tau0 (n Sigma_Z + mu_Z' mu_Z) + Lambda)^-1,
//   mu_W    <- (tau0 X' mu_Z) Sigma_W
VariationalState update_w(const VariationalState& state,
                          const DataMatrix& data, const Hyper& hyper);
//   Sigma_Z <- (tau0 (d Sigma_W + mu_W' mu_W) + I_k)^-1,
//   mu_Z    <- (tau0 X mu_W) Sigma_Z
VariationalState update_z(const VariationalState& state,
                          const DataMatrix& data, const Hyper& hyper);

// ELBO with the additive constant set to zero ("elbo_0"); under that
// convention psi_loss(state) + elbo_0(state) = (tau0/2) ||X||_F^2 exactly.
double elbo_0(const VariationalState& state, const DataMatrix& data,
              const Hyper& hyper);

// Alternates update_w / update_z until the relative ELBO increase
// (elbo_t+1 - elbo_t) / (|elbo_t| + 1) drops to epsilon or max_iters is
// reached. Non-finite ELBO aborts with a diagnostic.
std::pair<VariationalState, TraceLog> run_cavi(const DataMatrix& data,
                                               const Hyper& hyper,
                                               const CaviConfig& config);

VariationalState make_state(const Hyper& hyper, const Eigen::MatrixXd& mu_w,
                            const Eigen::MatrixXd& sigma_w,
                            const Eigen::MatrixXd& mu_z,
                            const Eigen::MatrixXd& sigma_z);

}  // namespace bpca
