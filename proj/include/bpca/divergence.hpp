#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bpca/cavi.hpp"
#include "bpca/matrix_normal.hpp"

namespace bpca {

// gamma_0 = (1 + e^-1) / 4, the r0 -> 0 limit of the mean-term
// constant; also the normalizer in the GCorr condition.
double gamma0();

// KL(q || q*) for two matrix normals sharing the I_r (x) Sigma structure:
//   (1/2) [ r (tr(S*^-1 S) - k - logdet(S*^-1 S))
//           + tr(S*^-1 (mu - mu*)' (mu - mu*)) ].
// The Kronecker quadratic form is evaluated row-wise; the rk x rk
// covariance is never materialized.
double kl_matrix_normal(const MatrixNormal& q, const MatrixNormal& q_star);

// (KL(q||q*) + KL(q*||q)) / 2.
double sym_kl(const MatrixNormal& q, const MatrixNormal& q_star);

// Lower bound on sym_kl valid inside the KL ball KL(q*||q) <= r0:
//   r c3 / (||S*||^2 e^{1+2 r0/r}) ||S - S*||^2 + c2 / ||S*|| ||mu - mu*||^2
// with c2 = (1 + e^{-(1+2 r0/r)})/4 and c3 = 1/4, r the row count.
double kl_lower_bound(const MatrixNormal& q, const MatrixNormal& q_star,
                      double r0);

// Ball-membership box: any q with
// KL(q*||q) <= r0 satisfies both bounds below.
struct KlBallBox {
  double sigma_op_max = 0.0;   // ||Sigma||_op <= ||Sigma*|| e^{1+2r0/r}
  double mean_dist_sq_max = 0.0;  // ||mu-mu*||^2 <= 2 r0 e^{1+2r0/r} ||Sigma*||_op
};
KlBallBox kl_ball_box(const MatrixNormal& q_star, double r0);

// Delta, the covariance functional between blocks. Exact trace form:
//   tau0 tr((mu_W - mu_W*)(mu_Z - mu_Z*)' X)
//     - (tau0/2) tr((Gamma_W - Gamma_W*)(Gamma_Z - Gamma_Z*)').
double delta_exact(const VariationalState& state,
                   const VariationalState& state_star, const DataMatrix& data,
                   const Hyper& hyper);

// Monte-Carlo estimate of the defining double integral. Per draw the four
// signed log-posterior terms share one sample of each block measure, so the
// dropped posterior constant cancels exactly.
struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
};
MonteCarloEstimate delta_monte_carlo(const VariationalState& state,
                                     const VariationalState& state_star,
                                     const DataMatrix& data,
                                     const Hyper& hyper, long n_samples,
                                     std::uint64_t seed);

// Product-form bound on the covariance functional:
//   (tau0 ||X|| + C1 C2 tau0 / 2) A1 A2
//     + (n d tau0 B1 B2 + d C1 tau0 B2 A1 + n C2 tau0 A2 B1) / 2,
// all norms Frobenius.
double delta_upper_bound(const VariationalState& state,
                         const VariationalState& state_star,
                         const DataMatrix& data, const Hyper& hyper);

struct GCorrReport {
  std::array<double, 4> terms{0.0, 0.0, 0.0, 0.0};
  double gamma0 = 0.0;
  int max_index = 0;  // 0-based index of the largest term
  double max_value = 0.0;
  bool satisfied = false;  // max_value < 1
  std::string r0_note;
};

// The four-term maximum of the r0 -> 0 sufficient condition; the state is
// intended to be a stationary point but this is not enforced.
GCorrReport gcorr_condition(const VariationalState& state_star,
                            const DataMatrix& data, const Hyper& hyper);

// Randomized verification of the stand-alone matrix inequalities: minimax
// (lmin(AB) <= lmin(A) lmax(B)), the trace-quadratic lower bound
// (tr(A^-1 B) + tr(B^-1 A) - 2k >= ||A-B||^2 / (lmax(A) lmax(B))),
// Cauchy-Schwarz for traces (|tr(AB)| <= ||A|| ||B||), the psi-level-set
// bracket (l_c in (e^{-(1+c)}, e^{-c})), and the norm sandwich
// (||A||/sqrt(d) <= ||A||_op <= ||A||). PD inputs are M'M + 0.1 I with
// standard-normal M. Failures are recorded, not thrown.
struct AuxInequalityReport {
  struct Suite {
    std::string name;
    long trials = 0;
    long passes = 0;
    std::vector<std::string> failures;  // one formatted counterexample each
    bool ok() const { return passes == trials; }
  };
  std::vector<Suite> suites;
  bool all_ok() const;
};

AuxInequalityReport check_aux_inequalities(long trials, int dim,
                                           std::uint64_t seed);

// Left endpoint of {x : x - 1 - log x <= c}, solved by bisection on
// (e^{-(1+c)}, 1) to 1e-12.
double psi_level_left_endpoint(double c);

}  // namespace bpca
