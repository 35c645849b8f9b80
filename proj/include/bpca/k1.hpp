#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "bpca/cavi.hpp"
#include "bpca/spectral.hpp"

namespace bpca {

// Everything in this header assumes k = 1: the variational means are
// vectors and the row covariances are positive scalars.

struct ScalingState {
  double a = 0.0;  // ||mu_Z||
  double b = 0.0;  // Sigma_Z
};

inline constexpr double kFixedPointTol = 1e-8;  // relative closure tolerance

// F(mu_Z, Sigma_Z) = (tau0 X' mu_Z / L, 1 / L),
// L = tau0 (n Sigma_Z + ||mu_Z||^2) + Lambda.
std::pair<Eigen::VectorXd, double> map_f(const Eigen::VectorXd& mu_z,
                                         double sigma_z,
                                         const DataMatrix& data,
                                         const Hyper& hyper);

// G(mu_W, Sigma_W) = (tau0 X mu_W / M, 1 / M),
// M = tau0 (d Sigma_W + ||mu_W||^2) + 1.
std::pair<Eigen::VectorXd, double> map_g(const Eigen::VectorXd& mu_w,
                                         double sigma_w,
                                         const DataMatrix& data,
                                         const Hyper& hyper);

// A^t v0 / ||A^t v0|| by repeated multiply-and-normalize. Throws if the
// iterate lands in the null space.
Eigen::VectorXd power_iterate(const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& v0, long t);

// Scaling dynamics along the top eigendirection:
// Phi(a, b) = (tau0^2 a L lam1 / D, L^2 / D),
// L = tau0 (n b + a^2) + Lambda,  D = d tau0 L + tau0^3 a^2 lam1 + L^2.
ScalingState map_phi(const ScalingState& s, double lambda1,
                     const Hyper& hyper);

// Central finite-difference Jacobian of Phi, step 1e-6 * max(1, |coord|).
Eigen::Matrix2d jacobian_phi(const ScalingState& s, double lambda1,
                             const Hyper& hyper);
std::array<double, 2> jacobian_eig_magnitudes(const Eigen::Matrix2d& j);

struct FixedPointCandidate {
  double a = 0.0;
  double b = 0.0;
  bool verified = false;
  std::array<double, 2> jacobian_eig_mags{0.0, 0.0};
  double elbo = 0.0;  // elbo_0 of the full state the candidate induces
};

struct FixedPointReport {
  std::array<double, 3> poly_coeffs{0.0, 0.0, 0.0};  // c2, c1, c0 of P(u)
  std::vector<double> positive_roots_u;
  std::vector<FixedPointCandidate> candidates;
  std::optional<std::pair<double, double>> alpha_beta;
  bool alpha_beta_complex = false;
  std::string status;  // "ok" or "no fixed point; CAVI does not converge"
};

// Fixed-point characterization: P(u) = c2 u^2 + c1 u + c0 with
//   c2 = lam1 tau0^2,
//   c1 = tau0 [2 lam1 Lambda + (d - lam1 tau0)(lam1 tau0 - n)
//              + (lam1 tau0 - n)^2],
//   c0 = lam1 Lambda^2 + (d - lam1 tau0)(lam1 tau0 - n) Lambda,
// a* = sqrt(u) for each positive root and
// b* = (Lambda + tau0 u) / (tau0^2 lam1 - n tau0).
// Roots use the citardauq form; the coefficients span ten orders of
// magnitude at the scales of interest and the naive formula cancels.
FixedPointReport solve_fixed_points(double lambda1, const Hyper& hyper);

// elbo_0 of the state (a mu_1, b, F(a mu_1, b)) as a function of
// (a, b, lam1) alone; used to rank candidates.
double elbo_at_scaling(double a, double b, double lambda1, const Hyper& hyper);

struct RateBoundReport {
  int i_star = 0;          // first index with |c_i| > c_tol (0-based)
  double rate = 0.0;       // 1 - rho_i/lambda_i = lambda_{i+1}/lambda_i
  double c0 = 0.0;         // 2 d max_j |c_j| / |c_i*|
  double c0_prime = 0.0;   // c0 tau0 sqrt(lam1) / Lambda
  Eigen::VectorXd coeffs;  // c_j = mu_j' mu_Z0, j = 1..n
  int sign_i_star = +1;    // sgn(c_i*)
};

// Directional-rate constants for a given initialization. Throws when every
// coefficient up to index d-1 is below c_tol = 1e-12 ||mu_z0|| or when the
// first nonzero one is the last positive eigenvalue (the theorem needs
// i* < d).
RateBoundReport direction_rate_report(const SpectralDecomposition& spectral,
                                      const Eigen::VectorXd& mu_z0,
                                      const Hyper& hyper);

// Bounds c0 r^t and c0' r^t for t >= 2.
std::pair<double, double> direction_error_bound(const RateBoundReport& report,
                                                long t);

// Limit of a linearly converging scalar sequence estimated from its last
// three terms (Aitken delta-squared); falls back to the last term when the
// second difference is at noise level.
double aitken_limit(const std::vector<double>& seq);

// Least-squares fit of y against t; r2 is the usual coefficient of
// determination.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};
LinearFit fit_line(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace bpca
