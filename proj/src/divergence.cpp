#include "bpca/divergence.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bpca/dataset.hpp"

namespace bpca {
namespace {

double spd_logdet(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("divergence: matrix not positive definite");
  return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("divergence: matrix not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

double op_norm(const Eigen::MatrixXd& spd) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spd);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

double gamma0() { return 0.25 * (1.0 + std::exp(-1.0)); }

double kl_matrix_normal(const MatrixNormal& q, const MatrixNormal& q_star) {
  if (q.rows() != q_star.rows() || q.k() != q_star.k())
    throw std::invalid_argument("kl_matrix_normal: shape mismatch");
  const int k = q.k();
  const double r = static_cast<double>(q.rows());
  const Eigen::MatrixXd star_inv = spd_inverse(q_star.row_cov);
  const double tr_term = (star_inv * q.row_cov).trace();
  const double logdet_ratio =
      spd_logdet(q.row_cov) - spd_logdet(q_star.row_cov);
  const Eigen::MatrixXd diff = q.mean - q_star.mean;
  // (vec diff)' (I (x) S*)^-1 (vec diff) = tr(S*^-1 diff' diff), row-wise.
  const double quad = (star_inv * (diff.transpose() * diff)).trace();
  return 0.5 * (r * (tr_term - k - logdet_ratio) + quad);
}

double sym_kl(const MatrixNormal& q, const MatrixNormal& q_star) {
  return 0.5 * (kl_matrix_normal(q, q_star) + kl_matrix_normal(q_star, q));
}

double kl_lower_bound(const MatrixNormal& q, const MatrixNormal& q_star,
                      double r0) {
  if (!(r0 > 0.0))
    throw std::invalid_argument("kl_lower_bound: r0 must be positive");
  const double r = static_cast<double>(q.rows());
  const double exponent = 1.0 + 2.0 * r0 / r;
  const double c2 = 0.25 * (1.0 + std::exp(-exponent));
  // c3 = 1/4, not the 1/2 sometimes quoted: the symmetric KL averages the
  // two directed divergences, each contributing half of its J term, so the
  // covariance part carries (J1 + J2)/4. With 1/2 the "bound" exceeds the
  // symmetric KL on ~1% of ball-constrained pairs.
  const double c3 = 0.25;
  const double star_fro = q_star.row_cov.norm();
  const double cov_term = r * c3 /
                          (star_fro * star_fro * std::exp(exponent)) *
                          (q.row_cov - q_star.row_cov).squaredNorm();
  const double mean_term =
      c2 / star_fro * (q.mean - q_star.mean).squaredNorm();
  return cov_term + mean_term;
}

KlBallBox kl_ball_box(const MatrixNormal& q_star, double r0) {
  const double r = static_cast<double>(q_star.rows());
  const double e = std::exp(1.0 + 2.0 * r0 / r);
  return {q_star.row_cov.norm() * e, 2.0 * r0 * e * op_norm(q_star.row_cov)};
}

double delta_exact(const VariationalState& state,
                   const VariationalState& state_star, const DataMatrix& data,
                   const Hyper& hyper) {
  if (state.k() != state_star.k() ||
      state.q_w.rows() != state_star.q_w.rows() ||
      state.q_z.rows() != state_star.q_z.rows())
    throw std::invalid_argument("delta_exact: state shape mismatch");
  const auto [gamma_w, gamma_z] = moment_summary(state);
  const auto [gamma_w_star, gamma_z_star] = moment_summary(state_star);
  const Eigen::MatrixXd dmu_w = state.q_w.mean - state_star.q_w.mean;
  const Eigen::MatrixXd dmu_z = state.q_z.mean - state_star.q_z.mean;
  return hyper.tau0 * (dmu_w * (dmu_z.transpose() * data.x)).trace() -
         0.5 * hyper.tau0 *
             ((gamma_w - gamma_w_star) * (gamma_z - gamma_z_star).transpose())
                 .trace();
}

MonteCarloEstimate delta_monte_carlo(const VariationalState& state,
                                     const VariationalState& state_star,
                                     const DataMatrix& data,
                                     const Hyper& hyper, long n_samples,
                                     std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("delta_monte_carlo: n_samples >= 1 required");
  Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n_samples; ++i) {
    const Eigen::MatrixXd w = state.q_w.sample(rng);
    const Eigen::MatrixXd w_star = state_star.q_w.sample(rng);
    const Eigen::MatrixXd z = state.q_z.sample(rng);
    const Eigen::MatrixXd z_star = state_star.q_z.sample(rng);
    const double v = log_posterior_unnorm(w, z, data, hyper) -
                     log_posterior_unnorm(w_star, z, data, hyper) -
                     log_posterior_unnorm(w, z_star, data, hyper) +
                     log_posterior_unnorm(w_star, z_star, data, hyper);
    if (!std::isfinite(v))
      throw std::runtime_error("delta_monte_carlo: non-finite log posterior");
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n_samples;
  const double var =
      n_samples > 1 ? (sum_sq - n_samples * mean * mean) / (n_samples - 1)
                    : 0.0;
  return {mean, std::sqrt(std::max(0.0, var) / n_samples)};
}

double delta_upper_bound(const VariationalState& state,
                         const VariationalState& state_star,
                         const DataMatrix& data, const Hyper& hyper) {
  const double a1 = (state.q_z.mean - state_star.q_z.mean).norm();
  const double a2 = (state.q_w.mean - state_star.q_w.mean).norm();
  const double b1 = (state.q_z.row_cov - state_star.q_z.row_cov).norm();
  const double b2 = (state.q_w.row_cov - state_star.q_w.row_cov).norm();
  const double c1 = state.q_z.mean.norm() + state_star.q_z.mean.norm();
  const double c2 = state.q_w.mean.norm() + state_star.q_w.mean.norm();
  const double n = hyper.n, d = hyper.d, tau0 = hyper.tau0;
  return (tau0 * data.x.norm() + 0.5 * c1 * c2 * tau0) * a1 * a2 +
         0.5 * (n * d * tau0 * b1 * b2 + d * c1 * tau0 * b2 * a1 +
                n * c2 * tau0 * a2 * b1);
}

GCorrReport gcorr_condition(const VariationalState& state_star,
                            const DataMatrix& data, const Hyper& hyper) {
  const double tau0 = hyper.tau0;
  const double n = hyper.n, d = hyper.d;
  const double sw = state_star.q_w.row_cov.norm();
  const double sz = state_star.q_z.row_cov.norm();
  const double mw = state_star.q_w.mean.norm();
  const double mz = state_star.q_z.mean.norm();
  const double g0 = gamma0();
  const double e = std::exp(1.0);

  GCorrReport report;
  report.gamma0 = g0;
  report.terms[0] =
      tau0 * std::sqrt(sw * sz) * (data.x.norm() + 2.0 * mw * mz) / g0;
  report.terms[1] = e * tau0 * (sw * sz) * std::sqrt(n * d);
  report.terms[2] =
      tau0 * sw * std::sqrt(sz) * std::sqrt(2.0 * d * e) * mz / std::sqrt(g0);
  report.terms[3] =
      tau0 * std::sqrt(sw) * sz * std::sqrt(2.0 * n * e) * mw / std::sqrt(g0);
  report.max_index = 0;
  for (int i = 1; i < 4; ++i)
    if (report.terms[i] > report.terms[report.max_index]) report.max_index = i;
  report.max_value = report.terms[report.max_index];
  report.satisfied = report.max_value < 1.0;
  report.r0_note =
      "r0 -> 0 limit form; the finite-r0 constants tend to these values";
  return report;
}

double psi_level_left_endpoint(double c) {
  if (!(c > 0.0))
    throw std::invalid_argument("psi_level_left_endpoint: c must be positive");
  // psi(x) = x - 1 - log x is strictly decreasing on (0, 1), so bisect.
  auto psi = [](double x) { return x - 1.0 - std::log(x); };
  double lo = std::exp(-(1.0 + c));
  double hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (psi(mid) > c ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

bool AuxInequalityReport::all_ok() const {
  for (const auto& suite : suites)
    if (!suite.ok()) return false;
  return true;
}

AuxInequalityReport check_aux_inequalities(long trials, int dim,
                                           std::uint64_t seed) {
  if (trials < 1 || dim < 1)
    throw std::invalid_argument("check_aux_inequalities: bad trials/dim");
  Rng rng(seed);

  auto random_spd = [&](int k) {
    const Eigen::MatrixXd m = rng.gaussian_matrix(k, k);
    return Eigen::MatrixXd(m.transpose() * m +
                           0.1 * Eigen::MatrixXd::Identity(k, k));
  };

  AuxInequalityReport report;
  report.suites.resize(5);
  report.suites[0].name = "eigmin_product";       // lmin(AB) <= lmin(A) lmax(B)
  report.suites[1].name = "trace_quadratic";      // tr(A^-1B)+tr(B^-1A)-2k bound
  report.suites[2].name = "trace_cauchy_schwarz"; // |tr(AB)| <= ||A|| ||B||
  report.suites[3].name = "psi_level_bracket";    // l_c in (e^-(1+c), e^-c)
  report.suites[4].name = "norm_sandwich";        // ||A||/sqrt(d) <= op <= ||A||

  auto record = [&](int s, bool ok, const std::string& detail) {
    auto& suite = report.suites[s];
    ++suite.trials;
    if (ok) {
      ++suite.passes;
    } else if (suite.failures.size() < 8) {
      suite.failures.push_back(detail);
    }
  };

  // Inequality evaluations tolerate rounding at relative 1e-9 scale; the
  // statements are non-strict inequalities.
  const double slack = 1e-9;

  for (long trial = 0; trial < trials; ++trial) {
    const Eigen::MatrixXd a = random_spd(dim);
    const Eigen::MatrixXd b = random_spd(dim);

    {  // lmin(AB) <= lmin(A) lmax(B); AB has real positive spectrum.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(b);
      const Eigen::MatrixXd b_half =
          eb.eigenvectors() *
          eb.eigenvalues().cwiseSqrt().asDiagonal() *
          eb.eigenvectors().transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eab(b_half * a * b_half);
      const double lhs = eab.eigenvalues().minCoeff();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a);
      const double rhs =
          ea.eigenvalues().minCoeff() * eb.eigenvalues().maxCoeff();
      std::ostringstream os;
      os << "trial " << trial << ": lmin(AB)=" << lhs << " > " << rhs;
      record(0, lhs <= rhs * (1.0 + slack), os.str());
    }
    {  // tr(A^-1 B) + tr(B^-1 A) - 2k >= ||A-B||^2/(lmax(A) lmax(B))
      const double lhs = (spd_inverse(a) * b).trace() +
                         (spd_inverse(b) * a).trace() - 2.0 * dim;
      const double rhs = (a - b).squaredNorm() / (op_norm(a) * op_norm(b));
      std::ostringstream os;
      os << "trial " << trial << ": " << lhs << " < " << rhs;
      record(1, lhs >= rhs * (1.0 - slack) - 1e-12, os.str());
    }
    {  // |tr(AB)| <= ||A|| ||B|| with rectangular factors
      const int m = 1 + static_cast<int>(rng.raw() % 4);
      const Eigen::MatrixXd p = rng.gaussian_matrix(dim, m);
      const Eigen::MatrixXd q = rng.gaussian_matrix(m, dim);
      const double lhs = std::abs((p * q).trace());
      const double rhs = p.norm() * q.norm();
      std::ostringstream os;
      os << "trial " << trial << ": |tr(PQ)|=" << lhs << " > " << rhs;
      record(2, lhs <= rhs * (1.0 + slack), os.str());
    }
    {  // l_c strictly inside (e^{-(1+c)}, e^{-c})
      const double c = 0.01 + 5.0 * rng.uniform();
      const double lc = psi_level_left_endpoint(c);
      const bool ok = lc > std::exp(-(1.0 + c)) && lc < std::exp(-c);
      std::ostringstream os;
      os << "trial " << trial << ": c=" << c << " l_c=" << lc;
      record(3, ok, os.str());
    }
    {  // ||A||/sqrt(d) <= ||A||_op <= ||A||
      const double fro = a.norm();
      const double op = op_norm(a);
      const bool ok = fro / std::sqrt(static_cast<double>(dim)) <=
                          op * (1.0 + slack) &&
                      op <= fro * (1.0 + slack);
      std::ostringstream os;
      os << "trial " << trial << ": fro=" << fro << " op=" << op;
      record(4, ok, os.str());
    }
  }
  return report;
}

}  // namespace bpca
