#include "bpca/stationary.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace bpca {
namespace {

double spd_logdet_or_throw(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw std::runtime_error(what);
  return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

bool is_pd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

// Upper-triangle coordinates -> symmetric matrix and back.
Eigen::MatrixXd tri_to_sym(const Eigen::VectorXd& v, int k) {
  Eigen::MatrixXd m(k, k);
  int idx = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      m(i, j) = v(idx);
      m(j, i) = v(idx);
      ++idx;
    }
  return m;
}

Eigen::VectorXd sym_to_tri(const Eigen::MatrixXd& m) {
  const int k = static_cast<int>(m.rows());
  Eigen::VectorXd v(k * (k + 1) / 2);
  int idx = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) v(idx++) = m(i, j);
  return v;
}

// Gradient of a trace function with respect to the upper-triangle
// coordinates of a symmetric argument: each off-diagonal coordinate stands
// for two matrix entries.
Eigen::VectorXd sym_grad_to_tri(const Eigen::MatrixXd& g) {
  const int k = static_cast<int>(g.rows());
  Eigen::VectorXd v(k * (k + 1) / 2);
  int idx = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j)
      v(idx++) = i == j ? g(i, i) : g(i, j) + g(j, i);
  return v;
}

}  // namespace

Eigen::VectorXd FlatLayout::pack(const VariationalState& state) const {
  if (state.q_w.mean.rows() != d || state.q_w.mean.cols() != k ||
      state.q_z.mean.rows() != n || state.q_z.mean.cols() != k ||
      state.q_w.row_cov.rows() != k || state.q_z.row_cov.rows() != k)
    throw std::invalid_argument("FlatLayout: state does not match layout");
  Eigen::VectorXd theta(size());
  int off = 0;
  for (int i = 0; i < d; ++i)
    for (int c = 0; c < k; ++c) theta(off++) = state.q_w.mean(i, c);
  theta.segment(off, tri()) = sym_to_tri(state.q_w.row_cov);
  off += tri();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) theta(off++) = state.q_z.mean(i, c);
  theta.segment(off, tri()) = sym_to_tri(state.q_z.row_cov);
  return theta;
}

VariationalState FlatLayout::unpack(const Eigen::VectorXd& theta,
                                    bool check_pd) const {
  if (theta.size() != size())
    throw std::invalid_argument("FlatLayout: theta has wrong length");
  VariationalState state;
  int off = 0;
  state.q_w.mean.resize(d, k);
  for (int i = 0; i < d; ++i)
    for (int c = 0; c < k; ++c) state.q_w.mean(i, c) = theta(off++);
  state.q_w.row_cov = tri_to_sym(theta.segment(off, tri()), k);
  off += tri();
  state.q_z.mean.resize(n, k);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) state.q_z.mean(i, c) = theta(off++);
  state.q_z.row_cov = tri_to_sym(theta.segment(off, tri()), k);
  if (check_pd && (!is_pd(state.q_w.row_cov) || !is_pd(state.q_z.row_cov)))
    throw std::runtime_error("FlatLayout: unpacked covariance not PD");
  return state;
}

bool FlatLayout::unpack_is_pd(const Eigen::VectorXd& theta) const {
  const VariationalState state = unpack(theta, false);
  return is_pd(state.q_w.row_cov) && is_pd(state.q_z.row_cov);
}

FlatLayout layout_for(const Hyper& hyper) {
  return {hyper.n, hyper.d, hyper.k};
}

double psi_loss(const VariationalState& state, const DataMatrix& data,
                const Hyper& hyper) {
  const auto& mu_w = state.q_w.mean;
  const auto& mu_z = state.q_z.mean;
  const auto& sw = state.q_w.row_cov;
  const auto& sz = state.q_z.row_cov;
  const Eigen::MatrixXd lam = hyper.lambda();
  const double n = hyper.n, d = hyper.d, tau0 = hyper.tau0;

  const Eigen::MatrixXd resid = data.x - mu_z * mu_w.transpose();
  return 0.5 * tau0 * resid.squaredNorm() +
         0.5 * (mu_w * lam * mu_w.transpose()).trace() +
         0.5 * mu_z.squaredNorm() + 0.5 * d * (lam * sw).trace() +
         0.5 * n * sz.trace() + 0.5 * tau0 * d * n * (sw * sz).trace() +
         0.5 * tau0 * d * (sw * (mu_z.transpose() * mu_z)).trace() +
         0.5 * tau0 * n * ((mu_w.transpose() * mu_w) * sz).trace() -
         0.5 * d * spd_logdet_or_throw(sw, "psi_loss: Sigma_W not PD") -
         0.5 * n * spd_logdet_or_throw(sz, "psi_loss: Sigma_Z not PD");
}

double psi_coercive_lower_bound(const VariationalState& state,
                                const Hyper& hyper) {
  const double lam_min = hyper.lambda_diag.minCoeff();
  const double n = hyper.n, d = hyper.d;
  const auto& sw = state.q_w.row_cov;
  const auto& sz = state.q_z.row_cov;
  return 0.5 * lam_min * state.q_w.mean.squaredNorm() +
         0.5 * state.q_z.mean.squaredNorm() +
         0.5 * (d * lam_min * sw.trace() -
                d * spd_logdet_or_throw(sw, "coercive bound: Sigma_W not PD")) +
         0.5 * (n * sz.trace() -
                n * spd_logdet_or_throw(sz, "coercive bound: Sigma_Z not PD"));
}

Eigen::VectorXd psi_gradient(const Eigen::VectorXd& theta,
                             const DataMatrix& data, const Hyper& hyper) {
  const FlatLayout layout = layout_for(hyper);
  const VariationalState state = layout.unpack(theta);
  const auto& mu_w = state.q_w.mean;
  const auto& mu_z = state.q_z.mean;
  const auto& sw = state.q_w.row_cov;
  const auto& sz = state.q_z.row_cov;
  const Eigen::MatrixXd lam = hyper.lambda();
  const double n = hyper.n, d = hyper.d, tau0 = hyper.tau0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(hyper.k, hyper.k);

  const Eigen::MatrixXd resid = data.x - mu_z * mu_w.transpose();
  const Eigen::MatrixXd sw_inv =
      Eigen::LLT<Eigen::MatrixXd>(sw).solve(eye);
  const Eigen::MatrixXd sz_inv =
      Eigen::LLT<Eigen::MatrixXd>(sz).solve(eye);

  const Eigen::MatrixXd g_mu_w =
      -tau0 * resid.transpose() * mu_z + mu_w * lam + tau0 * n * mu_w * sz;
  const Eigen::MatrixXd g_mu_z =
      -tau0 * resid * mu_w + mu_z + tau0 * d * mu_z * sw;
  const Eigen::MatrixXd g_sw =
      0.5 * d * lam + 0.5 * tau0 * d * n * sz +
      0.5 * tau0 * d * (mu_z.transpose() * mu_z) - 0.5 * d * sw_inv;
  const Eigen::MatrixXd g_sz =
      0.5 * n * eye + 0.5 * tau0 * d * n * sw +
      0.5 * tau0 * n * (mu_w.transpose() * mu_w) - 0.5 * n * sz_inv;

  Eigen::VectorXd grad(layout.size());
  int off = 0;
  for (int i = 0; i < hyper.d; ++i)
    for (int c = 0; c < hyper.k; ++c) grad(off++) = g_mu_w(i, c);
  grad.segment(off, layout.tri()) = sym_grad_to_tri(symmetrize(g_sw));
  off += layout.tri();
  for (int i = 0; i < hyper.n; ++i)
    for (int c = 0; c < hyper.k; ++c) grad(off++) = g_mu_z(i, c);
  grad.segment(off, layout.tri()) = sym_grad_to_tri(symmetrize(g_sz));
  return grad;
}

Eigen::MatrixXd psi_hessian_fd(const Eigen::VectorXd& theta,
                               const DataMatrix& data, const Hyper& hyper,
                               double h0) {
  const int p = static_cast<int>(theta.size());
  Eigen::MatrixXd h(p, p);
  for (int i = 0; i < p; ++i) {
    const double step = h0 * (1.0 + std::abs(theta(i)));
    Eigen::VectorXd plus = theta, minus = theta;
    plus(i) += step;
    minus(i) -= step;
    h.col(i) = (psi_gradient(plus, data, hyper) -
                psi_gradient(minus, data, hyper)) /
               (2.0 * step);
  }
  Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  if (!sym.allFinite())
    throw std::runtime_error("psi_hessian_fd: non-finite entries");
  return sym;
}

HessianReport hessian_spectrum(const VariationalState& state,
                               const DataMatrix& data, const Hyper& hyper) {
  const FlatLayout layout = layout_for(hyper);
  const Eigen::VectorXd theta = layout.pack(state);
  const Eigen::MatrixXd h = psi_hessian_fd(theta, data, hyper);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);

  HessianReport report;
  report.eigvals = es.eigenvalues();
  const double max_abs = report.eigvals.cwiseAbs().maxCoeff();
  const double min_abs = report.eigvals.cwiseAbs().minCoeff();
  report.min_abs_over_max_abs = max_abs > 0.0 ? min_abs / max_abs : 0.0;
  report.singular_flag = report.min_abs_over_max_abs < kSingTol;
  report.grad_norm_at_point =
      psi_gradient(theta, data, hyper).cwiseAbs().maxCoeff();
  return report;
}

NewtonResult newton_refine(const VariationalState& start,
                           const DataMatrix& data, const Hyper& hyper,
                           double tol) {
  if (!(tol > 0.0))
    throw std::invalid_argument("newton_refine: tol must be positive");
  const FlatLayout layout = layout_for(hyper);
  Eigen::VectorXd theta = layout.pack(start);

  int iterations = 0;
  constexpr int kMaxNewton = 500;
  for (; iterations < kMaxNewton; ++iterations) {
    const Eigen::VectorXd grad = psi_gradient(theta, data, hyper);
    if (grad.cwiseAbs().maxCoeff() <= tol) break;

    const Eigen::MatrixXd h = psi_hessian_fd(theta, data, hyper, 1e-6);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const Eigen::VectorXd evals = es.eigenvalues();
    const double max_abs = evals.cwiseAbs().maxCoeff();
    // Magnitude-clamped pseudo-inverse: the flat rotation mode (Lambda
    // proportional to I) would otherwise blow the step up.
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(evals.size());
    for (int i = 0; i < evals.size(); ++i) {
      const double mag = std::abs(evals(i));
      if (mag > 1e-12 * max_abs) inv(i) = 1.0 / mag;
    }
    const Eigen::VectorXd step =
        -(es.eigenvectors() *
          (inv.asDiagonal() * (es.eigenvectors().transpose() * grad)));

    const double psi_here =
        psi_loss(layout.unpack(theta), data, hyper);
    // Near stagnation the true decrease can fall below the roundoff of
    // psi itself, so accept anything that does not increase beyond noise.
    const double allowance = 1e-12 * (1.0 + std::abs(psi_here));
    double alpha = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      const Eigen::VectorXd trial = theta + alpha * step;
      if (layout.unpack_is_pd(trial)) {
        const double psi_trial =
            psi_loss(layout.unpack(trial), data, hyper);
        if (std::isfinite(psi_trial) && psi_trial <= psi_here + allowance) {
          theta = trial;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted)
      throw std::runtime_error(
          "newton_refine: line search failed after 60 halvings");
  }

  NewtonResult result;
  result.state = layout.unpack(theta);
  result.report = hessian_spectrum(result.state, data, hyper);
  result.iterations = iterations;
  return result;
}

VariationalState rotate_state(const VariationalState& state,
                              const Eigen::MatrixXd& r) {
  const int k = state.k();
  if (r.rows() != k || r.cols() != k)
    throw std::invalid_argument("rotate_state: R must be k x k");
  const double ortho_err =
      (r.transpose() * r - Eigen::MatrixXd::Identity(k, k))
          .cwiseAbs()
          .maxCoeff();
  if (ortho_err > 1e-10)
    throw std::invalid_argument("rotate_state: R is not orthogonal");
  VariationalState rotated = state;
  rotated.q_w.mean = state.q_w.mean * r;
  rotated.q_w.row_cov = symmetrize(r.transpose() * state.q_w.row_cov * r);
  rotated.q_z.mean = state.q_z.mean * r;
  rotated.q_z.row_cov = symmetrize(r.transpose() * state.q_z.row_cov * r);
  return rotated;
}

Eigen::MatrixXd random_orthogonal(int k, Rng& rng) {
  const Eigen::MatrixXd m = rng.gaussian_matrix(k, k);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fix the sign ambiguity so the distribution is Haar.
  for (int i = 0; i < k; ++i)
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  return q;
}

}  // namespace bpca
