#include "bpca/cavi.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace bpca {
namespace {

// Inverse of an SPD matrix via Cholesky, re-symmetrized to suppress drift.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("cavi: update matrix not positive definite");
  Eigen::MatrixXd inv =
      llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return symmetrize(inv);
}

double spd_logdet(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("cavi: logdet of a non-PD matrix");
  return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

void check_dims(const VariationalState& state, const DataMatrix& data,
                const Hyper& hyper) {
  if (state.q_w.rows() != hyper.d || state.q_z.rows() != hyper.n ||
      state.k() != hyper.k || data.x.rows() != hyper.n ||
      data.x.cols() != hyper.d)
    throw std::invalid_argument("cavi: state/data dimensions mismatch hyper");
}

}  // namespace

void CaviConfig::validate(const Hyper& hyper) const {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("CaviConfig: epsilon must be positive");
  if (max_iters < 1)
    throw std::invalid_argument("CaviConfig: max_iters must be positive");
  if (mu_z0.rows() != hyper.n || mu_z0.cols() != hyper.k)
    throw std::invalid_argument("CaviConfig: mu_z0 must be n x k");
  if (mu_z0.norm() == 0.0)
    throw std::invalid_argument(
        "CaviConfig: mu_z0 = 0 yields the trivial fixed point and is "
        "rejected");
  MatrixNormal probe{mu_z0, sigma_z0};
  probe.validate();
}

CaviConfig default_cavi_config(const Hyper& hyper) {
  CaviConfig config;
  config.mu_z0 = Eigen::MatrixXd::Constant(hyper.n, hyper.k, 0.1);
  config.sigma_z0 = Eigen::MatrixXd::Identity(hyper.k, hyper.k);
  return config;
}

VariationalState update_w(const VariationalState& state,
                          const DataMatrix& data, const Hyper& hyper) {
  check_dims(state, data, hyper);
  const double n = hyper.n;
  const Eigen::MatrixXd precision =
      hyper.tau0 * (n * state.q_z.row_cov +
                    state.q_z.mean.transpose() * state.q_z.mean) +
      Eigen::MatrixXd(hyper.lambda_diag.asDiagonal());
  VariationalState next = state;
  next.q_w.row_cov = spd_inverse(precision);
  next.q_w.mean =
      hyper.tau0 * (data.x.transpose() * state.q_z.mean) * next.q_w.row_cov;
  return next;
}

VariationalState update_z(const VariationalState& state,
                          const DataMatrix& data, const Hyper& hyper) {
  check_dims(state, data, hyper);
  const double d = hyper.d;
  const Eigen::MatrixXd precision =
      hyper.tau0 * (d * state.q_w.row_cov +
                    state.q_w.mean.transpose() * state.q_w.mean) +
      Eigen::MatrixXd::Identity(hyper.k, hyper.k);
  VariationalState next = state;
  next.q_z.row_cov = spd_inverse(precision);
  next.q_z.mean =
      hyper.tau0 * (data.x * state.q_w.mean) * next.q_z.row_cov;
  return next;
}

double elbo_0(const VariationalState& state, const DataMatrix& data,
              const Hyper& hyper) {
  check_dims(state, data, hyper);
  const auto [gamma_w, gamma_z] = moment_summary(state);
  const auto& mu_w = state.q_w.mean;
  const auto& mu_z = state.q_z.mean;
  const Eigen::MatrixXd lam = hyper.lambda();
  const double d = hyper.d, n = hyper.n, tau0 = hyper.tau0;

  return tau0 * (mu_w * (mu_z.transpose() * data.x)).trace() -
         0.5 * tau0 * (gamma_w * gamma_z).trace() -
         0.5 * d * (lam * state.q_w.row_cov).trace() -
         0.5 * (mu_w * lam * mu_w.transpose()).trace() -
         0.5 * gamma_z.trace() + 0.5 * d * spd_logdet(state.q_w.row_cov) +
         0.5 * n * spd_logdet(state.q_z.row_cov);
}

std::pair<VariationalState, TraceLog> run_cavi(const DataMatrix& data,
                                               const Hyper& hyper,
                                               const CaviConfig& config) {
  hyper.validate();
  config.validate(hyper);

  VariationalState state;
  state.q_z = MatrixNormal{config.mu_z0, config.sigma_z0};
  // q_w placeholder; the first half-sweep overwrites it.
  state.q_w = MatrixNormal{Eigen::MatrixXd::Zero(hyper.d, hyper.k),
                           Eigen::MatrixXd::Identity(hyper.k, hyper.k)};

  TraceLog trace;
  trace.entries.reserve(256);
  double prev_elbo = 0.0;
  bool have_prev = false;

  for (long t = 1; t <= config.max_iters; ++t) {
    state = update_w(state, data, hyper);
    state = update_z(state, data, hyper);

    const double elbo = elbo_0(state, data, hyper);
    if (!std::isfinite(elbo))
      throw std::runtime_error("run_cavi: ELBO became non-finite at sweep " +
                               std::to_string(t));
    const double delta_rel =
        have_prev ? (elbo - prev_elbo) / (std::abs(prev_elbo) + 1.0) : 0.0;

    trace.entries.push_back({t, elbo, delta_rel, state.q_z.mean.norm(),
                             state.q_w.mean.norm(), state.q_z.row_cov.norm(),
                             state.q_w.row_cov.norm()});
    if (config.record_states) trace.states.push_back(state);
    trace.total_sweeps = t;

    if (have_prev && delta_rel <= config.epsilon) {
      trace.status = TraceLog::Status::converged;
      return {state, trace};
    }
    prev_elbo = elbo;
    have_prev = true;
  }
  trace.status = TraceLog::Status::max_iters;
  return {state, trace};
}

VariationalState make_state(const Hyper& hyper, const Eigen::MatrixXd& mu_w,
                            const Eigen::MatrixXd& sigma_w,
                            const Eigen::MatrixXd& mu_z,
                            const Eigen::MatrixXd& sigma_z) {
  VariationalState state{{mu_w, sigma_w}, {mu_z, sigma_z}};
  state.validate();
  if (state.q_w.rows() != hyper.d || state.q_z.rows() != hyper.n ||
      state.k() != hyper.k)
    throw std::invalid_argument("make_state: dimensions mismatch hyper");
  return state;
}

}  // namespace bpca
