#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "bpca/cavi.hpp"
#include "bpca/io.hpp"
#include "bpca/k1.hpp"
#include "bpca/rng.hpp"

using namespace bpca;

namespace {

VariationalState random_state(const Hyper& hyper, Rng& rng,
                              double cov_scale = 1.0) {
  auto spd = [&](int k) {
    const Eigen::MatrixXd m = rng.gaussian_matrix(k, k);
    return Eigen::MatrixXd(cov_scale * (m.transpose() * m) +
                           0.1 * cov_scale *
                               Eigen::MatrixXd::Identity(k, k));
  };
  return {{rng.gaussian_matrix(hyper.d, hyper.k), spd(hyper.k)},
          {rng.gaussian_matrix(hyper.n, hyper.k), spd(hyper.k)}};
}

DataMatrix scalar_data(double value) {
  DataMatrix data;
  data.x = Eigen::MatrixXd::Constant(1, 1, value);
  return data;
}

VariationalState scalar_state(double mu_w, double sw, double mu_z, double sz) {
  auto m = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
  return {{m(mu_w), m(sw)}, {m(mu_z), m(sz)}};
}

}  // namespace

TEST_CASE("MatrixNormal validation") {
  MatrixNormal ok{Eigen::MatrixXd::Zero(3, 2),
                  Eigen::MatrixXd::Identity(2, 2)};
  CHECK_NOTHROW(ok.validate());

  MatrixNormal asym = ok;
  asym.row_cov(0, 1) = 1e-6;  // asymmetric beyond the 1e-12 allowance
  CHECK_THROWS_AS(asym.validate(), std::invalid_argument);

  MatrixNormal indefinite = ok;
  indefinite.row_cov(0, 0) = -1.0;
  CHECK_THROWS_AS(indefinite.validate(), std::invalid_argument);

  MatrixNormal wrong_shape{Eigen::MatrixXd::Zero(3, 2),
                           Eigen::MatrixXd::Identity(3, 3)};
  CHECK_THROWS_AS(wrong_shape.validate(), std::invalid_argument);
}

TEST_CASE("update_w with zero mu_Z kills the data term") {
  const Hyper hyper = make_hyper(2, 1, 1, 1.0);
  DataMatrix data;
  data.x = Eigen::MatrixXd::Random(2, 1);
  VariationalState state{{Eigen::MatrixXd::Zero(1, 1),
                          Eigen::MatrixXd::Identity(1, 1)},
                         {Eigen::MatrixXd::Zero(2, 1),
                          Eigen::MatrixXd::Identity(1, 1)}};
  const VariationalState next = update_w(state, data, hyper);
  CHECK(next.q_w.row_cov(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(next.q_w.mean.norm() == 0.0);
  CHECK(next.q_z.mean == state.q_z.mean);  // q_z untouched
}

TEST_CASE("scalar sweep matches the hand-evaluated Algorithm-1 formulas") {
  const Hyper hyper = make_hyper(1, 1, 1, 1.0);
  const DataMatrix data = scalar_data(2.0);
  VariationalState state = scalar_state(0.0, 1.0, 1.0, 1.0);

  const VariationalState after_w = update_w(state, data, hyper);
  CHECK(after_w.q_w.row_cov(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(after_w.q_w.mean(0, 0) == doctest::Approx(2.0 / 3.0));

  const VariationalState after_z = update_z(after_w, data, hyper);
  CHECK(after_z.q_z.row_cov(0, 0) == doctest::Approx(9.0 / 16.0));
  CHECK(after_z.q_z.mean(0, 0) == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("update covariances satisfy the definitional round-trip") {
  Rng rng(31);
  for (int k : {1, 2, 3}) {
    const Hyper hyper =
        make_hyper(8, 4, k, 2.0,
                   Eigen::VectorXd::LinSpaced(k, 1.0, 1.0 + 0.5 * (k - 1)));
    DataMatrix data;
    data.x = rng.gaussian_matrix(8, 4);
    const VariationalState state = random_state(hyper, rng);

    const VariationalState after_w = update_w(state, data, hyper);
    const Eigen::MatrixXd lhs_w =
        after_w.q_w.row_cov.llt().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd rhs_w =
        hyper.tau0 * (8.0 * state.q_z.row_cov +
                      state.q_z.mean.transpose() * state.q_z.mean) +
        hyper.lambda();
    CHECK((lhs_w - rhs_w).norm() <= 1e-10 * rhs_w.norm());

    const VariationalState after_z = update_z(after_w, data, hyper);
    const Eigen::MatrixXd lhs_z =
        after_z.q_z.row_cov.llt().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd rhs_z =
        hyper.tau0 * (4.0 * after_w.q_w.row_cov +
                      after_w.q_w.mean.transpose() * after_w.q_w.mean) +
        Eigen::MatrixXd::Identity(k, k);
    CHECK((lhs_z - rhs_z).norm() <= 1e-10 * rhs_z.norm());
  }
}

TEST_CASE("elbo_0 hand value at the origin-like scalar state") {
  const Hyper hyper = make_hyper(1, 1, 1, 1.0);
  const DataMatrix data = scalar_data(0.0);
  const VariationalState state = scalar_state(0.0, 1.0, 0.0, 1.0);
  CHECK(elbo_0(state, data, hyper) == doctest::Approx(-1.5));
}

TEST_CASE("one sweep never decreases elbo_0") {
  Rng rng(43);
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 1 + static_cast<int>(rng.raw() % 3);
    const Hyper hyper = make_hyper(10, 5, k, 1.5,
                                   Eigen::VectorXd::Constant(k, 0.8));
    DataMatrix data;
    data.x = rng.gaussian_matrix(10, 5);
    const VariationalState state = random_state(hyper, rng);
    const double before = elbo_0(state, data, hyper);
    const VariationalState swept =
        update_z(update_w(state, data, hyper), data, hyper);
    const double after = elbo_0(swept, data, hyper);
    CHECK(after >= before - 1e-10 * (1.0 + std::abs(before)));
  }
}

TEST_CASE("update_w is block-optimal: perturbations never help") {
  Rng rng(57);
  const Hyper hyper = make_hyper(8, 4, 2, 2.0, Eigen::Vector2d(1.0, 2.0));
  DataMatrix data;
  data.x = rng.gaussian_matrix(8, 4);
  const VariationalState state = random_state(hyper, rng);
  const VariationalState opt = update_w(state, data, hyper);
  const double best = elbo_0(opt, data, hyper);
  for (int trial = 0; trial < 30; ++trial) {
    VariationalState perturbed = opt;
    perturbed.q_w.mean += 1e-6 * rng.gaussian_matrix(4, 2);
    const Eigen::MatrixXd s = rng.gaussian_matrix(2, 2);
    perturbed.q_w.row_cov += 1e-6 * symmetrize(s);
    CHECK(elbo_0(perturbed, data, hyper) <= best + 1e-12 * (1.0 + std::abs(best)));
  }
}

TEST_CASE("run_cavi rejects mu_Z0 = 0 and rewards valid configs") {
  const Hyper hyper = make_hyper(6, 3, 1, 2.0);
  DataMatrix data;
  data.x = Eigen::MatrixXd::Random(6, 3);
  CaviConfig config = default_cavi_config(hyper);
  config.mu_z0.setZero();
  CHECK_THROWS_AS(run_cavi(data, hyper, config), std::invalid_argument);
}

TEST_CASE("trace elbo is monotone and convergence is reported") {
  Rng rng(3);
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    const Hyper hyper = make_hyper(20, 5, 2, 10.0, Eigen::Vector2d(1.0, 2.0));
    const auto [data, draw] =
        sample_dataset(hyper, Eigen::MatrixXd::Ones(5, 2), seed);
    CaviConfig config = default_cavi_config(hyper);
    config.epsilon = 1e-12;
    config.max_iters = 20000;
    const auto [state, trace] = run_cavi(data, hyper, config);
    CHECK(trace.status == TraceLog::Status::converged);
    for (size_t i = 1; i < trace.entries.size(); ++i) {
      const double prev = trace.entries[i - 1].elbo;
      CHECK(trace.entries[i].elbo >= prev - 1e-10 * (1.0 + std::abs(prev)));
    }
  }
}

TEST_CASE("k=1 updates agree with the F/G maps") {
  Rng rng(77);
  const Hyper hyper = make_hyper(9, 4, 1, 3.0, 1.5);
  DataMatrix data;
  data.x = rng.gaussian_matrix(9, 4);
  for (int trial = 0; trial < 10; ++trial) {
    const VariationalState state = random_state(hyper, rng);
    const auto [mu_w, sigma_w] =
        map_f(state.q_z.mean.col(0), state.q_z.row_cov(0, 0), data, hyper);
    const VariationalState after_w = update_w(state, data, hyper);
    CHECK((after_w.q_w.mean.col(0) - mu_w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(after_w.q_w.row_cov(0, 0) == doctest::Approx(sigma_w).epsilon(1e-12));

    const auto [mu_z, sigma_z] = map_g(mu_w, sigma_w, data, hyper);
    const VariationalState after_z = update_z(after_w, data, hyper);
    CHECK((after_z.q_z.mean.col(0) - mu_z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(after_z.q_z.row_cov(0, 0) == doctest::Approx(sigma_z).epsilon(1e-12));

    // Two applications of G o F equal two full sweeps.
    const auto [mu_w2, sigma_w2] = map_f(mu_z, sigma_z, data, hyper);
    const auto [mu_z2, sigma_z2] = map_g(mu_w2, sigma_w2, data, hyper);
    const VariationalState two_sweeps =
        update_z(update_w(after_z, data, hyper), data, hyper);
    CHECK((two_sweeps.q_z.mean.col(0) - mu_z2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(two_sweeps.q_z.row_cov(0, 0) ==
          doctest::Approx(sigma_z2).epsilon(1e-12));
  }
}

TEST_CASE("CaviConfig JSON parsing") {
  const Hyper hyper = make_hyper(4, 2, 1, 1.0);
  const nlohmann::json j = {
      {"epsilon", 1e-9},
      {"max_iters", 123},
      {"init", {{"mu_z", "random(5)"}, {"sigma_z", "identity"}}}};
  const CaviConfig config = cavi_config_from_json(j, hyper);
  CHECK(config.epsilon == 1e-9);
  CHECK(config.max_iters == 123);
  CHECK(config.mu_z0.rows() == 4);
  CHECK(config.mu_z0.norm() > 0.0);
  CHECK(config.sigma_z0 == Eigen::MatrixXd::Identity(1, 1));

  const nlohmann::json j2 = {{"init", {{"mu_z", 0.1}, {"sigma_z", 2.0}}}};
  const CaviConfig c2 = cavi_config_from_json(j2, hyper);
  CHECK(c2.mu_z0(0, 0) == 0.1);
  CHECK(c2.sigma_z0(0, 0) == 2.0);
  CHECK(c2.epsilon == 1e-15);     // defaults
  CHECK(c2.max_iters == 100000);

  const nlohmann::json bad = {{"init", {{"mu_z", 0.0}}}};
  CHECK_THROWS(cavi_config_from_json(bad, hyper));
}

TEST_CASE("non-finite data aborts with a diagnostic") {
  const Hyper hyper = make_hyper(4, 2, 1, 1.0);
  DataMatrix data;
  data.x = Eigen::MatrixXd::Constant(4, 2,
                                     std::numeric_limits<double>::infinity());
  const CaviConfig config = default_cavi_config(hyper);
  CHECK_THROWS_AS(run_cavi(data, hyper, config), std::runtime_error);
}
