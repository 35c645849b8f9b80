#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bpca/rng.hpp"
#include "bpca/spectral.hpp"

using namespace bpca;

TEST_CASE("diagonal 2x2 case") {
  DataMatrix data;
  data.x = Eigen::MatrixXd::Zero(2, 2);
  data.x(0, 0) = 3.0;
  data.x(1, 1) = 2.0;
  const SpectralDecomposition spectral = spectral_decompose(data);
  CHECK(spectral.eigvals(0) == doctest::Approx(9.0));
  CHECK(spectral.eigvals(1) == doctest::Approx(4.0));
  // Eigenvectors are signed standard basis vectors.
  CHECK(std::abs(spectral.eigvecs_left(0, 0)) == doctest::Approx(1.0));
  CHECK(spectral.eigvecs_left(0, 0) > 0.0);  // sign convention
  CHECK(std::abs(spectral.eigvecs_left(1, 1)) == doctest::Approx(1.0));
  CHECK(spectral.gaps(0) == doctest::Approx(5.0));
}

TEST_CASE("invariants on a simulated dataset") {
  const Hyper hyper = make_hyper(100, 10, 1, 100.0);
  const auto [data, draw] =
      sample_dataset(hyper, Eigen::MatrixXd::Ones(10, 1), 7);
  const SpectralDecomposition spectral = spectral_decompose(data);
  const double lam1 = spectral.eigvals(0);

  // At these dimensions the top eigenvalue sits around 10^3.
  CHECK(lam1 > 300.0);
  CHECK(lam1 < 3000.0);

  const Eigen::MatrixXd xxt = data.x * data.x.transpose();

  SUBCASE("eigenpair residuals") {
    for (int i = 0; i < 10; ++i) {
      const Eigen::VectorXd resid =
          xxt * spectral.eigvecs_left.col(i) -
          spectral.eigvals(i) * spectral.eigvecs_left.col(i);
      CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8 * lam1);
    }
    const Eigen::MatrixXd xtx = data.x.transpose() * data.x;
    for (int i = 0; i < 10; ++i) {
      const Eigen::VectorXd resid =
          xtx * spectral.eigvecs_right.col(i) -
          spectral.eigvals(i) * spectral.eigvecs_right.col(i);
      CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8 * lam1);
    }
  }

  SUBCASE("spectral reconstruction of XX'") {
    Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(100, 100);
    for (int i = 0; i < 100; ++i)
      recon += spectral.eigvals(i) * spectral.eigvecs_left.col(i) *
               spectral.eigvecs_left.col(i).transpose();
    CHECK((xxt - recon).norm() <= 1e-8 * lam1);
  }

  SUBCASE("trace identity") {
    CHECK(spectral.eigvals.sum() ==
          doctest::Approx(data.x.squaredNorm()).epsilon(1e-8));
  }

  SUBCASE("||X' mu_i||^2 = lambda_i and nu_i collinearity") {
    for (int i = 0; i < 10; ++i) {
      const Eigen::VectorXd xt_mu =
          data.x.transpose() * spectral.eigvecs_left.col(i);
      CHECK(xt_mu.squaredNorm() ==
            doctest::Approx(spectral.eigvals(i)).epsilon(1e-8));
      const Eigen::VectorXd nu_hat = xt_mu / xt_mu.norm();
      CHECK((nu_hat - spectral.eigvecs_right.col(i)).norm() < 1e-8);
    }
  }

  SUBCASE("trailing eigenvalues vanish, gaps positive") {
    for (int i = 10; i < 100; ++i) CHECK(spectral.eigvals(i) == 0.0);
    CHECK(spectral.distinct_ok);
    for (int i = 0; i < 9; ++i) CHECK(spectral.gaps(i) > 0.0);
  }

  SUBCASE("decomposition is deterministic") {
    const SpectralDecomposition spectral2 = spectral_decompose(data);
    CHECK(spectral.eigvecs_left == spectral2.eigvecs_left);
    CHECK(spectral.eigvals == spectral2.eigvals);
  }
}

TEST_CASE("sign convention puts the largest-magnitude entry positive") {
  Rng rng(11);
  DataMatrix data;
  data.x = rng.gaussian_matrix(12, 5);
  const SpectralDecomposition spectral = spectral_decompose(data);
  for (int i = 0; i < 12; ++i) {
    Eigen::Index arg = 0;
    spectral.eigvecs_left.col(i).cwiseAbs().maxCoeff(&arg);
    CHECK(spectral.eigvecs_left(arg, i) > 0.0);
  }
}

TEST_CASE("rank deficiency is rejected") {
  DataMatrix data;
  // Rank-1: every column is a multiple of the first.
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(6, 1.0, 6.0);
  data.x = u * Eigen::RowVector3d(1.0, 2.0, 3.0);
  CHECK_THROWS_AS(spectral_decompose(data), std::runtime_error);
}

TEST_CASE("near-tied eigenvalues clear the distinct_ok flag") {
  DataMatrix data;
  data.x = Eigen::MatrixXd::Zero(3, 3);
  data.x(0, 0) = 2.0;
  data.x(1, 1) = 2.0;  // exact tie
  data.x(2, 2) = 1.0;
  const SpectralDecomposition spectral = spectral_decompose(data);
  CHECK_FALSE(spectral.distinct_ok);
}
