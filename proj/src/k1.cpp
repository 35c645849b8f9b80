#include "bpca/k1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace bpca {
namespace {

void require_k1(const Hyper& hyper) {
  if (hyper.k != 1)
    throw std::invalid_argument("k1 analysis requires k = 1");
}

double lambda_scalar(const Hyper& hyper) { return hyper.lambda_diag(0); }

}  // namespace

std::pair<Eigen::VectorXd, double> map_f(const Eigen::VectorXd& mu_z,
                                         double sigma_z,
                                         const DataMatrix& data,
                                         const Hyper& hyper) {
  require_k1(hyper);
  if (mu_z.size() != hyper.n)
    throw std::invalid_argument("map_f: mu_z must have length n");
  const double l = hyper.tau0 * (hyper.n * sigma_z + mu_z.squaredNorm()) +
                   lambda_scalar(hyper);
  return {hyper.tau0 * (data.x.transpose() * mu_z) / l, 1.0 / l};
}

std::pair<Eigen::VectorXd, double> map_g(const Eigen::VectorXd& mu_w,
                                         double sigma_w,
                                         const DataMatrix& data,
                                         const Hyper& hyper) {
  require_k1(hyper);
  if (mu_w.size() != hyper.d)
    throw std::invalid_argument("map_g: mu_w must have length d");
  const double m =
      hyper.tau0 * (hyper.d * sigma_w + mu_w.squaredNorm()) + 1.0;
  return {hyper.tau0 * (data.x * mu_w) / m, 1.0 / m};
}

Eigen::VectorXd power_iterate(const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& v0, long t) {
  if (a.rows() != a.cols() || a.rows() != v0.size())
    throw std::invalid_argument("power_iterate: dimension mismatch");
  if (t < 0) throw std::invalid_argument("power_iterate: t must be >= 0");
  const double n0 = v0.norm();
  if (n0 == 0.0) throw std::invalid_argument("power_iterate: v0 = 0");
  Eigen::VectorXd v = v0 / n0;
  for (long i = 0; i < t; ++i) {
    v = a * v;
    const double nrm = v.norm();
    if (nrm == 0.0 || !std::isfinite(nrm))
      throw std::runtime_error(
          "power_iterate: iterate vanished (v0 in the null space)");
    v /= nrm;
  }
  return v;
}

ScalingState map_phi(const ScalingState& s, double lambda1,
                     const Hyper& hyper) {
  require_k1(hyper);
  if (!(lambda1 > 0.0))
    throw std::invalid_argument("map_phi: lambda1 must be positive");
  const double tau0 = hyper.tau0;
  const double lam = lambda_scalar(hyper);
  const double l = tau0 * (hyper.n * s.b + s.a * s.a) + lam;
  const double den =
      hyper.d * tau0 * l + tau0 * tau0 * tau0 * s.a * s.a * lambda1 + l * l;
  return {tau0 * tau0 * s.a * l * lambda1 / den, l * l / den};
}

Eigen::Matrix2d jacobian_phi(const ScalingState& s, double lambda1,
                             const Hyper& hyper) {
  Eigen::Matrix2d j;
  const double base[2] = {s.a, s.b};
  for (int c = 0; c < 2; ++c) {
    const double h = 1e-6 * std::max(1.0, std::abs(base[c]));
    ScalingState plus = s, minus = s;
    (c == 0 ? plus.a : plus.b) += h;
    (c == 0 ? minus.a : minus.b) -= h;
    const ScalingState fp = map_phi(plus, lambda1, hyper);
    const ScalingState fm = map_phi(minus, lambda1, hyper);
    if (!std::isfinite(fp.a) || !std::isfinite(fp.b) || !std::isfinite(fm.a) ||
        !std::isfinite(fm.b))
      throw std::runtime_error("jacobian_phi: non-finite Phi evaluation");
    j(0, c) = (fp.a - fm.a) / (2.0 * h);
    j(1, c) = (fp.b - fm.b) / (2.0 * h);
  }
  return j;
}

std::array<double, 2> jacobian_eig_magnitudes(const Eigen::Matrix2d& j) {
  const Eigen::EigenSolver<Eigen::Matrix2d> es(j);
  std::array<double, 2> mags{std::abs(es.eigenvalues()(0)),
                             std::abs(es.eigenvalues()(1))};
  if (mags[0] < mags[1]) std::swap(mags[0], mags[1]);
  return mags;
}

double elbo_at_scaling(double a, double b, double lambda1,
                       const Hyper& hyper) {
  // Specialize elbo_0 to the state (a mu_1, b) with (mu_W, Sigma_W) =
  // F(a mu_1, b); every X-dependent term collapses onto lambda1 because
  // X' mu_1 = sqrt(lambda1) nu_1.
  const double tau0 = hyper.tau0, n = hyper.n, d = hyper.d;
  const double lam = lambda_scalar(hyper);
  const double l = tau0 * (n * b + a * a) + lam;
  const double sw = 1.0 / l;
  const double mw_sq = tau0 * tau0 * a * a * lambda1 / (l * l);
  const double data_term = tau0 * tau0 * a * a * lambda1 / l;
  const double gw = d * sw + mw_sq;
  const double gz = n * b + a * a;
  return data_term - 0.5 * tau0 * gw * gz - 0.5 * d * lam * sw -
         0.5 * lam * mw_sq - 0.5 * gz + 0.5 * d * std::log(sw) +
         0.5 * n * std::log(b);
}

FixedPointReport solve_fixed_points(double lambda1, const Hyper& hyper) {
  require_k1(hyper);
  if (!(lambda1 > 0.0))
    throw std::invalid_argument("solve_fixed_points: lambda1 must be positive");
  const double tau0 = hyper.tau0, n = hyper.n, d = hyper.d;
  const double lam = lambda_scalar(hyper);

  FixedPointReport report;
  const double c2 = lambda1 * tau0 * tau0;
  const double c1 =
      tau0 * (2.0 * lambda1 * lam +
              (d - lambda1 * tau0) * (lambda1 * tau0 - n) +
              (lambda1 * tau0 - n) * (lambda1 * tau0 - n));
  const double c0 =
      lambda1 * lam * lam + (d - lambda1 * tau0) * (lambda1 * tau0 - n) * lam;
  report.poly_coeffs = {c2, c1, c0};

  // Citardauq: q = -(c1 + sgn(c1) sqrt(disc)) / 2, roots q/c2 and c0/q.
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (c1 + (c1 >= 0.0 ? sq : -sq));
    std::vector<double> roots;
    if (q != 0.0) {
      roots.push_back(q / c2);
      roots.push_back(c0 / q);
    } else {
      roots.push_back(0.0);  // c1 = 0 and disc = 0 force a double root at 0
    }
    for (double u : roots)
      if (u > 0.0) report.positive_roots_u.push_back(u);
    std::sort(report.positive_roots_u.begin(), report.positive_roots_u.end(),
              std::greater<>());
    report.positive_roots_u.erase(
        std::unique(report.positive_roots_u.begin(),
                    report.positive_roots_u.end()),
        report.positive_roots_u.end());
  }

  const double b_denominator = tau0 * tau0 * lambda1 - n * tau0;
  for (double u : report.positive_roots_u) {
    if (b_denominator == 0.0) continue;  // b* undefined, candidate rejected
    FixedPointCandidate cand;
    cand.a = std::sqrt(u);
    cand.b = (lam + tau0 * u) / b_denominator;
    if (!(cand.b > 0.0)) continue;
    const ScalingState image = map_phi({cand.a, cand.b}, lambda1, hyper);
    const double err = std::max(
        std::abs(image.a - cand.a) / std::max(1.0, std::abs(cand.a)),
        std::abs(image.b - cand.b) / std::max(1.0, std::abs(cand.b)));
    cand.verified = err <= kFixedPointTol;
    cand.jacobian_eig_mags = jacobian_eig_magnitudes(
        jacobian_phi({cand.a, cand.b}, lambda1, hyper));
    cand.elbo = elbo_at_scaling(cand.a, cand.b, lambda1, hyper);
    report.candidates.push_back(cand);
  }

  // Interval (alpha, beta) outside which the constant term of P is negative.
  const double s = lam + (d + n) * tau0;
  const double interval_disc = s * s - 4.0 * tau0 * tau0 * d * n;
  if (interval_disc >= 0.0) {
    const double sq = std::sqrt(interval_disc);
    report.alpha_beta = {{(s - sq) / (2.0 * tau0 * tau0),
                          (s + sq) / (2.0 * tau0 * tau0)}};
  } else {
    report.alpha_beta_complex = true;
  }

  report.status = report.candidates.empty()
                      ? "no fixed point; CAVI does not converge"
                      : "ok";
  return report;
}

RateBoundReport direction_rate_report(const SpectralDecomposition& spectral,
                                      const Eigen::VectorXd& mu_z0,
                                      const Hyper& hyper) {
  const int n = spectral.n();
  const int d = spectral.d();
  if (mu_z0.size() != n)
    throw std::invalid_argument("direction_rate_report: mu_z0 length != n");
  const double c_tol = 1e-12 * mu_z0.norm();
  if (mu_z0.norm() == 0.0)
    throw std::invalid_argument("direction_rate_report: mu_z0 = 0");

  RateBoundReport report;
  report.coeffs = spectral.eigvecs_left.transpose() * mu_z0;

  int i_star = -1;
  for (int i = 0; i < n; ++i) {
    if (std::abs(report.coeffs(i)) > c_tol) {
      i_star = i;
      break;
    }
  }
  if (i_star < 0 || i_star >= d - 1)
    throw std::runtime_error(
        "direction_rate_report: first nonzero coefficient is at index >= d-1; "
        "the rate bound hypothesis fails");

  report.i_star = i_star;
  report.rate = spectral.eigvals(i_star + 1) / spectral.eigvals(i_star);
  double cmax = 0.0;
  for (int j = 0; j < d; ++j)
    cmax = std::max(cmax, std::abs(report.coeffs(j)));
  report.c0 = 2.0 * d * cmax / std::abs(report.coeffs(i_star));
  report.c0_prime = report.c0 * hyper.tau0 * std::sqrt(spectral.eigvals(0)) /
                    lambda_scalar(hyper);
  report.sign_i_star = report.coeffs(i_star) >= 0.0 ? +1 : -1;
  return report;
}

std::pair<double, double> direction_error_bound(const RateBoundReport& report,
                                                long t) {
  const double factor = std::pow(report.rate, static_cast<double>(t));
  return {report.c0 * factor, report.c0_prime * factor};
}

double aitken_limit(const std::vector<double>& seq) {
  if (seq.size() < 3) {
    if (seq.empty()) throw std::invalid_argument("aitken_limit: empty");
    return seq.back();
  }
  const double a0 = seq[seq.size() - 3];
  const double a1 = seq[seq.size() - 2];
  const double a2 = seq[seq.size() - 1];
  const double d2 = a2 - 2.0 * a1 + a0;
  const double d1 = a2 - a1;
  // Noise guard: once the second difference falls to rounding scale the
  // correction is meaningless and the last term is already the limit.
  if (std::abs(d2) <= 64.0 * std::numeric_limits<double>::epsilon() *
                          (std::abs(a2) + std::abs(a1) + std::abs(a0)))
    return a2;
  return a2 - d1 * d1 / d2;
}

LinearFit fit_line(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 matched points");
  const int m = static_cast<int>(t.size());
  double tm = 0.0, ym = 0.0;
  for (int i = 0; i < m; ++i) {
    tm += t[i];
    ym += y[i];
  }
  tm /= m;
  ym /= m;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (int i = 0; i < m; ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    sty += (t[i] - tm) * (y[i] - ym);
    syy += (y[i] - ym) * (y[i] - ym);
  }
  LinearFit fit;
  fit.points = m;
  fit.slope = sty / stt;
  fit.intercept = ym - fit.slope * tm;
  double ss_res = 0.0;
  for (int i = 0; i < m; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * t[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace bpca
