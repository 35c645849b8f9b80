#include "bpca/hyper.hpp"

#include <stdexcept>
#include <string>

namespace bpca {

void Hyper::validate() const {
  if (k < 1 || d < k || n < d)
    throw std::invalid_argument("hyper: need n >= d >= k >= 1, got n=" +
                                std::to_string(n) + " d=" + std::to_string(d) +
                                " k=" + std::to_string(k));
  if (!(tau0 > 0.0))
    throw std::invalid_argument("hyper: tau0 must be positive");
  if (lambda_diag.size() != k)
    throw std::invalid_argument("hyper: lambda_diag must have length k");
  for (int i = 0; i < k; ++i)
    if (!(lambda_diag(i) > 0.0))
      throw std::invalid_argument("hyper: lambda_diag entries must be positive");
}

Hyper make_hyper(int n, int d, int k, double tau0,
                 const Eigen::VectorXd& lambda_diag) {
  Hyper h{n, d, k, tau0, lambda_diag};
  h.validate();
  return h;
}

Hyper make_hyper(int n, int d, int k, double tau0, double lambda) {
  return make_hyper(n, d, k, tau0,
                    Eigen::VectorXd::Constant(k, lambda));
}

}  // namespace bpca
