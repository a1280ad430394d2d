#include "hsgp/math_util.hpp"

#include <Eigen/Dense>

namespace hsgp {

double digamma(double x) {
  // recurrence into the asymptotic regime, then the standard series
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double x1 = 1.0 / x;
  const double x2 = x1 * x1;
  return r + std::log(x) - 0.5 * x1 -
         x2 * (1.0 / 12.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 / 240.0)));
}

GaussHermite gauss_hermite(int n) {
  // Golub-Welsch on the symmetric Jacobi matrix of the Hermite recurrence.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(i / 2.0);
    j(i, i - 1) = b;
    j(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  const double mu0 = std::sqrt(M_PI);
  GaussHermite gh;
  gh.nodes.resize(n);
  gh.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    gh.nodes[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    gh.weights[i] = mu0 * v * v;
  }
  return gh;
}

}  // namespace hsgp
