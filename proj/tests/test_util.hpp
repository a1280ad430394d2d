#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "hsgp/rng.hpp"

namespace hsgp::testing {

// Marsaglia-Tsang
inline double gamma_sample(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double u = rng.uniform();
    return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    const double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// x ~ InvGamma(shape, rate): x = rate / Gamma(shape, 1)
inline double invgamma_sample(Rng& rng, double shape, double rate) {
  return rate / gamma_sample(rng, shape);
}

inline double invgamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

inline double lognormal_logpdf(double x, double mu, double sigma) {
  const double z = (std::log(x) - mu) / sigma;
  return -std::log(x) - std::log(sigma) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Eigen::MatrixXd random_psd(Rng& rng, int n, double scale = 1.0) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return scale * (a * a.transpose()) / n + 1e-8 * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double lo = -2.0,
                                     double hi = 2.0) {
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = lo + (hi - lo) * rng.uniform();
  return x;
}

inline Eigen::VectorXd random_vector(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace hsgp::testing
