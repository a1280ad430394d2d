#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace hsgp {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
inline constexpr double kLogGammaHalf = 0.5723649429247001;  // log Gamma(1/2) = log sqrt(pi)

double digamma(double x);

inline double softplus(double x) {
  return (x > 0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// inverse of softplus; valid for y > 0
inline double softplus_inv(double y) {
  return (y > 30.0) ? y : std::log(std::expm1(y));
}

// Nodes and weights for \int e^{-t^2} f(t) dt with n points.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite gauss_hermite(int n);

}  // namespace hsgp
