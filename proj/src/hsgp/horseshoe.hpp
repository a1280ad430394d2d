#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "hsgp/ad.hpp"
#include "hsgp/errors.hpp"
#include "hsgp/math_util.hpp"

namespace hsgp::horseshoe {

// Variational state for the Horseshoe weight prior under the double
// inverse-Gamma reparameterization. q(tau^2) and q(lambda_i^2) are
// log-normal; q(phi_tau), q(phi_lambda_i) stay inverse-Gamma with
// parameters (s, r) refreshed in closed form rather than optimized.
struct HorseshoeState {
  double mu_tau = 0.0;
  double sigma_tau = 0.05;
  double s_tau = 1.0;
  double r_tau = 2.0;
  Eigen::VectorXd mu_lambda;
  Eigen::VectorXd sigma_lambda;
  Eigen::VectorXd s_lambda;
  Eigen::VectorXd r_lambda;
  double a_scale = 1.0;
  double b_scale = 1.0;

  int size() const { return static_cast<int>(mu_lambda.size()); }
  void validate() const;
};

// State at the documented defaults; (s, r) already refreshed once.
HorseshoeState init_state(int m, double a_scale = 1.0, double b_scale = 1.0);

// w_i = exp(mu_tau + mu_lambda_i + eps_i (sigma_tau + sigma_lambda_i))
Eigen::VectorXd sample_weights(const HorseshoeState& st, const Eigen::VectorXd& eps);

// Entropy of LogNormal(mu, sigma^2): mu + 0.5 log(2 pi e sigma^2)
double lognormal_entropy(double mu, double sigma);

// (E[x^-1], E[log x]) for x ~ LogNormal(mu, sigma^2)
std::pair<double, double> lognormal_moments(double mu, double sigma);

// (E[log phi], E[phi^-1]) for phi ~ InvGamma(s, r)
std::pair<double, double> invgamma_expectations(double s, double r);

// KL(q(w) || p(w)) over the full set {tau^2, phi_tau, lambda_i^2, phi_lambda_i}
double kl_weights(const HorseshoeState& st);

// Closed-form refresh of the auxiliary factors:
// s <- 1, r <- E[x^-2] + scale^-2. Log-normal factors untouched.
HorseshoeState update_aux(const HorseshoeState& st);

// Reported weights: the log-normal product median exp(mu_tau + mu_lambda_i).
Eigen::VectorXd weight_summary(const HorseshoeState& st);

// ---------------------------------------------------------------------------
// Differentiable KL assembly shared with the trainer. The inverse-Gamma
// parameters enter as plain doubles: they are refreshed outside the
// optimizer and receive no gradient.

template <class S>
S kl_block_t(const S& mu, const S& sigma, double s, double r, double scale) {
  using ad::exp;
  using ad::log;
  using std::exp;
  using std::log;
  const double e_logphi = std::log(r) - digamma(s);
  const double e_phiinv = s / r;
  const S e_inv = exp(-mu + S(0.5) * sigma * sigma);
  const S h_ln = mu + S(0.5) * (log(sigma * sigma) + kLog2Pi + 1.0);
  const S cross_x =
      S(-0.5 * e_logphi - kLogGammaHalf) - S(1.5) * mu - e_inv * S(e_phiinv);
  const double h_ig = s + std::log(r) + std::lgamma(s) - (1.0 + s) * digamma(s);
  const double cross_phi = std::log(1.0 / (scale * scale)) * 0.5 - kLogGammaHalf -
                           1.5 * e_logphi - (1.0 / (scale * scale)) * e_phiinv;
  return -h_ln - cross_x - S(h_ig + cross_phi);
}

template <class S>
S kl_weights_t(const S& mu_tau, const S& sigma_tau, const std::vector<S>& mu_lambda,
               const std::vector<S>& sigma_lambda, const HorseshoeState& aux) {
  S kl = kl_block_t(mu_tau, sigma_tau, aux.s_tau, aux.r_tau, aux.a_scale);
  for (size_t i = 0; i < mu_lambda.size(); ++i)
    kl += kl_block_t(mu_lambda[i], sigma_lambda[i], aux.s_lambda(static_cast<Eigen::Index>(i)),
                     aux.r_lambda(static_cast<Eigen::Index>(i)), aux.b_scale);
  return kl;
}

}  // namespace hsgp::horseshoe
