#include "hsgp/horseshoe.hpp"

#include <cmath>

namespace hsgp::horseshoe {

void HorseshoeState::validate() const {
  const int m = size();
  if (sigma_lambda.size() != m || s_lambda.size() != m || r_lambda.size() != m)
    throw_config("horseshoe state: inconsistent vector lengths");
  // sigma = 0 is the degenerate log-normal; sampling allows it, the KL does not
  if (!(sigma_tau >= 0.0) || !(s_tau > 0.0) || !(r_tau > 0.0))
    throw_config("horseshoe state: tau parameters must be positive");
  if (!(a_scale > 0.0) || !(b_scale > 0.0))
    throw_config("horseshoe state: scales A, B must be positive");
  for (int i = 0; i < m; ++i)
    if (!(sigma_lambda(i) >= 0.0) || !(s_lambda(i) > 0.0) || !(r_lambda(i) > 0.0))
      throw_config("horseshoe state: lambda parameters must be positive");
}

HorseshoeState init_state(int m, double a_scale, double b_scale) {
  HorseshoeState st;
  st.mu_tau = 0.0;
  st.sigma_tau = 0.05;
  st.mu_lambda = Eigen::VectorXd::Zero(m);
  st.sigma_lambda = Eigen::VectorXd::Constant(m, 0.05);
  st.s_lambda = Eigen::VectorXd::Ones(m);
  st.r_lambda = Eigen::VectorXd::Ones(m);
  st.a_scale = a_scale;
  st.b_scale = b_scale;
  return update_aux(st);
}

Eigen::VectorXd sample_weights(const HorseshoeState& st, const Eigen::VectorXd& eps) {
  st.validate();
  if (eps.size() != st.size()) throw_config("sample_weights: eps length mismatch");
  Eigen::VectorXd w(st.size());
  for (int i = 0; i < st.size(); ++i) {
    w(i) = std::exp(st.mu_tau + st.mu_lambda(i) + eps(i) * (st.sigma_tau + st.sigma_lambda(i)));
    if (!std::isfinite(w(i))) throw_numeric("sample_weights: overflow");
  }
  return w;
}

double lognormal_entropy(double mu, double sigma) {
  if (!(sigma > 0.0)) throw_config("lognormal_entropy: sigma must be positive");
  return mu + 0.5 * (std::log(sigma * sigma) + kLog2Pi + 1.0);
}

std::pair<double, double> lognormal_moments(double mu, double sigma) {
  if (sigma < 0.0) throw_config("lognormal_moments: sigma must be nonnegative");
  return {std::exp(-mu + 0.5 * sigma * sigma), mu};
}

std::pair<double, double> invgamma_expectations(double s, double r) {
  if (!(s > 0.0) || !(r > 0.0)) throw_config("invgamma_expectations: parameters must be positive");
  return {std::log(r) - digamma(s), s / r};
}

double kl_weights(const HorseshoeState& st) {
  st.validate();
  if (!(st.sigma_tau > 0.0) || !(st.sigma_lambda.minCoeff() > 0.0))
    throw_config("kl_weights: degenerate log-normal factors");
  std::vector<double> mu_l(st.mu_lambda.data(), st.mu_lambda.data() + st.size());
  std::vector<double> sigma_l(st.sigma_lambda.data(), st.sigma_lambda.data() + st.size());
  return kl_weights_t<double>(st.mu_tau, st.sigma_tau, mu_l, sigma_l, st);
}

HorseshoeState update_aux(const HorseshoeState& st) {
  HorseshoeState out = st;
  out.s_tau = 1.0;
  out.r_tau = lognormal_moments(st.mu_tau, st.sigma_tau).first + 1.0 / (st.a_scale * st.a_scale);
  for (int i = 0; i < st.size(); ++i) {
    out.s_lambda(i) = 1.0;
    out.r_lambda(i) = lognormal_moments(st.mu_lambda(i), st.sigma_lambda(i)).first +
                      1.0 / (st.b_scale * st.b_scale);
  }
  return out;
}

Eigen::VectorXd weight_summary(const HorseshoeState& st) {
  Eigen::VectorXd w(st.size());
  for (int i = 0; i < st.size(); ++i) w(i) = std::exp(st.mu_tau + st.mu_lambda(i));
  return w;
}

}  // namespace hsgp::horseshoe
