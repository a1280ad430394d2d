#include "hsgp/gp_exact.hpp"

#include <cmath>

#include "hsgp/errors.hpp"
#include "hsgp/math_util.hpp"
#include "hsgp/rng.hpp"

namespace hsgp::exact {

void WeightedKernel::validate() const {
  if (weights.size() != pool.size())
    throw_config("weighted kernel: weight count does not match pool size");
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (!(weights(i) >= 0.0)) throw_config("weighted kernel: weights must be nonnegative");
}

Eigen::MatrixXd weighted_gram(const WeightedKernel& wk, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& x2) {
  wk.validate();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(x.rows(), x2.rows());
  for (int i = 0; i < wk.pool.size(); ++i) {
    const double w2 = wk.weights(i) * wk.weights(i);
    if (w2 == 0.0) continue;
    k += w2 * kernels::gram(wk.pool.members[i], x, x2);
  }
  return k;
}

Eigen::MatrixXd weighted_gram(const WeightedKernel& wk, const Eigen::MatrixXd& x) {
  wk.validate();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  for (int i = 0; i < wk.pool.size(); ++i) {
    const double w2 = wk.weights(i) * wk.weights(i);
    if (w2 == 0.0) continue;
    k += w2 * kernels::gram(wk.pool.members[i], x);
  }
  return k;
}

Eigen::MatrixXd chol_jitter(const Eigen::MatrixXd& k, double* jitter_used) {
  if (k.rows() != k.cols()) throw_config("chol_jitter: matrix not square");
  const double scale = std::max(k.diagonal().mean(), 0.0);
  const double base = (scale > 0.0) ? scale : 1.0;
  for (double factor : {0.0, 1e-6, 1e-5, 1e-4}) {
    Eigen::MatrixXd kj = k;
    if (factor > 0.0) kj.diagonal().array() += factor * base;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = factor * base;
      return llt.matrixL();
    }
  }
  throw_numeric("cholesky failed after jitter escalation");
}

GaussianPosterior exact_posterior(const WeightedKernel& wk, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, double sigma_n2,
                                  const Eigen::MatrixXd& xstar) {
  if (x.rows() != y.size()) throw_config("exact_posterior: rows(X) != len(y)");
  if (!(sigma_n2 > 0.0)) throw_config("exact_posterior: sigma_n2 must be positive");
  if (!x.allFinite() || !y.allFinite() || !xstar.allFinite())
    throw_numeric("exact_posterior: non-finite inputs");
  Eigen::MatrixXd kxx = weighted_gram(wk, x);
  kxx.diagonal().array() += sigma_n2;
  const Eigen::MatrixXd l = chol_jitter(kxx);
  const Eigen::MatrixXd ksx = weighted_gram(wk, xstar, x);  // T x N
  // A = L^-1 K_xs
  const Eigen::MatrixXd a = l.triangularView<Eigen::Lower>().solve(ksx.transpose());
  const Eigen::VectorXd ly = l.triangularView<Eigen::Lower>().solve(y);
  GaussianPosterior post;
  post.mean = a.transpose() * ly;
  post.cov = weighted_gram(wk, xstar) - a.transpose() * a;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

double log_marginal_likelihood(const WeightedKernel& wk, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y, double sigma_n2) {
  if (x.rows() != y.size()) throw_config("log_marginal_likelihood: rows(X) != len(y)");
  if (!(sigma_n2 > 0.0)) throw_config("log_marginal_likelihood: sigma_n2 must be positive");
  Eigen::MatrixXd kxx = weighted_gram(wk, x);
  kxx.diagonal().array() += sigma_n2;
  const Eigen::MatrixXd l = chol_jitter(kxx);
  const Eigen::VectorXd ly = l.triangularView<Eigen::Lower>().solve(y);
  const double n = static_cast<double>(y.size());
  return -0.5 * ly.squaredNorm() - l.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

Eigen::VectorXd sample_gp(const WeightedKernel& wk, const Eigen::MatrixXd& x, double sigma_n2,
                          std::uint64_t seed) {
  if (!(sigma_n2 > 0.0)) throw_config("sample_gp: sigma_n2 must be positive");
  Eigen::MatrixXd k = weighted_gram(wk, x);
  k.diagonal().array() += sigma_n2;
  const Eigen::MatrixXd l = chol_jitter(k);
  Rng rng(seed);
  Eigen::VectorXd z(x.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return l * z;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (k + k.transpose()));
  if (es.info() != Eigen::Success) throw_numeric("psd_sqrt: eigendecomposition failed");
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

double w2_gaussian(const GaussianPosterior& p, const GaussianPosterior& q) {
  if (p.mean.size() != q.mean.size()) throw_config("w2_gaussian: dimension mismatch");
  const Eigen::MatrixXd sq = psd_sqrt(q.cov);
  const Eigen::MatrixXd inner = sq * p.cov * sq;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()));
  if (es.info() != Eigen::Success) throw_numeric("w2_gaussian: matrix square root failed");
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double t = p.cov.trace() + q.cov.trace() - 2.0 * cross;
  const double d2 = (p.mean - q.mean).squaredNorm() + t;
  return std::sqrt(std::max(d2, 0.0));
}

double kl_gaussian(const GaussianPosterior& p, const GaussianPosterior& q) {
  if (p.mean.size() != q.mean.size()) throw_config("kl_gaussian: dimension mismatch");
  const Eigen::Index t = p.mean.size();
  const Eigen::MatrixXd lq = chol_jitter(q.cov);
  const Eigen::MatrixXd lp = chol_jitter(p.cov);
  // tr(Sq^-1 Sp) = || Lq^-1 Lp ||_F^2
  const Eigen::MatrixXd a = lq.triangularView<Eigen::Lower>().solve(lp);
  const Eigen::VectorXd dm = lq.triangularView<Eigen::Lower>().solve(q.mean - p.mean);
  const double logdet_q = 2.0 * lq.diagonal().array().log().sum();
  const double logdet_p = 2.0 * lp.diagonal().array().log().sum();
  return 0.5 * (a.squaredNorm() + dm.squaredNorm() - static_cast<double>(t) + logdet_q - logdet_p);
}

Eigen::VectorXd eigenvalues_desc(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw_config("eigenvalues: matrix not square");
  const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  if (asym > 1e-8 * scale) throw_config("eigenvalues: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (k + k.transpose()));
  if (es.info() != Eigen::Success) throw_numeric("eigenvalue decomposition failed");
  return es.eigenvalues().reverse();
}

Eigen::VectorXd top_eigenvalues(const Eigen::MatrixXd& k, int m) {
  if (m < 0 || m > k.rows()) throw_config("top_eigenvalues: invalid count");
  return eigenvalues_desc(k).head(m);
}

}  // namespace hsgp::exact
