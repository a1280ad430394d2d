#include "hsgp/bound.hpp"

#include <cmath>

#include "hsgp/errors.hpp"
#include "hsgp/gp_exact.hpp"
#include "hsgp/math_util.hpp"

namespace hsgp::bound {

double c_single(const Eigen::VectorXd& eigs_desc, int m) {
  if (m < 0) throw_config("c_single: M must be nonnegative");
  double tail = 0.0;
  for (Eigen::Index i = m; i < eigs_desc.size(); ++i) tail += eigs_desc(i);
  return tail;
}

double c_multi(const Eigen::VectorXd& eigs, const Eigen::VectorXd& eigs1,
               const Eigen::VectorXd& eigs2, int m, int n) {
  if (eigs.size() != eigs1.size() || eigs.size() != eigs2.size())
    throw_config("c_multi: spectra have mismatched lengths");
  if (m < 0 || m > eigs.size()) throw_config("c_multi: invalid M");
  double head = 0.0;
  for (int i = 0; i < m; ++i) head += eigs(i) - eigs1(i) - eigs2(i);
  return n * head + n * c_single(eigs, m);
}

double ky_fan_check(const Eigen::MatrixXd& k1, const Eigen::MatrixXd& k2, int m) {
  const Eigen::VectorXd e1 = exact::eigenvalues_desc(k1);
  const Eigen::VectorXd e2 = exact::eigenvalues_desc(k2);
  const Eigen::VectorXd es = exact::eigenvalues_desc(k1 + k2);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < m; ++i) {
    lhs += es(i);
    rhs += e1(i) + e2(i);
  }
  return rhs - lhs;
}

double trace_term(const Eigen::MatrixXd& k_ff, const Eigen::MatrixXd& k_uf,
                  const Eigen::MatrixXd& k_uu) {
  if (k_uf.rows() != k_uu.rows() || k_uf.cols() != k_ff.rows())
    throw_config("trace_term: nonconformable shapes");
  const Eigen::MatrixXd l = exact::chol_jitter(k_uu);
  const Eigen::MatrixXd a = l.triangularView<Eigen::Lower>().solve(k_uf);
  return k_ff.trace() - a.squaredNorm();
}

double kl_upper_bound(double t_or_c, double sigma_n2, double delta, double y_norm2) {
  if (!(sigma_n2 > 0.0)) throw_config("kl_upper_bound: sigma_n2 must be positive");
  if (!(delta > 0.0) || delta > 1.0) throw_config("kl_upper_bound: delta must be in (0, 1]");
  return t_or_c / (2.0 * sigma_n2 * delta) * (1.0 + y_norm2 / sigma_n2);
}

double collapsed_svgp_bound(const Eigen::MatrixXd& k_ff, const Eigen::MatrixXd& k_uf,
                            const Eigen::MatrixXd& k_uu, const Eigen::VectorXd& y,
                            double sigma_n2) {
  const Eigen::Index n = y.size();
  const Eigen::MatrixXd l = exact::chol_jitter(k_uu);
  const Eigen::MatrixXd a = l.triangularView<Eigen::Lower>().solve(k_uf);
  Eigen::MatrixXd q = a.transpose() * a;
  const double t = k_ff.trace() - q.trace();
  q.diagonal().array() += sigma_n2;
  const Eigen::MatrixXd lq = exact::chol_jitter(q);
  const Eigen::VectorXd ly = lq.triangularView<Eigen::Lower>().solve(y);
  const double log_density = -0.5 * ly.squaredNorm() - lq.diagonal().array().log().sum() -
                             0.5 * static_cast<double>(n) * kLog2Pi;
  return log_density - t / (2.0 * sigma_n2);
}

BoundReport verify_proposition(const kernels::KernelExpr& k1, const kernels::KernelExpr& k2,
                               const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int m,
                               double sigma_n2, double delta) {
  const int n = static_cast<int>(x.rows());
  if (n < m) throw_config("verify_proposition: need N >= M");
  BoundReport rep;
  rep.n_points = n;
  rep.m_inducing = m;
  rep.delta = delta;
  rep.sigma_n2 = sigma_n2;
  rep.y_norm2 = y.squaredNorm();

  const Eigen::MatrixXd kf1 = kernels::gram(k1, x);
  const Eigen::MatrixXd kf2 = kernels::gram(k2, x);
  rep.eigs1 = exact::eigenvalues_desc(kf1);
  rep.eigs2 = exact::eigenvalues_desc(kf2);
  rep.eigs = exact::eigenvalues_desc(kf1 + kf2);

  rep.c_single = c_single(rep.eigs, m);
  rep.c_multi_raw = c_multi(rep.eigs, rep.eigs1, rep.eigs2, m, n);
  rep.c_multi = rep.c_multi_raw / n;

  const Eigen::MatrixXd z = x.topRows(m);
  // single group over the summed kernel
  const Eigen::MatrixXd kuu_s = kernels::gram(k1, z) + kernels::gram(k2, z);
  const Eigen::MatrixXd kuf_s = kernels::gram(k1, z, x) + kernels::gram(k2, z, x);
  rep.t_single = trace_term(kf1 + kf2, kuf_s, kuu_s);
  // one group per kernel, block-diagonal K_uu: traces add per group
  rep.t_multi = trace_term(kf1, kernels::gram(k1, z, x), kernels::gram(k1, z)) +
                trace_term(kf2, kernels::gram(k2, z, x), kernels::gram(k2, z));

  rep.bound_single = kl_upper_bound(std::max(rep.t_single, 0.0), sigma_n2, delta, rep.y_norm2);
  rep.bound_multi = kl_upper_bound(std::max(rep.t_multi, 0.0), sigma_n2, delta, rep.y_norm2);

  const double scale = std::max(1.0, std::abs(rep.c_single));
  rep.multi_leq_single = rep.c_multi <= rep.c_single + 1e-8 * scale;
  return rep;
}

}  // namespace hsgp::bound
