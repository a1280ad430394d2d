#include "hsgp/sparse_gp.hpp"

#include <cmath>

#include "hsgp/errors.hpp"
#include "hsgp/rng.hpp"

namespace hsgp::svgp {

void InducingGroup::validate() const {
  if (z.rows() < 1) throw_config("inducing group must hold at least one point");
  if (m.size() != z.rows() || l.rows() != z.rows() || l.cols() != z.rows())
    throw_config("inducing group: inconsistent sizes");
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > 0.0)) throw_config("inducing group: L diagonal must be positive");
}

void MultiSvgpModel::validate() const {
  if (static_cast<int>(groups.size()) != pool.size())
    throw_config("model: one inducing group per pool kernel required");
  for (const auto& g : groups) g.validate();
}

Eigen::MatrixXd group_kuu(const kernels::KernelExpr& k, const Eigen::MatrixXd& z) {
  Eigen::MatrixXd kuu = kernels::gram(k, z);
  kuu.diagonal().array() += kJitterFactor * kuu.diagonal().mean();
  return kuu;
}

Eigen::MatrixXd chol_kuu_ladder(const Eigen::MatrixXd& kuu_raw, double* jitter_used) {
  const double base = std::max(kuu_raw.diagonal().mean(), 0.0);
  const double scale = (base > 0.0) ? base : 1.0;
  for (double factor : {1e-6, 1e-5, 1e-4}) {
    Eigen::MatrixXd kj = kuu_raw;
    kj.diagonal().array() += factor * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = factor * scale;
      return llt.matrixL();
    }
  }
  throw_numeric("K_uu factorization failed after jitter escalation");
}

namespace {

struct GroupFactor {
  Eigen::MatrixXd lk;       // chol(K_uu + jitter)
  Eigen::MatrixXd a;        // L^-1 K_uf
  Eigen::MatrixXd b;        // K_uu^-1 K_uf
  Eigen::VectorXd lm;       // L^-1 m
};

GroupFactor factor_group(const InducingGroup& g, const kernels::KernelExpr& k,
                         const Eigen::MatrixXd& xstar) {
  GroupFactor f;
  f.lk = chol_kuu_ladder(kernels::gram(k, g.z), nullptr);
  const Eigen::MatrixXd kuf = kernels::gram(k, g.z, xstar);
  f.a = f.lk.triangularView<Eigen::Lower>().solve(kuf);
  f.b = f.lk.transpose().triangularView<Eigen::Upper>().solve(f.a);
  f.lm = f.lk.triangularView<Eigen::Lower>().solve(g.m);
  return f;
}

}  // namespace

Conditional group_conditional(const InducingGroup& g, const kernels::KernelExpr& k,
                              const Eigen::MatrixXd& xstar, bool want_full_cov) {
  g.validate();
  const GroupFactor f = factor_group(g, k, xstar);
  Conditional c;
  c.mean = f.a.transpose() * f.lm;
  c.var_diag = kernels::gram_diag(k, xstar) - f.a.colwise().squaredNorm().transpose();
  if (want_full_cov) {
    Eigen::MatrixXd cov = kernels::gram(k, xstar) - f.a.transpose() * f.a;
    c.cov = 0.5 * (cov + cov.transpose()).eval();
  }
  return c;
}

exact::GaussianPosterior marginal_predictive(const MultiSvgpModel& model,
                                             const Eigen::VectorXd& w,
                                             const Eigen::MatrixXd& xstar) {
  model.validate();
  if (w.size() != model.pool.size()) throw_config("marginal_predictive: weight size mismatch");
  const Eigen::Index t = xstar.rows();
  exact::GaussianPosterior post;
  post.mean = Eigen::VectorXd::Zero(t);
  post.cov = Eigen::MatrixXd::Zero(t, t);
  for (int i = 0; i < model.pool.size(); ++i) {
    if (w(i) == 0.0) continue;
    const auto& g = model.groups[i];
    const GroupFactor f = factor_group(g, model.pool.members[i], xstar);
    post.mean += w(i) * (f.a.transpose() * f.lm);
    const Eigen::MatrixXd lb = g.l.transpose() * f.b;  // L_i^T K^-1 K_uf
    Eigen::MatrixXd cov_i = kernels::gram(model.pool.members[i], xstar) -
                            f.a.transpose() * f.a + lb.transpose() * lb;
    post.cov += (w(i) * w(i)) * cov_i;
  }
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

void marginal_predictive_diag(const MultiSvgpModel& model, const Eigen::VectorXd& w,
                              const Eigen::MatrixXd& xstar, Eigen::VectorXd* mean,
                              Eigen::VectorXd* var) {
  model.validate();
  if (w.size() != model.pool.size()) throw_config("marginal_predictive: weight size mismatch");
  const Eigen::Index t = xstar.rows();
  *mean = Eigen::VectorXd::Zero(t);
  *var = Eigen::VectorXd::Zero(t);
  for (int i = 0; i < model.pool.size(); ++i) {
    if (w(i) == 0.0) continue;
    const auto& g = model.groups[i];
    const GroupFactor f = factor_group(g, model.pool.members[i], xstar);
    *mean += w(i) * (f.a.transpose() * f.lm);
    const Eigen::MatrixXd lb = g.l.transpose() * f.b;
    *var += (w(i) * w(i)) *
            (kernels::gram_diag(model.pool.members[i], xstar) -
             f.a.colwise().squaredNorm().transpose() + lb.colwise().squaredNorm().transpose())
                .eval();
  }
}

namespace {

// Summed-kernel Gram pieces for the SVGP baseline.
Eigen::MatrixXd summed_gram(const kernels::KernelPool& pool, const Eigen::VectorXd& w,
                            const Eigen::MatrixXd& x, const Eigen::MatrixXd& x2) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(x.rows(), x2.rows());
  for (int i = 0; i < pool.size(); ++i) {
    const double w2 = w(i) * w(i);
    if (w2 == 0.0) continue;
    k += w2 * kernels::gram(pool.members[i], x, x2);
  }
  return k;
}

Eigen::MatrixXd summed_gram_sym(const kernels::KernelPool& pool, const Eigen::VectorXd& w,
                                const Eigen::MatrixXd& x) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  for (int i = 0; i < pool.size(); ++i) {
    const double w2 = w(i) * w(i);
    if (w2 == 0.0) continue;
    k += w2 * kernels::gram(pool.members[i], x);
  }
  return k;
}

}  // namespace

exact::GaussianPosterior svgp_predictive(const SvgpBaseline& base, const Eigen::VectorXd& w,
                                         const Eigen::MatrixXd& xstar) {
  base.group.validate();
  if (w.size() != base.pool.size()) throw_config("svgp_predictive: weight size mismatch");
  const Eigen::MatrixXd lk = chol_kuu_ladder(summed_gram_sym(base.pool, w, base.group.z), nullptr);
  const Eigen::MatrixXd kuf = summed_gram(base.pool, w, base.group.z, xstar);
  const Eigen::MatrixXd a = lk.triangularView<Eigen::Lower>().solve(kuf);
  const Eigen::MatrixXd b = lk.transpose().triangularView<Eigen::Upper>().solve(a);
  const Eigen::VectorXd lm = lk.triangularView<Eigen::Lower>().solve(base.group.m);
  exact::GaussianPosterior post;
  post.mean = a.transpose() * lm;
  const Eigen::MatrixXd lb = base.group.l.transpose() * b;
  post.cov = summed_gram_sym(base.pool, w, xstar) - a.transpose() * a + lb.transpose() * lb;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

namespace {

double kl_one_group(const InducingGroup& g, const Eigen::MatrixXd& kuu_raw) {
  const Eigen::MatrixXd lk = chol_kuu_ladder(kuu_raw, nullptr);
  const Eigen::MatrixXd c = lk.triangularView<Eigen::Lower>().solve(g.l);
  const Eigen::VectorXd lm = lk.triangularView<Eigen::Lower>().solve(g.m);
  const double m = static_cast<double>(g.size());
  return 0.5 * (c.squaredNorm() + lm.squaredNorm() - m) +
         lk.diagonal().array().log().sum() - g.l.diagonal().array().log().sum();
}

}  // namespace

double kl_inducing(const MultiSvgpModel& model) {
  model.validate();
  double kl = 0.0;
  for (int i = 0; i < model.pool.size(); ++i)
    kl += kl_one_group(model.groups[i], kernels::gram(model.pool.members[i], model.groups[i].z));
  return kl;
}

double kl_inducing_svgp(const SvgpBaseline& base, const Eigen::VectorXd& w) {
  return kl_one_group(base.group, summed_gram_sym(base.pool, w, base.group.z));
}

Eigen::MatrixXd inter_domain_kuf(const kernels::KernelPool& pool, const Eigen::VectorXd& w,
                                 const std::vector<TaggedPoint>& zq, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd k(zq.size(), x.rows());
  for (size_t r = 0; r < zq.size(); ++r) {
    const int gi = zq[r].group;
    if (gi < 0 || gi >= pool.size()) throw_config("inter-domain point with unknown group tag");
    for (Eigen::Index c = 0; c < x.rows(); ++c)
      k(static_cast<Eigen::Index>(r), c) =
          w(gi) * kernels::eval_expr(pool.members[gi], zq[r].x, x.row(c).transpose());
  }
  return k;
}

Eigen::MatrixXd inter_domain_kuu(const kernels::KernelPool& pool,
                                 const std::vector<TaggedPoint>& zq) {
  const Eigen::Index n = static_cast<Eigen::Index>(zq.size());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int gi = zq[r].group;
    if (gi < 0 || gi >= pool.size()) throw_config("inter-domain point with unknown group tag");
    for (Eigen::Index c = r; c < n; ++c) {
      if (zq[c].group != gi) continue;  // indicator product vanishes
      const double v = kernels::eval_expr(pool.members[gi], zq[r].x, zq[c].x);
      k(r, c) = v;
      k(c, r) = v;
    }
  }
  return k;
}

namespace {

InducingGroup make_prior_group(const kernels::KernelExpr& k, const Eigen::MatrixXd& z) {
  InducingGroup g;
  g.z = z;
  g.m = Eigen::VectorXd::Zero(z.rows());
  g.l = chol_kuu_ladder(kernels::gram(k, z), nullptr);
  return g;
}

Eigen::MatrixXd subset_rows(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd z(idx.size(), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) z.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return z;
}

}  // namespace

std::vector<InducingGroup> init_groups(const kernels::KernelPool& pool, const Eigen::MatrixXd& x,
                                       int m_per_group, std::uint64_t seed) {
  if (m_per_group > x.rows()) throw_config("init_groups: M per group exceeds data size");
  Rng rng(seed);
  std::vector<InducingGroup> groups;
  groups.reserve(pool.members.size());
  for (const auto& k : pool.members) {
    const auto idx = rng.sample_without_replacement(static_cast<int>(x.rows()), m_per_group);
    groups.push_back(make_prior_group(k, subset_rows(x, idx)));
  }
  return groups;
}

InducingGroup init_single_group(const kernels::KernelPool& pool, const Eigen::VectorXd& w,
                                const Eigen::MatrixXd& x, int m_inducing, std::uint64_t seed) {
  if (m_inducing > x.rows()) throw_config("init_single_group: M exceeds data size");
  Rng rng(seed);
  const auto idx = rng.sample_without_replacement(static_cast<int>(x.rows()), m_inducing);
  const Eigen::MatrixXd z = subset_rows(x, idx);
  InducingGroup g;
  g.z = z;
  g.m = Eigen::VectorXd::Zero(z.rows());
  g.l = chol_kuu_ladder(summed_gram_sym(pool, w, z), nullptr);
  return g;
}

}  // namespace hsgp::svgp
