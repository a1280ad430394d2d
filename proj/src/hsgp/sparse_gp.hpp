#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "hsgp/gp_exact.hpp"
#include "hsgp/kernels.hpp"

namespace hsgp::svgp {

// Variational state of one inducing group: locations Z, mean m, and the
// lower-triangular factor L with S = L L^T.
struct InducingGroup {
  Eigen::MatrixXd z;  // M x D
  Eigen::VectorXd m;  // M
  Eigen::MatrixXd l;  // M x M, lower triangular, positive diagonal

  int size() const { return static_cast<int>(z.rows()); }
  void validate() const;
};

// One inducing group per pool kernel; group i's covariances come from k_i only.
struct MultiSvgpModel {
  kernels::KernelPool pool;
  std::vector<InducingGroup> groups;

  void validate() const;
};

// Single inducing group over the summed kernel k~ defined by (pool, weights).
struct SvgpBaseline {
  kernels::KernelPool pool;
  InducingGroup group;
};

inline constexpr double kJitterFactor = 1e-6;

// K_uu for one kernel with the baseline jitter added to the diagonal.
Eigen::MatrixXd group_kuu(const kernels::KernelExpr& k, const Eigen::MatrixXd& z);

// Cholesky of a raw K_uu gram under the jitter ladder
// {1e-6, 1e-5, 1e-4} x mean diagonal; reports the jitter actually applied.
Eigen::MatrixXd chol_kuu_ladder(const Eigen::MatrixXd& kuu_raw, double* jitter_used);

struct Conditional {
  Eigen::VectorXd mean;
  Eigen::VectorXd var_diag;
  std::optional<Eigen::MatrixXd> cov;  // prior-conditional covariance on request
};

// Per-group conditional: mean k_u^T K_uu^-1 m, prior-conditional covariance
// k_i - k_u^T K_uu^-1 k_u (no S term).
Conditional group_conditional(const InducingGroup& g, const kernels::KernelExpr& k,
                              const Eigen::MatrixXd& xstar, bool want_full_cov = false);

// Marginal predictive q(f(X*)) with explicit weights: mean sums w_i mu_i and
// covariance sums w_i^2 [k_i - k_u^T K^-1 (K - S_i) K^-1 k_u].
exact::GaussianPosterior marginal_predictive(const MultiSvgpModel& model,
                                             const Eigen::VectorXd& w,
                                             const Eigen::MatrixXd& xstar);

// Same quantity, mean and diagonal variance only.
void marginal_predictive_diag(const MultiSvgpModel& model, const Eigen::VectorXd& w,
                              const Eigen::MatrixXd& xstar, Eigen::VectorXd* mean,
                              Eigen::VectorXd* var);

exact::GaussianPosterior svgp_predictive(const SvgpBaseline& base, const Eigen::VectorXd& w,
                                         const Eigen::MatrixXd& xstar);

// sum_i KL(N(m_i, S_i) || N(0, K_uu_i))
double kl_inducing(const MultiSvgpModel& model);
double kl_inducing_svgp(const SvgpBaseline& base, const Eigen::VectorXd& w);

// Inducing location with its group membership tag.
struct TaggedPoint {
  Eigen::VectorXd x;
  int group = 0;
};

// Inter-domain covariances: k_uf(z, x) = sum_i w_i 1{z in Z_i} k_i(z, x) and
// k_uu(z, z') = sum_i 1{z in Z_i} 1{z' in Z_i} k_i(z, z').
Eigen::MatrixXd inter_domain_kuf(const kernels::KernelPool& pool, const Eigen::VectorXd& w,
                                 const std::vector<TaggedPoint>& zq, const Eigen::MatrixXd& x);
Eigen::MatrixXd inter_domain_kuu(const kernels::KernelPool& pool,
                                 const std::vector<TaggedPoint>& zq);

// Seeded subset initialization: Z_i drawn independently per group from the
// training inputs, m_i = 0, L_i = chol(K_uu_i) so q starts at the prior.
std::vector<InducingGroup> init_groups(const kernels::KernelPool& pool, const Eigen::MatrixXd& x,
                                       int m_per_group, std::uint64_t seed);
InducingGroup init_single_group(const kernels::KernelPool& pool, const Eigen::VectorXd& w,
                                const Eigen::MatrixXd& x, int m_inducing, std::uint64_t seed);

}  // namespace hsgp::svgp
