#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "hsgp/kernels.hpp"

namespace hsgp::exact {

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// k~(x, x') = sum_i w_i^2 k_i(x, x')
struct WeightedKernel {
  kernels::KernelPool pool;
  Eigen::VectorXd weights;

  void validate() const;
};

Eigen::MatrixXd weighted_gram(const WeightedKernel& wk, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& x2);
Eigen::MatrixXd weighted_gram(const WeightedKernel& wk, const Eigen::MatrixXd& x);

// Cholesky with jitter escalation: tries no jitter, then
// {1e-6, 1e-5, 1e-4} x mean diagonal. Throws a numeric error when all fail.
Eigen::MatrixXd chol_jitter(const Eigen::MatrixXd& k, double* jitter_used = nullptr);

GaussianPosterior exact_posterior(const WeightedKernel& wk, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, double sigma_n2,
                                  const Eigen::MatrixXd& xstar);

double log_marginal_likelihood(const WeightedKernel& wk, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y, double sigma_n2);

Eigen::VectorXd sample_gp(const WeightedKernel& wk, const Eigen::MatrixXd& x, double sigma_n2,
                          std::uint64_t seed);

double w2_gaussian(const GaussianPosterior& p, const GaussianPosterior& q);
double kl_gaussian(const GaussianPosterior& p, const GaussianPosterior& q);

// M largest eigenvalues of a symmetric matrix, descending.
Eigen::VectorXd top_eigenvalues(const Eigen::MatrixXd& k, int m);
// All eigenvalues, descending.
Eigen::VectorXd eigenvalues_desc(const Eigen::MatrixXd& k);

// PSD square root via symmetric eigendecomposition, negative eigenvalues
// clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& k);

}  // namespace hsgp::exact
