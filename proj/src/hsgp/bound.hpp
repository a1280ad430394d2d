#pragma once

#include <Eigen/Dense>

#include "hsgp/kernels.hpp"

namespace hsgp::bound {

// Numerical record for one Proposition-1 style comparison between the
// single-group (SVGP) and per-kernel-group (MultiSVGP) approximations of
// k = k1 + k2 on N points with M inducing points.
//
// Eigenvalues are Gram-matrix eigenvalues. c_multi_raw carries the paper
// formula's explicit N factor; c_multi = c_multi_raw / N is the
// operator-normalized value comparable with c_single (the inequality
// c_multi <= c_single is exactly Ky Fan under this convention).
struct BoundReport {
  int n_points = 0;
  int m_inducing = 0;
  Eigen::VectorXd eigs;   // spectrum of K1 + K2, descending
  Eigen::VectorXd eigs1;  // spectrum of K1
  Eigen::VectorXd eigs2;  // spectrum of K2
  double c_single = 0.0;
  double c_multi = 0.0;
  double c_multi_raw = 0.0;
  double t_single = 0.0;  // trace(K - Q_ff), summed kernel, M inducing points
  double t_multi = 0.0;   // trace(K - Q_ff), block-diagonal per-group K_uu
  double bound_single = 0.0;
  double bound_multi = 0.0;
  double delta = 0.1;
  double sigma_n2 = 1.0;
  double y_norm2 = 0.0;
  bool multi_leq_single = false;
};

// Tail sum of a descending spectrum past the first m entries.
double c_single(const Eigen::VectorXd& eigs_desc, int m);

// Paper formula with the explicit N factor:
// N * sum_{i<=M} (eig_i - eig1_i - eig2_i) + N * sum_{j>M} eig_j
double c_multi(const Eigen::VectorXd& eigs, const Eigen::VectorXd& eigs1,
               const Eigen::VectorXd& eigs2, int m, int n);

// slack = [sum_{i<=M} eig_i(K1) + eig_i(K2)] - sum_{i<=M} eig_i(K1+K2) >= 0
double ky_fan_check(const Eigen::MatrixXd& k1, const Eigen::MatrixXd& k2, int m);

// trace(K_ff) - trace(K_uf^T K_uu^-1 K_uf)
double trace_term(const Eigen::MatrixXd& k_ff, const Eigen::MatrixXd& k_uf,
                  const Eigen::MatrixXd& k_uu);

// C / (2 sigma_n^2 delta) * (1 + ||y||^2 / sigma_n^2)
double kl_upper_bound(double t_or_c, double sigma_n2, double delta, double y_norm2);

// Optimal collapsed SVGP bound log N(y | 0, Q_ff + sigma^2 I) - t/(2 sigma^2);
// the gap to the exact log marginal equals KL(Q* || posterior).
double collapsed_svgp_bound(const Eigen::MatrixXd& k_ff, const Eigen::MatrixXd& k_uf,
                            const Eigen::MatrixXd& k_uu, const Eigen::VectorXd& y,
                            double sigma_n2);

// Full comparison on one instance. Inducing locations are the first M rows
// of X for both models (shared across the two MultiSVGP groups).
BoundReport verify_proposition(const kernels::KernelExpr& k1, const kernels::KernelExpr& k2,
                               const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int m,
                               double sigma_n2, double delta);

}  // namespace hsgp::bound
