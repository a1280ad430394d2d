#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hsgp/ad.hpp"
#include "hsgp/errors.hpp"

namespace hsgp::kernels {

enum class BaseKind { kSE, kLin, kPer };

enum class InitScheme { kWeak, kStrong };

// One base covariance. No variance hyperparameter: amplitudes live in the
// model weights. LIN reuses the `offset` slot for its shift parameter.
struct BaseKernel {
  BaseKind kind = BaseKind::kSE;
  double lengthscale = 1.0;  // SE, PER
  double period = 1.0;       // PER
  double offset = 0.0;       // LIN
  // Input dimensions this kernel sees; empty = all. Additive pools restrict
  // each member to one dimension subset.
  std::vector<int> dims;

  void validate() const;
};

// Product of at most two base kernels; the atoms of the pool.
struct KernelExpr {
  std::vector<BaseKernel> factors;
  InitScheme init_scheme = InitScheme::kWeak;

  void validate() const;
};

struct KernelPool {
  std::vector<KernelExpr> members;
  int size() const { return static_cast<int>(members.size()); }
};

// Statistics of a (standardized) training set that drive hyperparameter
// initialization.
struct DataStats {
  double input_range = 1.0;
  double input_mean = 0.0;
  double median_pairwise_dist = 1.0;
  double dominant_period = 1.0;  // from the target series when 1-D
};

struct PoolConfig {
  int max_order = 2;           // 1 or 2
  bool include_weak = true;
  bool include_strong = true;
  std::uint64_t seed = 0;      // weak-scheme draws
  DataStats stats;
};

// d-element dimension subsets for additive kernels over D inputs.
struct AdditiveSpec {
  int input_dim = 0;
  int order = 0;
  std::vector<std::vector<int>> subsets;  // lexicographic, 0-based
};

double eval_base(const BaseKernel& b, const Eigen::VectorXd& x, const Eigen::VectorXd& y);
double eval_expr(const KernelExpr& e, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Entry (i, j) = k(X.row(i), X2.row(j)).
Eigen::MatrixXd gram(const KernelExpr& e, const Eigen::MatrixXd& x, const Eigen::MatrixXd& x2);
// Symmetric Gram; diagonal entries use the exact same-point value.
Eigen::MatrixXd gram(const KernelExpr& e, const Eigen::MatrixXd& x);
Eigen::VectorXd gram_diag(const KernelExpr& e, const Eigen::MatrixXd& x);

DataStats compute_stats(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
KernelPool build_pool(const PoolConfig& config);

AdditiveSpec additive_terms(int input_dim, int order);
// Pool of C(D,d) products of `base` restricted to each dimension subset.
KernelPool additive_pool(const BaseKernel& base, const AdditiveSpec& spec);

std::string describe(const KernelExpr& e);

// Structure comparison ignoring hyperparameters and factor order.
bool same_structure(const KernelExpr& a, const std::vector<BaseKind>& kinds);

std::string kind_name(BaseKind k);
std::string structure_name(const KernelExpr& e);

// ---------------------------------------------------------------------------
// Generic evaluation shared by the double path and the tape path. Hyper-
// parameters have scalar type S (double or ad::Var); the two points may have
// different scalar types so inducing locations can be optimized while data
// stays plain.

template <class S>
struct BaseParams {
  BaseKind kind;
  S lengthscale;
  S period;
  S offset;
  std::vector<int> dims;  // empty = all input dimensions

  int coord(int i) const { return dims.empty() ? i : dims[i]; }
  int ncoord(int dim) const { return dims.empty() ? dim : static_cast<int>(dims.size()); }
};

template <class S, class PX, class PY>
S eval_base_t(const BaseParams<S>& p, const PX* x, const PY* y, int dim) {
  using ad::exp;
  using ad::sin;
  using ad::sqrt;
  using std::exp;
  using std::sin;
  using std::sqrt;
  const int n = p.ncoord(dim);
  switch (p.kind) {
    case BaseKind::kSE: {
      S d2(0.0);
      for (int i = 0; i < n; ++i) {
        const int c = p.coord(i);
        d2 += (S(x[c]) - S(y[c])) * (S(x[c]) - S(y[c]));
      }
      return exp(-d2 / (S(2.0) * p.lengthscale * p.lengthscale));
    }
    case BaseKind::kPer: {
      S d2(0.0);
      for (int i = 0; i < n; ++i) {
        const int c = p.coord(i);
        d2 += (S(x[c]) - S(y[c])) * (S(x[c]) - S(y[c]));
      }
      // tiny bias keeps sqrt differentiable when the two points coincide
      S d = sqrt(d2 + S(1e-300));
      S sp = sin(S(M_PI) * d / p.period);
      return exp(S(-2.0) * sp * sp / (p.lengthscale * p.lengthscale));
    }
    case BaseKind::kLin: {
      S s(0.0);
      for (int i = 0; i < n; ++i) {
        const int c = p.coord(i);
        s += (S(x[c]) - p.offset) * (S(y[c]) - p.offset);
      }
      return s;
    }
  }
  return S(0.0);
}

// Exact same-point value: SE and PER are 1 by construction, LIN is a square.
template <class S, class PX>
S eval_base_diag_t(const BaseParams<S>& p, const PX* x, int dim) {
  if (p.kind != BaseKind::kLin) return S(1.0);
  const int n = p.ncoord(dim);
  S s(0.0);
  for (int i = 0; i < n; ++i) {
    const int c = p.coord(i);
    s += (S(x[c]) - p.offset) * (S(x[c]) - p.offset);
  }
  return s;
}

template <class S>
struct ExprParams {
  std::vector<BaseParams<S>> factors;
};

template <class S, class PX, class PY>
S eval_expr_t(const ExprParams<S>& e, const PX* x, const PY* y, int dim) {
  S v = eval_base_t(e.factors[0], x, y, dim);
  for (size_t f = 1; f < e.factors.size(); ++f) v *= eval_base_t(e.factors[f], x, y, dim);
  return v;
}

template <class S, class PX>
S eval_expr_diag_t(const ExprParams<S>& e, const PX* x, int dim) {
  S v = eval_base_diag_t(e.factors[0], x, dim);
  for (size_t f = 1; f < e.factors.size(); ++f) v *= eval_base_diag_t(e.factors[f], x, dim);
  return v;
}

ExprParams<double> to_params(const KernelExpr& e);

}  // namespace hsgp::kernels
