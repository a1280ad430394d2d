#include "hsgp/kernels.hpp"

#include <algorithm>
#include <cstdio>

#include "hsgp/rng.hpp"

namespace hsgp::kernels {

void BaseKernel::validate() const {
  if (kind != BaseKind::kLin && !(lengthscale > 0.0))
    throw_config("kernel lengthscale must be positive");
  if (kind == BaseKind::kPer && !(period > 0.0)) throw_config("kernel period must be positive");
  for (int d : dims)
    if (d < 0) throw_config("kernel dimension index must be nonnegative");
}

void KernelExpr::validate() const {
  if (factors.empty() || factors.size() > 2)
    throw_config("kernel expression must have 1 or 2 factors");
  for (const auto& f : factors) f.validate();
}

ExprParams<double> to_params(const KernelExpr& e) {
  ExprParams<double> p;
  p.factors.reserve(e.factors.size());
  for (const auto& f : e.factors)
    p.factors.push_back({f.kind, f.lengthscale, f.period, f.offset, f.dims});
  return p;
}

double eval_base(const BaseKernel& b, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw_config("eval_base: dimension mismatch");
  b.validate();
  BaseParams<double> p{b.kind, b.lengthscale, b.period, b.offset, b.dims};
  return eval_base_t(p, x.data(), y.data(), static_cast<int>(x.size()));
}

double eval_expr(const KernelExpr& e, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw_config("eval_expr: dimension mismatch");
  e.validate();
  const auto p = to_params(e);
  return eval_expr_t(p, x.data(), y.data(), static_cast<int>(x.size()));
}

Eigen::MatrixXd gram(const KernelExpr& e, const Eigen::MatrixXd& x, const Eigen::MatrixXd& x2) {
  if (x.cols() != x2.cols()) throw_config("gram: column counts differ");
  e.validate();
  const auto p = to_params(e);
  const int dim = static_cast<int>(x.cols());
  Eigen::MatrixXd rx = x.transpose();   // column-major: points contiguous
  Eigen::MatrixXd rx2 = x2.transpose();
  Eigen::MatrixXd k(x.rows(), x2.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x2.rows(); ++j)
      k(i, j) = eval_expr_t(p, rx.col(i).data(), rx2.col(j).data(), dim);
  return k;
}

Eigen::MatrixXd gram(const KernelExpr& e, const Eigen::MatrixXd& x) {
  e.validate();
  const auto p = to_params(e);
  const int dim = static_cast<int>(x.cols());
  Eigen::MatrixXd rx = x.transpose();
  Eigen::MatrixXd k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    k(i, i) = eval_expr_diag_t(p, rx.col(i).data(), dim);
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      const double v = eval_expr_t(p, rx.col(i).data(), rx.col(j).data(), dim);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::VectorXd gram_diag(const KernelExpr& e, const Eigen::MatrixXd& x) {
  e.validate();
  const auto p = to_params(e);
  const int dim = static_cast<int>(x.cols());
  Eigen::MatrixXd rx = x.transpose();
  Eigen::VectorXd d(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    d(i) = eval_expr_diag_t(p, rx.col(i).data(), dim);
  return d;
}

DataStats compute_stats(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  DataStats s;
  if (x.rows() == 0) return s;
  s.input_mean = x.mean();
  double range = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    range = std::max(range, x.col(c).maxCoeff() - x.col(c).minCoeff());
  s.input_range = (range > 0.0) ? range : 1.0;

  // median pairwise distance, subsampled for large N
  const int n = static_cast<int>(x.rows());
  const int cap = std::min(n, 400);
  std::vector<double> dists;
  dists.reserve(static_cast<size_t>(cap) * (cap - 1) / 2);
  const int stride = std::max(1, n / cap);
  for (int i = 0; i < n; i += stride)
    for (int j = i + stride; j < n; j += stride)
      dists.push_back((x.row(i) - x.row(j)).norm());
  if (!dists.empty()) {
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    const double med = dists[dists.size() / 2];
    s.median_pairwise_dist = (med > 0.0) ? med : s.input_range;
  }

  // dominant period of the target series, 1-D inputs only
  s.dominant_period = s.input_range / 4.0;
  if (x.cols() == 1 && y.size() == n && n >= 8) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return x(a, 0) < x(b, 0); });
    Eigen::VectorXd ys(n);
    for (int i = 0; i < n; ++i) ys(i) = y(order[i]);
    ys.array() -= ys.mean();
    double best_power = -1.0;
    int best_k = 1;
    for (int k = 1; k <= n / 2; ++k) {
      double c = 0.0, sn = 0.0;
      for (int i = 0; i < n; ++i) {
        const double a = 2.0 * M_PI * k * i / n;
        c += ys(i) * std::cos(a);
        sn += ys(i) * std::sin(a);
      }
      const double pw = c * c + sn * sn;
      if (pw > best_power) {
        best_power = pw;
        best_k = k;
      }
    }
    s.dominant_period = s.input_range / best_k;
  }
  return s;
}

namespace {

const std::vector<std::vector<BaseKind>>& ordered_structures() {
  using K = BaseKind;
  static const std::vector<std::vector<BaseKind>> kStructures = {
      {K::kSE},          {K::kLin},         {K::kPer},
      {K::kSE, K::kSE},  {K::kSE, K::kLin}, {K::kSE, K::kPer},
      {K::kLin, K::kLin}, {K::kLin, K::kPer}, {K::kPer, K::kPer},
      {K::kLin, K::kSE}, {K::kPer, K::kSE}, {K::kPer, K::kLin},
  };
  return kStructures;
}

BaseKernel init_factor(BaseKind kind, InitScheme scheme, const DataStats& st, Rng& rng) {
  BaseKernel b;
  b.kind = kind;
  b.offset = st.input_mean;
  if (scheme == InitScheme::kWeak) {
    auto log_uniform = [&](double lo, double hi) {
      return std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
    };
    b.lengthscale = st.input_range * log_uniform(0.1, 2.0);
    b.period = st.input_range * log_uniform(0.05, 0.5);
  } else {
    b.lengthscale = st.median_pairwise_dist;
    b.period = st.dominant_period;
  }
  return b;
}

}  // namespace

KernelPool build_pool(const PoolConfig& config) {
  if (config.max_order < 1 || config.max_order > 2)
    throw_config("pool max_order must be 1 or 2");
  if (!config.include_weak && !config.include_strong)
    throw_config("pool needs at least one initialization scheme");
  Rng rng(config.seed);
  KernelPool pool;
  std::vector<InitScheme> schemes;
  if (config.include_weak) schemes.push_back(InitScheme::kWeak);
  if (config.include_strong) schemes.push_back(InitScheme::kStrong);
  for (InitScheme scheme : schemes) {
    for (const auto& structure : ordered_structures()) {
      if (static_cast<int>(structure.size()) > config.max_order) continue;
      KernelExpr e;
      e.init_scheme = scheme;
      for (BaseKind kind : structure)
        e.factors.push_back(init_factor(kind, scheme, config.stats, rng));
      pool.members.push_back(std::move(e));
    }
  }
  return pool;
}

AdditiveSpec additive_terms(int input_dim, int order) {
  if (order < 1 || order > input_dim)
    throw_config("additive order must satisfy 1 <= d <= D");
  AdditiveSpec spec;
  spec.input_dim = input_dim;
  spec.order = order;
  std::vector<int> cur(order);
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    spec.subsets.push_back(cur);
    int i = order - 1;
    while (i >= 0 && cur[i] == input_dim - order + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < order; ++j) cur[j] = cur[j - 1] + 1;
  }
  return spec;
}

KernelPool additive_pool(const BaseKernel& base, const AdditiveSpec& spec) {
  KernelPool pool;
  for (const auto& subset : spec.subsets) {
    KernelExpr e;
    BaseKernel b = base;
    b.dims = subset;
    e.factors.push_back(std::move(b));
    e.init_scheme = InitScheme::kStrong;
    pool.members.push_back(std::move(e));
  }
  return pool;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string dims_suffix(const KernelExpr& e) {
  const auto& dims = e.factors.front().dims;
  if (dims.empty()) return "";
  std::string s = " on inputs ";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += "x" + std::to_string(dims[i] + 1);
  }
  return s;
}

}  // namespace

std::string kind_name(BaseKind k) {
  switch (k) {
    case BaseKind::kSE: return "SE";
    case BaseKind::kLin: return "LIN";
    case BaseKind::kPer: return "PER";
  }
  return "?";
}

std::string structure_name(const KernelExpr& e) {
  std::string s;
  for (size_t i = 0; i < e.factors.size(); ++i) {
    if (i) s += "x";
    s += kind_name(e.factors[i].kind);
  }
  return s;
}

bool same_structure(const KernelExpr& a, const std::vector<BaseKind>& kinds) {
  if (a.factors.size() != kinds.size()) return false;
  std::vector<BaseKind> x, y(kinds);
  for (const auto& f : a.factors) x.push_back(f.kind);
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

std::string describe(const KernelExpr& e) {
  using K = BaseKind;
  auto count = [&](K k) {
    int c = 0;
    for (const auto& f : e.factors)
      if (f.kind == k) ++c;
    return c;
  };
  auto param = [&](K k, int which = 0) -> const BaseKernel& {
    int seen = 0;
    for (const auto& f : e.factors)
      if (f.kind == k && seen++ == which) return f;
    return e.factors.front();
  };
  const int n_se = count(K::kSE), n_lin = count(K::kLin), n_per = count(K::kPer);
  std::string text;
  if (n_per == 2) {
    text = "an interaction of periodic components (periods " +
           fmt(param(K::kPer, 0).period) + " and " + fmt(param(K::kPer, 1).period) + ")";
  } else if (n_per == 1 && n_se == 1) {
    text = "a periodic component whose shape varies smoothly (period " +
           fmt(param(K::kPer).period) + ")";
  } else if (n_per == 1 && n_lin == 1) {
    text = "a periodic component with linearly growing amplitude (period " +
           fmt(param(K::kPer).period) + ")";
  } else if (n_per == 1) {
    text = "a periodic component (period " + fmt(param(K::kPer).period) + ")";
  } else if (n_se == 2) {
    text = "a smoothly varying component (lengthscales " +
           fmt(param(K::kSE, 0).lengthscale) + " and " + fmt(param(K::kSE, 1).lengthscale) + ")";
  } else if (n_se == 1 && n_lin == 1) {
    text = "a smoothly varying component with linearly growing amplitude (lengthscale " +
           fmt(param(K::kSE).lengthscale) + ")";
  } else if (n_se == 1) {
    text = "a smoothly varying component (lengthscale " + fmt(param(K::kSE).lengthscale) + ")";
  } else if (n_lin == 2) {
    text = "a quadratic trend";
  } else {
    text = "a linear trend";
  }
  return text + dims_suffix(e);
}

}  // namespace hsgp::kernels
