#include "hsgp/trainer.hpp"

#include <cmath>

#include "hsgp/ad.hpp"
#include "hsgp/errors.hpp"
#include "hsgp/math_util.hpp"
#include "hsgp/rng.hpp"
#include "hsgp/tmat.hpp"

namespace hsgp::train {

void TrainingConfig::validate(int n) const {
  if (iterations < 0) throw_config("training: iterations must be nonnegative");
  if (minibatch < 0 || minibatch > n) throw_config("training: minibatch must satisfy 0 <= b <= N");
  if (!(learning_rate > 0.0)) throw_config("training: learning rate must be positive");
  if (mc_samples_eval < 1) throw_config("training: mc_samples_eval must be >= 1");
}

void Model::validate() const {
  const int m = pool.size();
  if (m == 0) throw_config("model: empty kernel pool");
  const size_t expected_groups = (kind == ModelKind::kMultiGroup) ? m : 1;
  if (groups.size() != expected_groups) throw_config("model: wrong number of inducing groups");
  for (const auto& g : groups) g.validate();
  switch (weights.mode) {
    case WeightMode::kHorseshoe:
      if (weights.hs.size() != m) throw_config("model: horseshoe state size mismatch");
      break;
    case WeightMode::kFixed:
      if (weights.fixed_w.size() != m) throw_config("model: fixed weight size mismatch");
      break;
    case WeightMode::kNoPrior:
      if (weights.log_w.size() != m) throw_config("model: log weight size mismatch");
      break;
  }
  if (likelihood == Likelihood::kGaussian && !(sigma_n2 > 0.0))
    throw_config("model: sigma_n2 must be positive");
}

// --- flat parameter layout ---------------------------------------------------

namespace {

int tril_len(int m) { return m * (m + 1) / 2; }

int factor_param_count(const kernels::BaseKernel& f) {
  switch (f.kind) {
    case kernels::BaseKind::kSE: return 1;   // log lengthscale
    case kernels::BaseKind::kPer: return 2;  // log lengthscale, log period
    case kernels::BaseKind::kLin: return 1;  // offset
  }
  return 0;
}

bool train_sigma(const Model& model, const TrainingConfig& cfg) {
  return model.likelihood == Likelihood::kGaussian && cfg.train_sigma_n2;
}

}  // namespace

const ParamSlice* ParamLayout::find(const std::string& name) const {
  for (const auto& s : slices)
    if (s.name == name) return &s;
  return nullptr;
}

ParamLayout build_layout(const Model& model, const TrainingConfig& cfg) {
  ParamLayout layout;
  auto add = [&](const std::string& name, int len) {
    layout.slices.push_back({name, layout.total, len});
    layout.total += len;
  };
  for (size_t gi = 0; gi < model.groups.size(); ++gi) {
    const auto& g = model.groups[gi];
    const std::string p = "group" + std::to_string(gi);
    add(p + ".m", g.size());
    add(p + ".l", tril_len(g.size()));
    if (cfg.optimize_inducing) add(p + ".z", g.size() * static_cast<int>(g.z.cols()));
  }
  if (cfg.train_hyperparams) {
    for (int ki = 0; ki < model.pool.size(); ++ki) {
      const auto& e = model.pool.members[ki];
      int count = 0;
      for (const auto& f : e.factors) count += factor_param_count(f);
      add("kernel" + std::to_string(ki), count);
    }
  }
  switch (model.weights.mode) {
    case WeightMode::kHorseshoe:
      add("hs.mu_tau", 1);
      add("hs.rho_tau", 1);
      add("hs.mu_lambda", model.pool_size());
      add("hs.rho_lambda", model.pool_size());
      break;
    case WeightMode::kNoPrior:
      add("w.log", model.pool_size());
      break;
    case WeightMode::kFixed:
      break;
  }
  if (train_sigma(model, cfg)) add("log_sigma_n2", 1);
  return layout;
}

Eigen::VectorXd pack(const Model& model, const TrainingConfig& cfg) {
  const ParamLayout layout = build_layout(model, cfg);
  Eigen::VectorXd theta(layout.total);
  int o = 0;
  for (const auto& g : model.groups) {
    const int m = g.size();
    for (int i = 0; i < m; ++i) theta(o++) = g.m(i);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= i; ++j)
        theta(o++) = (i == j) ? softplus_inv(g.l(i, i)) : g.l(i, j);
    if (cfg.optimize_inducing)
      for (int i = 0; i < m; ++i)
        for (int d = 0; d < g.z.cols(); ++d) theta(o++) = g.z(i, d);
  }
  if (cfg.train_hyperparams) {
    for (const auto& e : model.pool.members) {
      for (const auto& f : e.factors) {
        switch (f.kind) {
          case kernels::BaseKind::kSE:
            theta(o++) = std::log(f.lengthscale);
            break;
          case kernels::BaseKind::kPer:
            theta(o++) = std::log(f.lengthscale);
            theta(o++) = std::log(f.period);
            break;
          case kernels::BaseKind::kLin:
            theta(o++) = f.offset;
            break;
        }
      }
    }
  }
  switch (model.weights.mode) {
    case WeightMode::kHorseshoe: {
      const auto& hs = model.weights.hs;
      theta(o++) = hs.mu_tau;
      theta(o++) = softplus_inv(hs.sigma_tau);
      for (int i = 0; i < hs.size(); ++i) theta(o++) = hs.mu_lambda(i);
      for (int i = 0; i < hs.size(); ++i) theta(o++) = softplus_inv(hs.sigma_lambda(i));
      break;
    }
    case WeightMode::kNoPrior:
      for (int i = 0; i < model.pool_size(); ++i) theta(o++) = model.weights.log_w(i);
      break;
    case WeightMode::kFixed:
      break;
  }
  if (train_sigma(model, cfg)) theta(o++) = std::log(model.sigma_n2);
  return theta;
}

void unpack_into_model(const Eigen::VectorXd& theta, const TrainingConfig& cfg, Model* model) {
  int o = 0;
  for (auto& g : model->groups) {
    const int m = g.size();
    for (int i = 0; i < m; ++i) g.m(i) = theta(o++);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= i; ++j)
        g.l(i, j) = (i == j) ? softplus(theta(o++)) : theta(o++);
    if (cfg.optimize_inducing)
      for (int i = 0; i < m; ++i)
        for (int d = 0; d < g.z.cols(); ++d) g.z(i, d) = theta(o++);
  }
  if (cfg.train_hyperparams) {
    for (auto& e : model->pool.members) {
      for (auto& f : e.factors) {
        switch (f.kind) {
          case kernels::BaseKind::kSE:
            f.lengthscale = std::exp(theta(o++));
            break;
          case kernels::BaseKind::kPer:
            f.lengthscale = std::exp(theta(o++));
            f.period = std::exp(theta(o++));
            break;
          case kernels::BaseKind::kLin:
            f.offset = theta(o++);
            break;
        }
      }
    }
  }
  switch (model->weights.mode) {
    case WeightMode::kHorseshoe: {
      auto& hs = model->weights.hs;
      hs.mu_tau = theta(o++);
      hs.sigma_tau = softplus(theta(o++));
      for (int i = 0; i < hs.size(); ++i) hs.mu_lambda(i) = theta(o++);
      for (int i = 0; i < hs.size(); ++i) hs.sigma_lambda(i) = softplus(theta(o++));
      break;
    }
    case WeightMode::kNoPrior:
      for (int i = 0; i < model->pool_size(); ++i) model->weights.log_w(i) = theta(o++);
      break;
    case WeightMode::kFixed:
      break;
  }
  if (train_sigma(*model, cfg)) model->sigma_n2 = std::exp(theta(o++));
}

// --- typed parameter view for the generic forward pass -----------------------

namespace {

template <class S>
struct GroupParams {
  std::vector<S> m;
  TMat<S> l;  // full lower triangle, softplus already applied to the diagonal
  TMat<S> z;
};

template <class S>
struct ModelParams {
  std::vector<GroupParams<S>> groups;
  std::vector<kernels::ExprParams<S>> exprs;
  S mu_tau{0.0}, sigma_tau{0.0};
  std::vector<S> mu_lambda, sigma_lambda;
  std::vector<S> log_w;
  S sigma_n2{0.0};
};

// Reads trained blocks from theta in layout order; frozen blocks come from the
// model as plain constants.
template <class S>
ModelParams<S> unpack_params(const Model& model, const TrainingConfig& cfg,
                             const std::vector<S>& theta) {
  using ad::softplus;
  ModelParams<S> p;
  size_t o = 0;
  auto next = [&]() -> const S& { return theta[o++]; };

  for (const auto& g : model.groups) {
    const int m = g.size();
    const int dim = static_cast<int>(g.z.cols());
    GroupParams<S> gp;
    gp.m.reserve(m);
    for (int i = 0; i < m; ++i) gp.m.push_back(next());
    gp.l = TMat<S>(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j <= i; ++j) {
        const S& raw = next();
        gp.l(i, j) = (i == j) ? softplus(raw) : raw;
      }
      for (int j = i + 1; j < m; ++j) gp.l(i, j) = S(0.0);
    }
    gp.z = TMat<S>(m, dim);
    if (cfg.optimize_inducing) {
      for (int i = 0; i < m; ++i)
        for (int d = 0; d < dim; ++d) gp.z(i, d) = next();
    } else {
      for (int i = 0; i < m; ++i)
        for (int d = 0; d < dim; ++d) gp.z(i, d) = S(g.z(i, d));
    }
    p.groups.push_back(std::move(gp));
  }

  p.exprs.reserve(model.pool.size());
  for (const auto& e : model.pool.members) {
    kernels::ExprParams<S> ep;
    for (const auto& f : e.factors) {
      kernels::BaseParams<S> bp;
      bp.kind = f.kind;
      bp.dims = f.dims;
      if (cfg.train_hyperparams) {
        switch (f.kind) {
          case kernels::BaseKind::kSE:
            bp.lengthscale = ad::exp(next());
            bp.period = S(1.0);
            bp.offset = S(0.0);
            break;
          case kernels::BaseKind::kPer:
            bp.lengthscale = ad::exp(next());
            bp.period = ad::exp(next());
            bp.offset = S(0.0);
            break;
          case kernels::BaseKind::kLin:
            bp.offset = next();
            bp.lengthscale = S(1.0);
            bp.period = S(1.0);
            break;
        }
      } else {
        bp.lengthscale = S(f.lengthscale);
        bp.period = S(f.period);
        bp.offset = S(f.offset);
      }
      ep.factors.push_back(std::move(bp));
    }
    p.exprs.push_back(std::move(ep));
  }

  switch (model.weights.mode) {
    case WeightMode::kHorseshoe: {
      p.mu_tau = next();
      p.sigma_tau = softplus(next());
      for (int i = 0; i < model.pool_size(); ++i) p.mu_lambda.push_back(next());
      for (int i = 0; i < model.pool_size(); ++i) p.sigma_lambda.push_back(softplus(next()));
      break;
    }
    case WeightMode::kNoPrior:
      for (int i = 0; i < model.pool_size(); ++i) p.log_w.push_back(next());
      break;
    case WeightMode::kFixed:
      break;
  }
  p.sigma_n2 = train_sigma(model, cfg) ? ad::exp(next()) : S(model.sigma_n2);
  return p;
}

// exp that works for both scalar types inside unpack_params
template <class S>
S ad_exp(const S& x) {
  using ad::exp;
  using std::exp;
  return exp(x);
}

template <class S>
std::vector<S> compute_weights(const Model& model, const ModelParams<S>& p,
                               const Eigen::VectorXd& eps) {
  using ad::exp;
  using std::exp;
  const int m = model.pool_size();
  std::vector<S> w;
  w.reserve(m);
  switch (model.weights.mode) {
    case WeightMode::kHorseshoe: {
      if (eps.size() != m) throw_config("elbo: eps length must equal pool size");
      for (int i = 0; i < m; ++i)
        w.push_back(exp(p.mu_tau + p.mu_lambda[i] + S(eps(i)) * (p.sigma_tau + p.sigma_lambda[i])));
      break;
    }
    case WeightMode::kFixed:
      for (int i = 0; i < m; ++i) w.push_back(S(model.weights.fixed_w(i)));
      break;
    case WeightMode::kNoPrior:
      for (int i = 0; i < m; ++i) w.push_back(exp(p.log_w[i]));
      break;
  }
  return w;
}

// Cholesky of a kernel gram with the jitter ladder. Failed attempts leave
// dead nodes on the tape, which is harmless.
template <class S>
TMat<S> chol_gram_ladder(const TMat<S>& kuu) {
  using ad::value;
  const int m = kuu.rows();
  S diag_mean(0.0);
  for (int i = 0; i < m; ++i) diag_mean += kuu(i, i);
  diag_mean = diag_mean / S(static_cast<double>(m));
  for (double factor : {1e-6, 1e-5, 1e-4}) {
    TMat<S> a = kuu;
    for (int i = 0; i < m; ++i) a(i, i) += S(factor) * diag_mean;
    if (cholesky_in_place(a)) return a;
  }
  throw_numeric("elbo: K_uu factorization failed after jitter escalation");
}

// Per-group contribution to the batch marginal and the inducing KL.
template <class S>
void accumulate_group(const kernels::ExprParams<S>& expr, const GroupParams<S>& g,
                      const S& w, const Eigen::MatrixXd& xb, std::vector<S>* mean,
                      std::vector<S>* var, S* kl_u) {
  using ad::log;
  using std::log;
  const int m = static_cast<int>(g.m.size());
  const int b = static_cast<int>(xb.rows());
  const int dim = static_cast<int>(xb.cols());
  const Eigen::MatrixXd xrows = xb.transpose();  // columns are points

  TMat<S> kuu(m, m);
  for (int i = 0; i < m; ++i) {
    kuu(i, i) = kernels::eval_expr_diag_t(expr, g.z.row(i), dim);
    for (int j = i + 1; j < m; ++j) {
      const S v = kernels::eval_expr_t(expr, g.z.row(i), g.z.row(j), dim);
      kuu(i, j) = v;
      kuu(j, i) = v;
    }
  }
  const TMat<S> lk = chol_gram_ladder(kuu);

  TMat<S> a(m, b);  // starts as K_uf
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < b; ++j)
      a(i, j) = kernels::eval_expr_t(expr, g.z.row(i), xrows.col(j).data(), dim);
  solve_lower_mat(lk, a);  // L^-1 K_uf
  TMat<S> bm = a;
  solve_lower_transposed_mat(lk, bm);  // K_uu^-1 K_uf

  std::vector<S> lm = g.m;
  solve_lower_vec(lk, lm);

  const S w2 = w * w;
  for (int j = 0; j < b; ++j) {
    S mu_j(0.0), a2(0.0);
    for (int i = 0; i < m; ++i) {
      mu_j += a(i, j) * lm[i];
      a2 += a(i, j) * a(i, j);
    }
    // (L_S^T K^-1 k_u)_r = sum_k L_S(k, r) bm(k, j), k >= r
    S s2(0.0);
    for (int r = 0; r < m; ++r) {
      S acc(0.0);
      for (int k = r; k < m; ++k) acc += g.l(k, r) * bm(k, j);
      s2 += acc * acc;
    }
    const S kd = kernels::eval_expr_diag_t(expr, xrows.col(j).data(), dim);
    (*mean)[j] += w * mu_j;
    (*var)[j] += w2 * (kd - a2 + s2);
  }

  // KL(N(m, S) || N(0, K_uu))
  TMat<S> c = g.l;
  solve_lower_mat(lk, c);
  S tr(0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) tr += c(i, j) * c(i, j);
  S mkm(0.0);
  for (int i = 0; i < m; ++i) mkm += lm[i] * lm[i];
  S logdet(0.0);
  for (int i = 0; i < m; ++i) logdet += log(lk(i, i)) - log(g.l(i, i));
  *kl_u += S(0.5) * (tr + mkm - S(static_cast<double>(m))) + logdet;
}

// Same computation for the single-group baseline over the summed kernel.
template <class S>
void accumulate_summed(const std::vector<kernels::ExprParams<S>>& exprs,
                       const GroupParams<S>& g, const std::vector<S>& w,
                       const Eigen::MatrixXd& xb, std::vector<S>* mean, std::vector<S>* var,
                       S* kl_u) {
  using ad::log;
  using std::log;
  const int m = static_cast<int>(g.m.size());
  const int b = static_cast<int>(xb.rows());
  const int dim = static_cast<int>(xb.cols());
  const int nk = static_cast<int>(exprs.size());
  const Eigen::MatrixXd xrows = xb.transpose();

  std::vector<S> w2(nk, S(0.0));
  for (int k = 0; k < nk; ++k) w2[k] = w[k] * w[k];

  auto ksum = [&](const auto* xa, const auto* xbp) {
    S v(0.0);
    for (int k = 0; k < nk; ++k) v += w2[k] * kernels::eval_expr_t(exprs[k], xa, xbp, dim);
    return v;
  };
  auto ksum_diag = [&](const auto* xa) {
    S v(0.0);
    for (int k = 0; k < nk; ++k) v += w2[k] * kernels::eval_expr_diag_t(exprs[k], xa, dim);
    return v;
  };

  TMat<S> kuu(m, m);
  for (int i = 0; i < m; ++i) {
    kuu(i, i) = ksum_diag(g.z.row(i));
    for (int j = i + 1; j < m; ++j) {
      const S v = ksum(g.z.row(i), g.z.row(j));
      kuu(i, j) = v;
      kuu(j, i) = v;
    }
  }
  const TMat<S> lk = chol_gram_ladder(kuu);

  TMat<S> a(m, b);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < b; ++j) a(i, j) = ksum(g.z.row(i), xrows.col(j).data());
  solve_lower_mat(lk, a);
  TMat<S> bm = a;
  solve_lower_transposed_mat(lk, bm);

  std::vector<S> lm = g.m;
  solve_lower_vec(lk, lm);

  for (int j = 0; j < b; ++j) {
    S mu_j(0.0), a2(0.0);
    for (int i = 0; i < m; ++i) {
      mu_j += a(i, j) * lm[i];
      a2 += a(i, j) * a(i, j);
    }
    S s2(0.0);
    for (int r = 0; r < m; ++r) {
      S acc(0.0);
      for (int k = r; k < m; ++k) acc += g.l(k, r) * bm(k, j);
      s2 += acc * acc;
    }
    (*mean)[j] += mu_j;
    (*var)[j] += ksum_diag(xrows.col(j).data()) - a2 + s2;
  }

  TMat<S> c = g.l;
  solve_lower_mat(lk, c);
  S tr(0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) tr += c(i, j) * c(i, j);
  S mkm(0.0);
  for (int i = 0; i < m; ++i) mkm += lm[i] * lm[i];
  S logdet(0.0);
  for (int i = 0; i < m; ++i) logdet += log(lk(i, i)) - log(g.l(i, i));
  *kl_u += S(0.5) * (tr + mkm - S(static_cast<double>(m))) + logdet;
}

const GaussHermite& gh20() {
  static const GaussHermite gh = gauss_hermite(20);
  return gh;
}

template <class S>
S log_sigmoid(const S& z) {
  using ad::softplus;
  return S(0.0) - softplus(S(0.0) - z);
}

template <class S>
S elbo_forward(const Model& model, const TrainingConfig& cfg, const ModelParams<S>& p,
               const Eigen::MatrixXd& xb, const Eigen::VectorXd& yb, double scale,
               const Eigen::VectorXd& eps, S* out_ell, S* out_klu, S* out_klw) {
  using ad::log;
  using ad::sqrt;
  using std::log;
  using std::sqrt;
  const int b = static_cast<int>(xb.rows());
  const std::vector<S> w = compute_weights(model, p, eps);

  std::vector<S> mean(b, S(0.0)), var(b, S(0.0));
  S kl_u(0.0);
  if (model.kind == ModelKind::kMultiGroup) {
    for (int i = 0; i < model.pool_size(); ++i)
      accumulate_group(p.exprs[i], p.groups[i], w[i], xb, &mean, &var, &kl_u);
  } else {
    accumulate_summed(p.exprs, p.groups[0], w, xb, &mean, &var, &kl_u);
  }

  S ell(0.0);
  if (model.likelihood == Likelihood::kGaussian) {
    const S inv2 = S(0.5) / p.sigma_n2;
    const S log_norm = S(-0.5) * (S(kLog2Pi) + log(p.sigma_n2));
    for (int j = 0; j < b; ++j) {
      const S r = S(yb(j)) - mean[j];
      ell += log_norm - r * r * inv2 - var[j] * inv2;
    }
  } else {
    const auto& gh = gh20();
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
    for (int j = 0; j < b; ++j) {
      if (yb(j) != 0.0 && yb(j) != 1.0) throw_config("bernoulli likelihood: y must be 0 or 1");
      const double sign = 2.0 * yb(j) - 1.0;
      const S sd = sqrt(S(2.0) * var[j] + S(1e-12));
      S acc(0.0);
      for (size_t q = 0; q < gh.nodes.size(); ++q) {
        const S f = mean[j] + sd * S(gh.nodes[q]);
        acc += S(gh.weights[q]) * log_sigmoid(S(sign) * f);
      }
      ell += S(inv_sqrt_pi) * acc;
    }
  }
  ell = S(scale) * ell;

  S kl_w(0.0);
  if (model.weights.mode == WeightMode::kHorseshoe)
    kl_w = horseshoe::kl_weights_t(p.mu_tau, p.sigma_tau, p.mu_lambda, p.sigma_lambda,
                                   model.weights.hs);

  if (out_ell) *out_ell = ell;
  if (out_klu) *out_klu = kl_u;
  if (out_klw) *out_klw = kl_w;
  return ell - kl_u - kl_w;
}

}  // namespace

// --- factories ---------------------------------------------------------------

Model make_multi_model(const kernels::KernelPool& pool, const Eigen::MatrixXd& x,
                       int m_per_group, std::uint64_t seed, WeightMode mode,
                       const Eigen::VectorXd& fixed_w, double a_scale, double b_scale) {
  Model model;
  model.kind = ModelKind::kMultiGroup;
  model.pool = pool;
  model.groups = svgp::init_groups(pool, x, m_per_group, seed);
  model.weights.mode = mode;
  switch (mode) {
    case WeightMode::kHorseshoe:
      model.weights.hs = horseshoe::init_state(pool.size(), a_scale, b_scale);
      break;
    case WeightMode::kFixed:
      model.weights.fixed_w =
          fixed_w.size() ? fixed_w : Eigen::VectorXd::Ones(pool.size()).eval();
      if (model.weights.fixed_w.size() != pool.size())
        throw_config("make_multi_model: fixed weight size mismatch");
      break;
    case WeightMode::kNoPrior:
      model.weights.log_w = Eigen::VectorXd::Zero(pool.size());
      break;
  }
  return model;
}

Model make_svgp_model(const kernels::KernelPool& pool, const Eigen::MatrixXd& x, int m_inducing,
                      std::uint64_t seed, const Eigen::VectorXd& w) {
  Model model;
  model.kind = ModelKind::kSummedSingleGroup;
  model.pool = pool;
  model.weights.mode = WeightMode::kFixed;
  model.weights.fixed_w = w.size() ? w : Eigen::VectorXd::Ones(pool.size()).eval();
  model.groups = {svgp::init_single_group(pool, model.weights.fixed_w, x, m_inducing, seed)};
  return model;
}

Eigen::VectorXd point_weights(const Model& model) {
  switch (model.weights.mode) {
    case WeightMode::kHorseshoe: return horseshoe::weight_summary(model.weights.hs);
    case WeightMode::kFixed: return model.weights.fixed_w;
    case WeightMode::kNoPrior: return model.weights.log_w.array().exp();
  }
  return {};
}

// --- public operations --------------------------------------------------------

double expected_loglik_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& y, double sigma_n2, double scale) {
  if (mu.size() != v.size() || mu.size() != y.size())
    throw_config("expected_loglik_gaussian: length mismatch");
  if (!(sigma_n2 > 0.0)) throw_config("expected_loglik_gaussian: sigma_n2 must be positive");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double r = y(j) - mu(j);
    acc += -0.5 * (kLog2Pi + std::log(sigma_n2)) - r * r / (2.0 * sigma_n2) -
           v(j) / (2.0 * sigma_n2);
  }
  return scale * acc;
}

double expected_loglik_bernoulli(const Eigen::VectorXd& mu, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& y, double scale) {
  if (mu.size() != v.size() || mu.size() != y.size())
    throw_config("expected_loglik_bernoulli: length mismatch");
  const auto& gh = gh20();
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    if (y(j) != 0.0 && y(j) != 1.0) throw_config("expected_loglik_bernoulli: y must be 0 or 1");
    const double sign = 2.0 * y(j) - 1.0;
    const double sd = std::sqrt(2.0 * v(j) + 1e-12);
    double s = 0.0;
    for (size_t q = 0; q < gh.nodes.size(); ++q) {
      const double f = mu(j) + sd * gh.nodes[q];
      s += gh.weights[q] * log_sigmoid(sign * f);
    }
    acc += inv_sqrt_pi * s;
  }
  return scale * acc;
}

ElboBreakdown elbo_step(const Model& model, const Eigen::MatrixXd& x_batch,
                        const Eigen::VectorXd& y_batch, double scale,
                        const Eigen::VectorXd& eps, const TrainingConfig& cfg) {
  model.validate();
  const std::vector<double> theta = [&] {
    const Eigen::VectorXd t = pack(model, cfg);
    return std::vector<double>(t.data(), t.data() + t.size());
  }();
  const ModelParams<double> p = unpack_params<double>(model, cfg, theta);
  ElboBreakdown bd;
  double ell, klu, klw;
  bd.elbo = elbo_forward<double>(model, cfg, p, x_batch, y_batch, scale, eps, &ell, &klu, &klw);
  bd.expected_loglik = ell;
  bd.kl_inducing = klu;
  bd.kl_weights = klw;
  return bd;
}

Eigen::VectorXd gradient(const Model& model, const Eigen::MatrixXd& x_batch,
                         const Eigen::VectorXd& y_batch, double scale,
                         const Eigen::VectorXd& eps, const TrainingConfig& cfg,
                         ElboBreakdown* breakdown) {
  model.validate();
  const Eigen::VectorXd theta = pack(model, cfg);
  ad::Tape tape;
  tape.reserve(1 << 20);
  ad::TapeScope scope(tape);
  std::vector<ad::Var> leaves;
  leaves.reserve(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) leaves.push_back(ad::make_leaf(tape, theta(i)));
  const ModelParams<ad::Var> p = unpack_params<ad::Var>(model, cfg, leaves);
  ad::Var ell, klu, klw;
  const ad::Var elbo =
      elbo_forward<ad::Var>(model, cfg, p, x_batch, y_batch, scale, eps, &ell, &klu, &klw);
  if (!std::isfinite(elbo.value())) throw_numeric("gradient: non-finite ELBO");
  if (breakdown) {
    breakdown->expected_loglik = ell.value();
    breakdown->kl_inducing = klu.value();
    breakdown->kl_weights = klw.value();
    breakdown->elbo = elbo.value();
  }
  const ad::Gradients g(tape.backward(elbo.index()));
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    grad(i) = g[leaves[i]];
    if (!std::isfinite(grad(i))) throw_numeric("gradient: non-finite entry");
  }
  return grad;
}

// --- training loop -------------------------------------------------------------

namespace {

struct Adam {
  Eigen::VectorXd m, v;
  int t = 0;
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit Adam(int n, double lr_in) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), lr(lr_in) {}

  // ascent step
  void step(const Eigen::VectorXd& g, Eigen::VectorXd* theta) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 / (1.0 - std::pow(beta1, t));
    const double c2 = 1.0 / (1.0 - std::pow(beta2, t));
    *theta += lr * (c1 * m.array() / ((c2 * v.array()).sqrt() + eps)).matrix();
  }
};

class BatchSampler {
 public:
  BatchSampler(int n, int batch, Rng* rng) : n_(n), batch_(batch <= 0 ? n : batch), rng_(rng) {
    idx_.resize(n);
    std::iota(idx_.begin(), idx_.end(), 0);
    pos_ = n_;  // force a shuffle on first use
  }

  std::vector<int> next() {
    if (pos_ >= n_) {
      rng_->shuffle(idx_);
      pos_ = 0;
    }
    const int take = std::min(batch_, n_ - pos_);
    std::vector<int> out(idx_.begin() + pos_, idx_.begin() + pos_ + take);
    pos_ += take;
    return out;
  }

 private:
  int n_;
  int batch_;
  Rng* rng_;
  std::vector<int> idx_;
  int pos_;
};

}  // namespace

TrainResult train(const Model& model_in, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const TrainingConfig& cfg) {
  const int n = static_cast<int>(x.rows());
  cfg.validate(n);
  Model model = model_in;
  model.validate();
  TrainResult result;
  if (cfg.iterations == 0) {
    result.model = model;
    return result;
  }

  Eigen::VectorXd theta = pack(model, cfg);
  Adam adam(static_cast<int>(theta.size()), cfg.learning_rate);
  Rng rng(cfg.seed);
  BatchSampler sampler(n, cfg.minibatch, &rng);
  const int m = model.pool_size();

  result.trace.reserve(cfg.iterations);
  for (int it = 1; it <= cfg.iterations; ++it) {
    const std::vector<int> batch = sampler.next();
    Eigen::MatrixXd xb(batch.size(), x.cols());
    Eigen::VectorXd yb(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      xb.row(static_cast<Eigen::Index>(i)) = x.row(batch[i]);
      yb(static_cast<Eigen::Index>(i)) = y(batch[i]);
    }
    const double scale = static_cast<double>(n) / static_cast<double>(batch.size());

    Eigen::VectorXd eps(model.weights.mode == WeightMode::kHorseshoe ? m : 0);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();

    ElboBreakdown bd;
    Eigen::VectorXd g;
    try {
      g = gradient(model, xb, yb, scale, eps, cfg, &bd);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kNumeric)
        throw_numeric("training diverged at iteration " + std::to_string(it) + ": " + e.what());
      throw;
    }
    result.trace.push_back({it, bd});

    adam.step(g, &theta);
    unpack_into_model(theta, cfg, &model);
    if (model.weights.mode == WeightMode::kHorseshoe)
      model.weights.hs = horseshoe::update_aux(model.weights.hs);
  }
  result.model = std::move(model);
  return result;
}

// --- prediction ----------------------------------------------------------------

namespace {

void predict_with_weights(const Model& model, const Eigen::VectorXd& w,
                          const Eigen::MatrixXd& xstar, Eigen::VectorXd* mean,
                          Eigen::VectorXd* var) {
  if (model.kind == ModelKind::kMultiGroup) {
    svgp::MultiSvgpModel view{model.pool, model.groups};
    svgp::marginal_predictive_diag(view, w, xstar, mean, var);
  } else {
    svgp::SvgpBaseline view{model.pool, model.groups[0]};
    const auto post = svgp::svgp_predictive(view, w, xstar);
    *mean = post.mean;
    *var = post.cov.diagonal();
  }
}

}  // namespace

void predict(const Model& model, const Eigen::MatrixXd& xstar, int mc_samples,
             std::uint64_t seed, Eigen::VectorXd* mean, Eigen::VectorXd* var) {
  model.validate();
  const Eigen::VectorXd w_hat = point_weights(model);
  predict_with_weights(model, w_hat, xstar, mean, var);
  if (model.weights.mode != WeightMode::kHorseshoe || mc_samples <= 1) return;

  // variance: second moment around the reported mean, averaged over draws
  Rng rng(seed);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(xstar.rows());
  for (int s = 0; s < mc_samples; ++s) {
    Eigen::VectorXd eps(model.pool_size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
    const Eigen::VectorXd w = horseshoe::sample_weights(model.weights.hs, eps);
    Eigen::VectorXd m_s, v_s;
    predict_with_weights(model, w, xstar, &m_s, &v_s);
    acc += v_s + (m_s - *mean).cwiseAbs2();
  }
  *var = acc / mc_samples;
}

exact::GaussianPosterior predict_joint(const Model& model, const Eigen::MatrixXd& xstar) {
  model.validate();
  const Eigen::VectorXd w_hat = point_weights(model);
  if (model.kind == ModelKind::kMultiGroup) {
    svgp::MultiSvgpModel view{model.pool, model.groups};
    return svgp::marginal_predictive(view, w_hat, xstar);
  }
  svgp::SvgpBaseline view{model.pool, model.groups[0]};
  return svgp::svgp_predictive(view, w_hat, xstar);
}

}  // namespace hsgp::train
