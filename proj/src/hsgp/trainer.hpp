#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "hsgp/gp_exact.hpp"
#include "hsgp/horseshoe.hpp"
#include "hsgp/kernels.hpp"
#include "hsgp/sparse_gp.hpp"

namespace hsgp::train {

enum class Likelihood { kGaussian, kBernoulli };

// How kernel weights are modeled: the Horseshoe variational state, a fixed
// vector, or unconstrained trainable log-weights with no prior.
enum class WeightMode { kHorseshoe, kFixed, kNoPrior };

enum class ModelKind { kMultiGroup, kSummedSingleGroup };

struct WeightState {
  WeightMode mode = WeightMode::kHorseshoe;
  horseshoe::HorseshoeState hs;
  Eigen::VectorXd fixed_w;
  Eigen::VectorXd log_w;
};

struct TrainingConfig {
  int iterations = 2000;
  int minibatch = 0;  // 0 = full batch
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  int mc_samples_eval = 8;
  double sigma_n2_init = 0.0;  // <= 0: 0.1 * var(y)
  bool optimize_inducing = true;
  bool train_hyperparams = true;
  bool train_sigma_n2 = true;
  Likelihood likelihood = Likelihood::kGaussian;

  void validate(int n) const;
};

// Trainable model: sparse structure + weight model + likelihood state.
// kMultiGroup keeps one inducing group per pool kernel; kSummedSingleGroup is
// the SVGP baseline with a single group over the weighted kernel sum.
struct Model {
  ModelKind kind = ModelKind::kMultiGroup;
  kernels::KernelPool pool;
  std::vector<svgp::InducingGroup> groups;
  WeightState weights;
  double sigma_n2 = 0.1;
  Likelihood likelihood = Likelihood::kGaussian;

  int pool_size() const { return pool.size(); }
  void validate() const;
};

struct ElboBreakdown {
  double expected_loglik = 0.0;
  double kl_inducing = 0.0;
  double kl_weights = 0.0;
  double elbo = 0.0;
};

// Flat-parameter bookkeeping. Only trained blocks appear; a frozen block has
// no slice at all.
struct ParamSlice {
  std::string name;
  int offset = 0;
  int len = 0;
};

struct ParamLayout {
  std::vector<ParamSlice> slices;
  int total = 0;

  const ParamSlice* find(const std::string& name) const;
};

ParamLayout build_layout(const Model& model, const TrainingConfig& cfg);
Eigen::VectorXd pack(const Model& model, const TrainingConfig& cfg);
void unpack_into_model(const Eigen::VectorXd& theta, const TrainingConfig& cfg, Model* model);

// Model factories ------------------------------------------------------------

Model make_multi_model(const kernels::KernelPool& pool, const Eigen::MatrixXd& x,
                       int m_per_group, std::uint64_t seed, WeightMode mode,
                       const Eigen::VectorXd& fixed_w = Eigen::VectorXd(),
                       double a_scale = 1.0, double b_scale = 1.0);
Model make_svgp_model(const kernels::KernelPool& pool, const Eigen::MatrixXd& x, int m_inducing,
                      std::uint64_t seed, const Eigen::VectorXd& w);

// Weights used at prediction / reporting time (mode-dependent point summary).
Eigen::VectorXd point_weights(const Model& model);

// Closed-form expected Gaussian log-likelihood of a variational marginal:
// scale * sum_j [ log N(y_j | mu_j, sigma_n2) - v_j / (2 sigma_n2) ]
double expected_loglik_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& y, double sigma_n2, double scale);

// Gauss-Hermite (20 nodes) expectation of log Bernoulli(y | sigmoid(f)) under
// f ~ N(mu_j, v_j), scaled for minibatching.
double expected_loglik_bernoulli(const Eigen::VectorXd& mu, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& y, double scale);

// One deterministic ELBO evaluation on a batch (rows of x/y), with fresh
// standard normals eps driving the weight sample.
ElboBreakdown elbo_step(const Model& model, const Eigen::MatrixXd& x_batch,
                        const Eigen::VectorXd& y_batch, double scale,
                        const Eigen::VectorXd& eps, const TrainingConfig& cfg);

// Reverse-mode gradient of the same ELBO with respect to every trained
// parameter, in layout order.
Eigen::VectorXd gradient(const Model& model, const Eigen::MatrixXd& x_batch,
                         const Eigen::VectorXd& y_batch, double scale,
                         const Eigen::VectorXd& eps, const TrainingConfig& cfg,
                         ElboBreakdown* breakdown = nullptr);

struct TraceRow {
  int iter = 0;
  ElboBreakdown breakdown;
};

struct TrainResult {
  Model model;
  std::vector<TraceRow> trace;
};

// Appendix-C loop: minibatch -> weight sample -> ELBO gradient -> Adam step ->
// auxiliary refresh. Deterministic given cfg.seed.
TrainResult train(const Model& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const TrainingConfig& cfg);

// Predictive marginals with point-summary weights for the mean; for the
// Horseshoe mode the variance additionally averages over mc_samples weight
// draws around the reported mean.
void predict(const Model& model, const Eigen::MatrixXd& xstar, int mc_samples,
             std::uint64_t seed, Eigen::VectorXd* mean, Eigen::VectorXd* var);

// Full-covariance posterior at the point-summary weights.
exact::GaussianPosterior predict_joint(const Model& model, const Eigen::MatrixXd& xstar);

}  // namespace hsgp::train
