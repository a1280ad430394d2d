#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>

#include "hsgp/gp_exact.hpp"
#include "hsgp/math_util.hpp"
#include "test_util.hpp"

using namespace hsgp;
using exact::GaussianPosterior;
using exact::WeightedKernel;
using kernels::BaseKind;
using kernels::KernelExpr;

namespace {

WeightedKernel se_per_kernel(double w_se = 1.0, double w_per = 1.0) {
  WeightedKernel wk;
  KernelExpr se;
  se.factors.push_back({BaseKind::kSE, 1.2, 1.0, 0.0, {}});
  KernelExpr per;
  per.factors.push_back({BaseKind::kPer, 1.0, 1.7, 0.0, {}});
  wk.pool.members = {se, per};
  wk.weights = Eigen::Vector2d(w_se, w_per);
  return wk;
}

GaussianPosterior random_gaussian(Rng& rng, int t, double scale = 1.0) {
  GaussianPosterior g;
  g.mean = testing::random_vector(rng, t);
  g.cov = testing::random_psd(rng, t, scale);
  return g;
}

}  // namespace

TEST_CASE("exact posterior interpolates a single point at tiny noise") {
  const auto wk = se_per_kernel();
  Eigen::MatrixXd x(1, 1);
  x << 0.5;
  Eigen::VectorXd y(1);
  y << 1.3;
  const auto post = exact::exact_posterior(wk, x, y, 1e-10, x);
  CHECK(post.mean(0) == doctest::Approx(1.3).epsilon(1e-8));
  CHECK(post.cov(0, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
}

TEST_CASE("exact posterior reverts to the prior far from data") {
  WeightedKernel wk;
  KernelExpr se;
  se.factors.push_back({BaseKind::kSE, 1.0, 1.0, 0.0, {}});
  wk.pool.members = {se};
  wk.weights = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd x(3, 1), xs(1, 1);
  x << 0.0, 0.5, 1.0;
  xs << 200.0;
  Eigen::VectorXd y(3);
  y << 1.0, -0.5, 0.7;
  const auto post = exact::exact_posterior(wk, x, y, 0.1, xs);
  CHECK(post.mean(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(post.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact posterior matches a literal transcription with explicit inverse") {
  Rng rng(9);
  const auto wk = se_per_kernel(1.1, 0.7);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 5, 1);
  const Eigen::MatrixXd xs = testing::random_matrix(rng, 4, 1);
  const Eigen::VectorXd y = testing::random_vector(rng, 5);
  const double sn2 = 0.3;
  const auto post = exact::exact_posterior(wk, x, y, sn2, xs);

  const Eigen::MatrixXd kxx = exact::weighted_gram(wk, x);
  const Eigen::MatrixXd ksx = exact::weighted_gram(wk, xs, x);
  const Eigen::MatrixXd kss = exact::weighted_gram(wk, xs);
  const Eigen::MatrixXd inv =
      (kxx + sn2 * Eigen::MatrixXd::Identity(5, 5)).inverse();
  const Eigen::VectorXd mean_ref = ksx * inv * y;
  const Eigen::MatrixXd cov_ref = kss - ksx * inv * ksx.transpose();
  CHECK((post.mean - mean_ref).norm() / mean_ref.norm() < 1e-8);
  CHECK((post.cov - cov_ref).norm() / std::max(cov_ref.norm(), 1e-12) < 1e-8);
}

TEST_CASE("posterior of the summed kernel equals posterior of the pre-summed gram") {
  // construction identity: the weighted-kernel path produces exactly the
  // K~ = sum w_i^2 K_i algebra
  Rng rng(10);
  const auto wk = se_per_kernel(1.2, 0.8);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 6, 1);
  const Eigen::VectorXd y = testing::random_vector(rng, 6);
  Eigen::MatrixXd presummed = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < wk.pool.size(); ++i)
    presummed += wk.weights(i) * wk.weights(i) * kernels::gram(wk.pool.members[i], x);
  CHECK((exact::weighted_gram(wk, x) - presummed).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("log marginal likelihood") {
  SUBCASE("zero kernel, unit noise, zero observation") {
    WeightedKernel wk;
    KernelExpr se;
    se.factors.push_back({BaseKind::kSE, 1.0, 1.0, 0.0, {}});
    wk.pool.members = {se};
    wk.weights = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd x(1, 1);
    x << 0.0;
    Eigen::VectorXd y(1);
    y << 0.0;
    CHECK(exact::log_marginal_likelihood(wk, x, y, 1.0) ==
          doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-12));
  }
  SUBCASE("permutation invariance") {
    Rng rng(12);
    const auto wk = se_per_kernel();
    Eigen::MatrixXd x = testing::random_matrix(rng, 6, 2);
    Eigen::VectorXd y = testing::random_vector(rng, 6);
    const double a = exact::log_marginal_likelihood(wk, x, y, 0.2);
    std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    Eigen::MatrixXd xp(6, 2);
    Eigen::VectorXd yp(6);
    for (int i = 0; i < 6; ++i) {
      xp.row(i) = x.row(perm[i]);
      yp(i) = y(perm[i]);
    }
    CHECK(exact::log_marginal_likelihood(wk, xp, yp, 0.2) == doctest::Approx(a).epsilon(1e-10));
  }
  SUBCASE("matches direct density evaluation via determinant") {
    Rng rng(13);
    const auto wk = se_per_kernel(0.9, 1.3);
    const Eigen::MatrixXd x = testing::random_matrix(rng, 4, 1);
    const Eigen::VectorXd y = testing::random_vector(rng, 4);
    const double sn2 = 0.4;
    Eigen::MatrixXd k = exact::weighted_gram(wk, x);
    k.diagonal().array() += sn2;
    const double direct = -0.5 * y.dot(k.inverse() * y) - 0.5 * std::log(k.determinant()) -
                          2.0 * kLog2Pi;
    CHECK(exact::log_marginal_likelihood(wk, x, y, sn2) == doctest::Approx(direct).epsilon(1e-10));
  }
  SUBCASE("likelihood peaks near the generative noise level") {
    const auto wk = se_per_kernel();
    Eigen::MatrixXd x(40, 1);
    for (int i = 0; i < 40; ++i) x(i, 0) = i * 0.2;
    const double sn2_true = 0.05;
    const Eigen::VectorXd y = exact::sample_gp(wk, x, sn2_true, 99);
    const double at_true = exact::log_marginal_likelihood(wk, x, y, sn2_true);
    CHECK(at_true > exact::log_marginal_likelihood(wk, x, y, sn2_true * 100.0));
    CHECK(at_true > exact::log_marginal_likelihood(wk, x, y, sn2_true / 100.0));
  }
}

TEST_CASE("gp sampling") {
  const auto wk = se_per_kernel();
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 0.7, 1.9;
  SUBCASE("deterministic given seed") {
    const Eigen::VectorXd a = exact::sample_gp(wk, x, 0.1, 42);
    const Eigen::VectorXd b = exact::sample_gp(wk, x, 0.1, 42);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd c = exact::sample_gp(wk, x, 0.1, 43);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("empirical covariance of many draws matches K + noise") {
    const double sn2 = 0.1;
    Eigen::MatrixXd target = exact::weighted_gram(wk, x);
    target.diagonal().array() += sn2;
    const int draws = 10000;
    Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(3, 3);
    for (int s = 0; s < draws; ++s) {
      const Eigen::VectorXd v = exact::sample_gp(wk, x, sn2, 1000 + s);
      emp += v * v.transpose();
    }
    emp /= draws;
    CHECK((emp - target).norm() / target.norm() < 0.05);
  }
  SUBCASE("zero kernel gives iid standard normals") {
    WeightedKernel wk0;
    KernelExpr se;
    se.factors.push_back({BaseKind::kSE, 1.0, 1.0, 0.0, {}});
    wk0.pool.members = {se};
    wk0.weights = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd xs(4, 1);
    xs << 0.0, 1.0, 2.0, 3.0;
    std::vector<double> samples;
    for (int s = 0; s < 2500; ++s) {
      const Eigen::VectorXd v = exact::sample_gp(wk0, xs, 1.0, 500 + s);
      for (int i = 0; i < 4; ++i) samples.push_back(v(i));
    }
    std::sort(samples.begin(), samples.end());
    double ks = 0.0;
    const double n = static_cast<double>(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
      const double cdf = 0.5 * std::erfc(-samples[i] / std::sqrt(2.0));
      ks = std::max(ks, std::abs(cdf - (i + 1) / n));
      ks = std::max(ks, std::abs(cdf - i / n));
    }
    CHECK(ks < 0.02);  // ~1.63/sqrt(1e4) at the 1% level
  }
}

TEST_CASE("wasserstein-2 between gaussians") {
  Rng rng(21);
  SUBCASE("identity and scalar cases") {
    const auto p = random_gaussian(rng, 4);
    CHECK(exact::w2_gaussian(p, p) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));

    GaussianPosterior a, b;
    a.mean = Eigen::VectorXd::Zero(1);
    a.cov = Eigen::MatrixXd::Ones(1, 1);
    b.mean = Eigen::VectorXd::Constant(1, 3.0);
    b.cov = Eigen::MatrixXd::Ones(1, 1);
    CHECK(exact::w2_gaussian(a, b) == doctest::Approx(3.0).epsilon(1e-12));

    b.mean = Eigen::VectorXd::Zero(1);
    b.cov = Eigen::MatrixXd::Constant(1, 1, 4.0);
    CHECK(exact::w2_gaussian(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("symmetry and triangle inequality on random triples") {
    for (int rep = 0; rep < 25; ++rep) {
      const auto p = random_gaussian(rng, 3);
      const auto q = random_gaussian(rng, 3);
      const auto r = random_gaussian(rng, 3);
      const double pq = exact::w2_gaussian(p, q);
      const double qp = exact::w2_gaussian(q, p);
      CHECK(pq == doctest::Approx(qp).epsilon(1e-8));
      CHECK(pq <= exact::w2_gaussian(p, r) + exact::w2_gaussian(r, q) + 1e-6);
    }
  }
}

TEST_CASE("gaussian KL divergence") {
  Rng rng(22);
  SUBCASE("identity and scalar shift") {
    const auto p = random_gaussian(rng, 3);
    CHECK(exact::kl_gaussian(p, p) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    GaussianPosterior a, b;
    a.mean = Eigen::VectorXd::Constant(1, 1.0);
    a.cov = Eigen::MatrixXd::Ones(1, 1);
    b.mean = Eigen::VectorXd::Zero(1);
    b.cov = Eigen::MatrixXd::Ones(1, 1);
    CHECK(exact::kl_gaussian(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("nonnegative on random pairs") {
    for (int rep = 0; rep < 100; ++rep) {
      const auto p = random_gaussian(rng, 3);
      const auto q = random_gaussian(rng, 3);
      CHECK(exact::kl_gaussian(p, q) >= -1e-10);
    }
  }
  SUBCASE("matches a Monte-Carlo estimate of E_P[log p - log q]") {
    Rng mc(23);
    const auto p = random_gaussian(mc, 3);
    const auto q = random_gaussian(mc, 3);
    const double kl = exact::kl_gaussian(p, q);
    const Eigen::MatrixXd lp = exact::chol_jitter(p.cov);
    const Eigen::MatrixXd lq = exact::chol_jitter(q.cov);
    const double logdet_p = 2.0 * lp.diagonal().array().log().sum();
    const double logdet_q = 2.0 * lq.diagonal().array().log().sum();
    double acc = 0.0;
    const int draws = 400000;
    for (int s = 0; s < draws; ++s) {
      const Eigen::VectorXd z = testing::random_vector(mc, 3);
      const Eigen::VectorXd x = p.mean + lp * z;
      const Eigen::VectorXd dq = lq.triangularView<Eigen::Lower>().solve(x - q.mean);
      const double logp = -0.5 * z.squaredNorm() - 0.5 * logdet_p - 1.5 * kLog2Pi;
      const double logq = -0.5 * dq.squaredNorm() - 0.5 * logdet_q - 1.5 * kLog2Pi;
      acc += logp - logq;
    }
    acc /= draws;
    CHECK(kl == doctest::Approx(acc).epsilon(0.01));
  }
}

TEST_CASE("top eigenvalues") {
  CHECK(exact::top_eigenvalues(Eigen::MatrixXd::Identity(3, 3), 2) ==
        Eigen::VectorXd::Ones(2));
  Eigen::MatrixXd d = Eigen::Vector3d(3.0, 2.0, 1.0).asDiagonal();
  const Eigen::VectorXd top = exact::top_eigenvalues(d, 2);
  CHECK(top(0) == doctest::Approx(3.0));
  CHECK(top(1) == doctest::Approx(2.0));

  SUBCASE("sum of all eigenvalues equals the trace") {
    Rng rng(31);
    const Eigen::MatrixXd k = testing::random_psd(rng, 6);
    const Eigen::VectorXd eigs = exact::top_eigenvalues(k, 6);
    CHECK(eigs.sum() == doctest::Approx(k.trace()).epsilon(1e-8));
    for (int i = 0; i < 6; ++i) CHECK(eigs(i) >= -1e-8 * k.norm());
    for (int i = 1; i < 6; ++i) CHECK(eigs(i) <= eigs(i - 1) + 1e-14);
  }
  SUBCASE("rejects non-symmetric input") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS(exact::top_eigenvalues(bad, 1), Error);
  }
}
