#include <doctest.h>

#include <cmath>

#include "hsgp/ad.hpp"
#include "hsgp/tmat.hpp"
#include "test_util.hpp"

using namespace hsgp;

namespace {

// d/dx_i of f at x via central differences
template <class F>
std::vector<double> fd_grad(F f, std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

template <class F>
void check_grad(F f, const std::vector<double>& x, double tol = 1e-6) {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  std::vector<ad::Var> v;
  for (double xi : x) v.push_back(ad::make_leaf(tape, xi));
  const ad::Var out = f(v);
  const ad::Gradients g(tape.backward(out.index()));
  const auto gfd = fd_grad([&](const std::vector<double>& xx) {
    std::vector<ad::Var> cv(xx.begin(), xx.end());
    return ad::value(f(cv));
  }, x);
  for (size_t i = 0; i < x.size(); ++i) {
    CAPTURE(i);
    CHECK(g[v[i]] == doctest::Approx(gfd[i]).epsilon(tol).scale(1.0));
  }
}

}  // namespace

TEST_CASE("tape gradients match finite differences on composite expressions") {
  check_grad(
      [](const std::vector<ad::Var>& v) {
        using ad::exp;
        using ad::log;
        using ad::sin;
        using ad::sqrt;
        return exp(v[0] * v[1]) + sin(v[2]) / v[0] - log(v[1]) * sqrt(v[2]) + v[0] * 3.0 - 1.5;
      },
      {0.7, 1.3, 2.1});
  check_grad(
      [](const std::vector<ad::Var>& v) {
        ad::Var s(0.0);
        for (const auto& x : v) s += ad::softplus(x) * ad::cos(x);
        return s * s;
      },
      {-1.0, 0.3, 2.0, -0.2});
}

TEST_CASE("repeated use of one variable accumulates adjoints") {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  const ad::Var x = ad::make_leaf(tape, 1.7);
  const ad::Var y = x * x * x;  // y = x^3, dy/dx = 3x^2
  const ad::Gradients g(tape.backward(y.index()));
  CHECK(g[x] == doctest::Approx(3.0 * 1.7 * 1.7).epsilon(1e-12));
}

TEST_CASE("constants create no tape nodes") {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  const ad::Var a(2.0);
  const ad::Var b = a * 3.0 + ad::Var(1.0);
  CHECK(tape.size() == 0);
  CHECK(ad::value(b) == doctest::Approx(7.0));
  const ad::Var x = ad::make_leaf(tape, 1.0);
  const ad::Var c = x + b;
  CHECK(ad::value(c) == doctest::Approx(8.0));
  CHECK(tape.size() == 2);  // leaf + one addition
}

TEST_CASE("templated cholesky and solves agree with Eigen in double mode") {
  Rng rng(11);
  const int n = 8;
  const Eigen::MatrixXd k = testing::random_psd(rng, n, 2.0);
  TMat<double> a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = k(i, j);
  REQUIRE(cholesky_in_place(a));
  const Eigen::MatrixXd l_ref = Eigen::LLT<Eigen::MatrixXd>(k).matrixL();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) CHECK(a(i, j) == doctest::Approx(l_ref(i, j)).epsilon(1e-10));

  std::vector<double> b(n);
  for (auto& v : b) v = rng.normal();
  Eigen::VectorXd be = Eigen::Map<Eigen::VectorXd>(b.data(), n);
  std::vector<double> x = b;
  solve_lower_vec(a, x);
  solve_lower_transposed_vec(a, x);
  const Eigen::VectorXd x_ref = Eigen::LLT<Eigen::MatrixXd>(k).solve(be);
  for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(x_ref(i)).epsilon(1e-9));
}

TEST_CASE("gradient flows through a cholesky-based quadratic form") {
  // f(theta) = b^T (A(theta))^{-1} b with A = K + diag(softplus(theta))
  Rng rng(5);
  const int n = 5;
  const Eigen::MatrixXd k = testing::random_psd(rng, n, 1.0);
  std::vector<double> b(n);
  for (auto& v : b) v = rng.normal();

  auto f = [&](const std::vector<ad::Var>& th) {
    TMat<ad::Var> a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = ad::Var(k(i, j));
    for (int i = 0; i < n; ++i) a(i, i) += ad::softplus(th[i]);
    const bool ok = cholesky_in_place(a);
    REQUIRE(ok);
    std::vector<ad::Var> x(b.begin(), b.end());
    solve_lower_vec(a, x);
    ad::Var s(0.0);
    for (const auto& xi : x) s += xi * xi;  // b^T A^-1 b via ||L^-1 b||^2
    return s;
  };
  check_grad(f, {0.2, -0.5, 1.0, 0.0, 0.7}, 1e-5);
}
