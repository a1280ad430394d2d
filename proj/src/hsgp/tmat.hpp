#pragma once

#include <cassert>
#include <vector>

#include "hsgp/ad.hpp"

namespace hsgp {

// Minimal dense row-major matrix usable with double or ad::Var scalars.
// Sized for the sparse-model training path (a few hundred rows at most);
// all heavy double-only algebra lives on Eigen instead.
template <class T>
class TMat {
 public:
  TMat() : rows_(0), cols_(0) {}
  TMat(int rows, int cols) : rows_(rows), cols_(cols), d_(static_cast<size_t>(rows) * cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  T& operator()(int i, int j) { return d_[static_cast<size_t>(i) * cols_ + j]; }
  const T& operator()(int i, int j) const { return d_[static_cast<size_t>(i) * cols_ + j]; }

  T* row(int i) { return d_.data() + static_cast<size_t>(i) * cols_; }
  const T* row(int i) const { return d_.data() + static_cast<size_t>(i) * cols_; }

 private:
  int rows_, cols_;
  std::vector<T> d_;
};

// In-place lower Cholesky. Returns false on a non-positive pivot and leaves
// the matrix partially overwritten; callers retry with more jitter.
template <class T>
bool cholesky_in_place(TMat<T>& a) {
  using ad::value;
  using std::sqrt;
  const int n = a.rows();
  assert(a.cols() == n);
  for (int j = 0; j < n; ++j) {
    T s = a(j, j);
    for (int k = 0; k < j; ++k) s -= a(j, k) * a(j, k);
    if (!(value(s) > 0.0)) return false;
    const T d = sqrt(s);
    a(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      T t = a(i, j);
      for (int k = 0; k < j; ++k) t -= a(i, k) * a(j, k);
      a(i, j) = t / d;
    }
    for (int k = j + 1; k < n; ++k) a(j, k) = T(0.0);
  }
  return true;
}

// Solve L x = b in place (L lower triangular).
template <class T>
void solve_lower_vec(const TMat<T>& l, std::vector<T>& x) {
  const int n = l.rows();
  for (int i = 0; i < n; ++i) {
    T s = x[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
}

// Solve L^T x = b in place.
template <class T>
void solve_lower_transposed_vec(const TMat<T>& l, std::vector<T>& x) {
  const int n = l.rows();
  for (int i = n - 1; i >= 0; --i) {
    T s = x[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
}

// Solve L X = B column-by-column, overwriting B.
template <class T>
void solve_lower_mat(const TMat<T>& l, TMat<T>& b) {
  const int n = l.rows();
  const int m = b.cols();
  for (int i = 0; i < n; ++i) {
    const T inv_d = T(1.0) / l(i, i);
    for (int c = 0; c < m; ++c) {
      T s = b(i, c);
      for (int k = 0; k < i; ++k) s -= l(i, k) * b(k, c);
      b(i, c) = s * inv_d;
    }
  }
}

// Solve L^T X = B, overwriting B.
template <class T>
void solve_lower_transposed_mat(const TMat<T>& l, TMat<T>& b) {
  const int n = l.rows();
  const int m = b.cols();
  for (int i = n - 1; i >= 0; --i) {
    const T inv_d = T(1.0) / l(i, i);
    for (int c = 0; c < m; ++c) {
      T s = b(i, c);
      for (int k = i + 1; k < n; ++k) s -= l(k, i) * b(k, c);
      b(i, c) = s * inv_d;
    }
  }
}

template <class T>
T dot(const std::vector<T>& x, const std::vector<T>& y) {
  assert(x.size() == y.size());
  T s(0.0);
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

}  // namespace hsgp
