#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace hsgp::ad {

// Reverse-mode tape over scalars. Each node stores its parents and the
// local partial derivatives, precomputed during the forward pass, so the
// backward sweep is a single weighted accumulation over the node array.
class Tape {
 public:
  struct Node {
    std::uint32_t a;
    std::uint32_t b;
    double wa;
    double wb;
  };

  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t leaf() {
    const auto i = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({i, i, 0.0, 0.0});
    return i;
  }

  std::uint32_t unary(std::uint32_t a, double wa) {
    const auto i = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({a, a, wa, 0.0});
    return i;
  }

  std::uint32_t binary(std::uint32_t a, std::uint32_t b, double wa, double wb) {
    const auto i = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({a, b, wa, wb});
    return i;
  }

  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }

  // Adjoints of every node with respect to the node `root`.
  std::vector<double> backward(std::uint32_t root) const {
    assert(root < nodes_.size());
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[root] = 1.0;
    for (std::uint32_t i = root + 1; i-- > 0;) {
      const double g = adj[i];
      if (g == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.a != i) adj[n.a] += n.wa * g;
      if (n.b != i) adj[n.b] += n.wb * g;
    }
    return adj;
  }

 private:
  std::vector<Node> nodes_;
};

Tape*& active_tape();

struct TapeScope {
  explicit TapeScope(Tape& t) : prev(active_tape()) { active_tape() = &t; }
  ~TapeScope() { active_tape() = prev; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  Tape* prev;
};

// Tracked scalar. A Var constructed from a plain double is a constant and
// owns no tape node; only values produced from tracked inputs get recorded.
class Var {
 public:
  Var() : v_(0.0), i_(Tape::kNone) {}
  Var(double c) : v_(c), i_(Tape::kNone) {}  // NOLINT: implicit by design
  Var(double v, std::uint32_t i) : v_(v), i_(i) {}

  double value() const { return v_; }
  std::uint32_t index() const { return i_; }
  bool tracked() const { return i_ != Tape::kNone; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

 private:
  double v_;
  std::uint32_t i_;
};

inline Tape*& active_tape() {
  thread_local Tape* t = nullptr;
  return t;
}

// Convenience for reading gradients back out after Tape::backward.
class Gradients {
 public:
  explicit Gradients(std::vector<double> adj) : adj_(std::move(adj)) {}
  double operator[](const Var& x) const {
    return x.tracked() ? adj_[x.index()] : 0.0;
  }

 private:
  std::vector<double> adj_;
};

inline Var make_leaf(Tape& t, double v) { return Var(v, t.leaf()); }

namespace detail {
inline Var unary(const Var& x, double v, double dv) {
  if (!x.tracked()) return Var(v);
  return Var(v, active_tape()->unary(x.index(), dv));
}
inline Var binary(const Var& x, const Var& y, double v, double dx, double dy) {
  const bool tx = x.tracked(), ty = y.tracked();
  if (!tx && !ty) return Var(v);
  Tape* t = active_tape();
  if (tx && ty) return Var(v, t->binary(x.index(), y.index(), dx, dy));
  if (tx) return Var(v, t->unary(x.index(), dx));
  return Var(v, t->unary(y.index(), dy));
}
}  // namespace detail

inline Var operator+(const Var& x, const Var& y) {
  return detail::binary(x, y, x.value() + y.value(), 1.0, 1.0);
}
inline Var operator-(const Var& x, const Var& y) {
  return detail::binary(x, y, x.value() - y.value(), 1.0, -1.0);
}
inline Var operator*(const Var& x, const Var& y) {
  return detail::binary(x, y, x.value() * y.value(), y.value(), x.value());
}
inline Var operator/(const Var& x, const Var& y) {
  const double inv = 1.0 / y.value();
  return detail::binary(x, y, x.value() * inv, inv, -x.value() * inv * inv);
}
inline Var operator-(const Var& x) { return detail::unary(x, -x.value(), -1.0); }
inline Var operator+(const Var& x) { return x; }

inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

inline bool operator<(const Var& x, const Var& y) { return x.value() < y.value(); }
inline bool operator>(const Var& x, const Var& y) { return x.value() > y.value(); }
inline bool operator<=(const Var& x, const Var& y) { return x.value() <= y.value(); }
inline bool operator>=(const Var& x, const Var& y) { return x.value() >= y.value(); }

inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return detail::unary(x, e, e);
}
inline Var log(const Var& x) {
  return detail::unary(x, std::log(x.value()), 1.0 / x.value());
}
inline Var log1p(const Var& x) {
  return detail::unary(x, std::log1p(x.value()), 1.0 / (1.0 + x.value()));
}
inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return detail::unary(x, s, 0.5 / s);
}
inline Var sin(const Var& x) {
  return detail::unary(x, std::sin(x.value()), std::cos(x.value()));
}
inline Var cos(const Var& x) {
  return detail::unary(x, std::cos(x.value()), -std::sin(x.value()));
}
inline Var softplus(const Var& x) {
  const double v = x.value();
  const double sp = (v > 0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  const double sig = 1.0 / (1.0 + std::exp(-v));
  return detail::unary(x, sp, sig);
}

inline double value(double x) { return x; }
inline double value(const Var& x) { return x.value(); }

// double fallbacks so templated numeric code works for both scalar types
inline double softplus(double x) {
  return (x > 0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace hsgp::ad
