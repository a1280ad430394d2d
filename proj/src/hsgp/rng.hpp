#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace hsgp {

// Deterministic RNG. Normal draws use Box-Muller on raw mt19937_64 output so
// sequences do not depend on the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t next_u64() { return gen_(); }

  int uniform_int(int n) {  // [0, n)
    return static_cast<int>(uniform() * n) % n;
  }

  void shuffle(std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(i + 1)]);
    }
  }

  // k distinct indices from [0, n), in draw order
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(idx[i], idx[j]);
      out[i] = idx[i];
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hsgp
