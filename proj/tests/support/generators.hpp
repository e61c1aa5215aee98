#pragma once

// Hand-rolled generators for property tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace gen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
  }
  bool coin() { return index(0, 1) == 1; }

  // q strictly increasing positive maturities.
  std::vector<double> maturities(std::size_t q) {
    std::vector<double> t;
    double acc = uniform(0.05, 1.0);
    for (std::size_t i = 0; i < q; ++i) {
      t.push_back(acc);
      acc += uniform(0.05, 1.5);
    }
    return t;
  }

  // Non-negative weights with at least one positive entry; some zeros on purpose.
  std::vector<double> weights(std::size_t n) {
    std::vector<double> w(n);
    for (auto& x : w) x = coin() ? uniform(0.0, 3.0) : 0.0;
    w[index(0, n - 1)] = uniform(0.1, 3.0);
    return w;
  }

  // 0 = K_0 < K_1 < ... < K_m with irregular spacing.
  std::vector<double> strikes(std::size_t m, double k_max) {
    std::vector<double> k{0.0};
    std::vector<double> cuts;
    for (std::size_t i = 0; i + 1 < m; ++i) cuts.push_back(uniform(0.0, k_max));
    std::sort(cuts.begin(), cuts.end());
    for (double c : cuts) {
      if (c > k.back() + 1e-6) k.push_back(c);
    }
    k.push_back(std::max(k_max, k.back() + 1e-3));
    return k;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gen
