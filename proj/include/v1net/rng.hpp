#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace v1 {

// Seeded generator with hand-rolled variate transforms so that streams are
// identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {  // [0, n)
    int k = static_cast<int>(uniform() * n);
    return k >= n ? n - 1 : k;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {  // Box-Muller
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Knuth below, normal approximation above (Knuth is O(mean) and its
  // exp(-mean) limit underflows for large means).
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 30.0) {
      const double v = std::round(mean + std::sqrt(mean) * normal());
      return v < 0.0 ? 0 : static_cast<int>(v);
    }
    double limit = std::exp(-mean);
    double prod = uniform();
    int k = 0;
    while (prod > limit) {
      prod *= uniform();
      ++k;
    }
    return k;
  }

  // Categorical draw from probabilities summing to ~1.
  template <typename Vec>
  int categorical(const Vec& probs) {
    double u = uniform();
    double acc = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = static_cast<int>(i);
      if (u < acc) return last;
    }
    return last;  // numerical slack at the top end
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stable stream derivation, e.g. per-image corruption streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(base);
  mix(a);
  mix(b);
  return h;
}

}  // namespace v1
