#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace rdx {

// Deterministic random source. Every sample is derived from the raw
// mt19937_64 stream in a fixed way, so a seeded run replays bit-identically
// on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform double in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), rejection-sampled to avoid modulo bias
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    const auto span = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return static_cast<int>(r % span);
  }

  // standard normal via Marsaglia polar, spare cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // index drawn from a probability vector (assumed normalized; trailing
  // rounding mass goes to the last index)
  template <typename Derived>
  int categorical(const Eigen::DenseBase<Derived>& probs) {
    const double u = uniform();
    double cum = 0.0;
    const Eigen::Index n = probs.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      cum += probs(i);
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace rdx
