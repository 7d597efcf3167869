#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "tdgfn/errors.hpp"

namespace tdgfn {

// mt19937_64 with hand-rolled draw helpers. The engine itself is fully
// specified by the standard; the distributions in <random> are not, so every
// sampling primitive used for experiment results lives here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased via rejection.
  std::int64_t below(std::int64_t n) {
    if (n <= 0) throw ContractViolation("Rng::below: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % un;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::int64_t>(x % un);
  }

  // Index drawn proportionally to nonnegative weights given as an inclusive
  // prefix-sum table (cum.back() = total weight > 0).
  std::size_t categorical_cum(std::span<const double> cum) {
    if (cum.empty() || cum.back() <= 0.0)
      throw ContractViolation("Rng::categorical_cum: empty or zero-mass table");
    const double r = uniform01() * cum.back();
    std::size_t lo = 0, hi = cum.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cum[mid] > r)
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

  // Index drawn proportionally to a dense weight vector (linear scan).
  std::size_t categorical(std::span<const double> w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (total <= 0.0)
      throw ContractViolation("Rng::categorical: zero total weight");
    double r = uniform01() * total;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      r -= w[i];
      if (r < 0.0) return i;
    }
    return w.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic per-stage seed: hash a label and stream index into the
// experiment seed so concurrent jobs never share a stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t stream = 0) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix_seed(seed ^ mix_seed(h ^ (stream * 0x9e3779b97f4a7c15ULL)));
}

}  // namespace tdgfn
