#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace catart {

/// Deterministic random source. Wraps std::mt19937_64 (whose output sequence is
/// fixed by the standard) and implements the derived distributions itself, so a
/// given seed produces the same draws on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n) by rejection on the top bits. n must be > 0.
  std::size_t uniform_index(std::size_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Box-Muller transform; the second value of each
  /// pair is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Seed for a named component of a run:
///   splitmix64(master ^ fnv1a64(component) ^ splitmix64(index + 1)).
/// Every random stream in the pipeline is derived from the master seed this way.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

/// In-place Fisher-Yates shuffle: for i = n-1 down to 1, swap(v[i], v[uniform_index(i+1)]).
template <typename Container>
void shuffle(Container& v, Rng& rng) {
  const std::size_t n = v.size();
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace catart
