#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

namespace otm {

using Seed = std::uint64_t;

/// Derives an independent sub-stream seed from a parent seed, a stream name
/// and an index. Every random decision in the library draws from a stream
/// named here ("tree", "init", "order", "negatives", "data", ...), so two
/// runs that differ in one component share all other streams.
Seed derive_seed(Seed parent, std::string_view stream, std::uint64_t index = 0);

/// Seeded random source with platform-independent derived distributions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform doubles take the top 53 bits, bounded integers use
/// rejection sampling and normals use the Marsaglia polar method, so the
/// streams do not depend on the standard library's distribution classes.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Standard normal via the Marsaglia polar method.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle.
  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace otm
