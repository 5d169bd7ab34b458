#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace swipeforge {

/// SplitMix64 finalizer applied to (master, stream). Used to give every
/// dataset item or model its own independent generator.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Seeded generator whose outputs are identical on every platform.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std:: distributions are implementation-defined, so all
/// transforms (uniform reals, Gaussians, bounded integers, shuffles) are
/// implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal();
  /// Uniform integer in [0, n); unbiased.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace swipeforge
