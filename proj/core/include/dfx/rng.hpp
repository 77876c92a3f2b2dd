#pragma once

#include <cstdint>
#include <random>

namespace dfx {

/// Deterministic random stream. All randomness in the toolkit flows through
/// this wrapper so that a fixed seed reproduces results bit-for-bit: the
/// mapping from raw engine output to doubles is written out here instead of
/// relying on std::uniform_real_distribution, whose sequence is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard Box-Muller transform; consumes two uniforms per call.
  double normal(double mu, double sigma);

  /// Uniform index in [0, n). Unbiased via rejection.
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// Mixes a stream tag into a master seed so pipeline stages (split, train,
/// retrain, ...) draw from independent deterministic streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dfx
