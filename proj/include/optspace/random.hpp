#pragma once

#include <cstdint>
#include <random>

namespace optspace {

/// Substream identifiers used when deriving child seeds from an instance seed.
/// Each random matrix of a synthetic instance draws from its own substream so
/// that changing one (say, the mask) leaves the others bit-identical.
enum class Stream : std::uint64_t {
  LeftFactor = 1,
  RightFactor = 2,
  Noise = 3,
  Mask = 4,
  Holdout = 5,
  SvdStart = 6,
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Child seed for substream `stream` of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) noexcept {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

/// Seeded generator with platform-independent output.
///
/// The raw engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The standard distributions are not (their algorithms are
/// implementation-defined), so uniform, bounded and normal variates are
/// produced here from raw 64-bit draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer on [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal (Marsaglia polar method).
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace optspace
