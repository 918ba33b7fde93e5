#pragma once

#include <cstdint>

namespace pudle {

/// Counter-based generator (splitmix64). The state is a plain counter run
/// through a mixing finalizer, so independent streams are cheap: stream k of
/// seed s starts at mix(s + GOLDEN * (k + 1)) and never overlaps another
/// stream's draws. All sampling (uniform, gaussian, shuffles) is built on
/// this one generator so results are reproducible bit-for-bit from
/// (seed, stream) alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  /// N(0, 1) via Box-Muller; the sine partner is cached.
  double gaussian();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Random sign, +1 or -1 with equal probability.
  double sign();

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Stream ids used across the project. Keeping them in one table guarantees
/// that e.g. datagen and trainer draws never interleave even under the same
/// master seed.
enum class RngStream : std::uint64_t {
  kDictionary = 1,
  kCodes = 2,
  kNoise = 3,
  kInitPerturbation = 4,
  kTrainerShuffle = 5,
  kSpectralProbe = 6,
  kTestData = 7,
};

inline Rng make_rng(std::uint64_t seed, RngStream stream) {
  return Rng(seed, static_cast<std::uint64_t>(stream));
}

}  // namespace pudle
