#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace salsa {

/// Seeded pseudo-random stream. All randomness in the library goes through
/// this type so that runs are reproducible from a seed and serializable into
/// checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const {
    return seed_;
  }

  std::uint64_t nextU64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniformInt(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  std::int64_t uniformRange(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  /// Independent substream determined only by (seed, streamId).
  Rng derive(std::uint64_t streamId) const;

  std::string state() const;
  void setState(const std::string& state);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace salsa
