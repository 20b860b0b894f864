#include "salsa/rng.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "salsa/error.h"

namespace salsa {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

std::uint64_t Rng::nextU64() {
  return engine_();
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniformInt(std::uint64_t n) {
  if (n == 0) {
    throw ContractError("Rng::uniformInt: n must be positive");
  }
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

std::int64_t Rng::uniformRange(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) {
    throw ContractError("Rng::uniformRange: empty range");
  }
  return lo + static_cast<std::int64_t>(
                  uniformInt(static_cast<std::uint64_t>(hi - lo) + 1));
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
      std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::uint64_t streamId) const {
  return Rng(splitmix64(seed_ ^ splitmix64(streamId + 0x5A15A)));
}

std::string Rng::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << engine_;
  return os.str();
}

void Rng::setState(const std::string& state) {
  std::istringstream is(state);
  is >> seed_ >> engine_;
  if (!is) {
    throw IntegrityError("Rng::setState: malformed state string");
  }
}

} // namespace salsa
