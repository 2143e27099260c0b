#include "spoofdet/rng.hpp"

#include <cmath>
#include <numbers>

#include "spoofdet/error.hpp"

namespace spoofdet {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer.
std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double Rng::next_unit() {
  // 53 high bits -> double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_unit();
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) throw UsageError("next_below: bound must be positive");
  std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

long long Rng::next_int(long long lo, long long hi) {
  if (lo > hi) throw UsageError("next_int: lo must not exceed hi");
  std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<long long>(next_below(span));
}

double Rng::next_normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  // Box-Muller; u1 in (0,1] avoids log(0).
  double u1 = 1.0 - next_unit();
  double u2 = next_unit();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

double Rng::next_normal(double mean, double stddev) {
  return mean + stddev * next_normal();
}

Rng Rng::derive(std::string_view purpose) const {
  return Rng(mix(seed_ ^ mix(fnv1a(purpose))));
}

Rng Rng::derive(std::string_view purpose, std::uint64_t index) const {
  return Rng(mix(seed_ ^ mix(fnv1a(purpose)) ^ mix(index * kGolden + 1)));
}

}  // namespace spoofdet
