#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace spoofdet {

// Counter-based deterministic generator (splitmix64 core).
//
// Every stochastic component of the toolkit draws from a stream derived off
// one base seed, keyed by a purpose string (and optionally an index), so the
// draw order of one component can never perturb another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double next_unit();
  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi);
  // Uniform integer in [0, bound), bound > 0. Rejection-sampled, unbiased.
  std::uint64_t next_below(std::uint64_t bound);
  // Uniform integer in [lo, hi] inclusive.
  long long next_int(long long lo, long long hi);
  // Standard normal via Box-Muller (one spare cached).
  double next_normal();
  double next_normal(double mean, double stddev);

  // Stream derived from the *base seed* (not the current state), so the
  // result is independent of how many draws this generator has made.
  Rng derive(std::string_view purpose) const;
  Rng derive(std::string_view purpose, std::uint64_t index) const;

  std::uint64_t base_seed() const { return seed_; }

  // Fisher-Yates using this stream.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

}  // namespace spoofdet
