#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "spoofdet/error.hpp"
#include "spoofdet/fft.hpp"
#include "spoofdet/rng.hpp"

using namespace spoofdet;
using cd = std::complex<double>;

namespace {

// Textbook O(n^2) DFT, written independently of the fast path.
std::vector<cd> naive_dft(const std::vector<cd>& x) {
  std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      acc += x[t] * cd{std::cos(angle), std::sin(angle)};
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("impulse transforms to a flat spectrum") {
  std::vector<cd> x(512, 0.0);
  x[0] = 1.0;
  fft::transform(x);
  for (const cd& v : x) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(v.imag()) < 1e-12);
  }
}

TEST_CASE("constant signal concentrates in bin zero") {
  std::vector<cd> x(512, 1.0);
  fft::transform(x);
  CHECK(x[0].real() == doctest::Approx(512.0));
  for (std::size_t k = 1; k < x.size(); ++k) CHECK(std::abs(x[k]) < 1e-9);
}

TEST_CASE("a pure tone lands in its own bin") {
  const std::size_t n = 256, bin = 19;
  std::vector<cd> x(n);
  for (std::size_t t = 0; t < n; ++t)
    x[t] = std::cos(2.0 * std::numbers::pi * static_cast<double>(bin * t) / static_cast<double>(n));
  fft::transform(x);
  CHECK(std::abs(x[bin]) == doctest::Approx(n / 2.0));
  CHECK(std::abs(x[n - bin]) == doctest::Approx(n / 2.0));
  for (std::size_t k = 0; k < n; ++k) {
    if (k == bin || k == n - bin) continue;
    CHECK(std::abs(x[k]) < 1e-9);
  }
}

TEST_CASE("fast transform matches the naive DFT on random frames") {
  Rng base(2718);
  for (std::size_t n = 4; n <= 512; n *= 2) {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Rng rng = base.derive("frame", n * 100 + static_cast<std::uint64_t>(trial));
      std::vector<cd> x(n);
      for (auto& v : x) v = {rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)};
      std::vector<cd> fast = x;
      fft::transform(fast);
      std::vector<cd> slow = naive_dft(x);
      for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]));
    }
    INFO("n=", n, " worst abs err ", worst);
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("inverse undoes the transform") {
  Rng rng(31);
  std::vector<cd> x(128);
  for (auto& v : x) v = {rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)};
  std::vector<cd> y = x;
  fft::transform(y);
  fft::inverse(y);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) < 1e-12);
}

TEST_CASE("energy is conserved (Parseval)") {
  Rng rng(8);
  const std::size_t n = 512;
  std::vector<cd> x(n);
  double time_energy = 0.0;
  for (auto& v : x) {
    v = {rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)};
    time_energy += std::norm(v);
  }
  std::vector<cd> f = x;
  fft::transform(f);
  double freq_energy = 0.0;
  for (const auto& v : f) freq_energy += std::norm(v);
  freq_energy /= static_cast<double>(n);
  CHECK(std::abs(freq_energy - time_energy) / time_energy < 1e-6);
}

TEST_CASE("non-power-of-two lengths are size errors") {
  for (std::size_t n : {3u, 5u, 6u, 100u, 192u, 511u}) {
    std::vector<cd> x(n, 1.0);
    CHECK_THROWS_AS(fft::transform(x), SizeError);
    std::vector<cd> y(n, 1.0);
    CHECK_THROWS_AS(fft::inverse(y), SizeError);
  }
  std::vector<cd> one(1, cd{2.0, 0.0});
  fft::transform(one);  // length 1 is legal and the identity
  CHECK(one[0] == cd{2.0, 0.0});
}

TEST_CASE("real_spectrum returns the lower half plus Nyquist") {
  Rng rng(606);
  std::vector<double> frame(512);
  for (double& v : frame) v = rng.next_uniform(-1, 1);
  auto spec = fft::real_spectrum(frame);
  REQUIRE(spec.size() == 257);

  std::vector<cd> full(frame.begin(), frame.end());
  fft::transform(full);
  for (std::size_t k = 0; k < spec.size(); ++k) CHECK(std::abs(spec[k] - full[k]) < 1e-12);

  // A real frame's spectrum is conjugate-symmetric, so the kept half
  // carries everything.
  for (std::size_t k = 1; k < 256; ++k)
    CHECK(std::abs(full[512 - k] - std::conj(full[k])) < 1e-9);
}
