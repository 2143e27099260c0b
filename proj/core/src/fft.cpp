#include "spoofdet/fft.hpp"

#include <cmath>
#include <numbers>

#include "spoofdet/error.hpp"

namespace spoofdet::fft {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_core(std::vector<std::complex<double>>& a, bool invert) {
  std::size_t n = a.size();
  if (!is_pow2(n)) throw SizeError("fft: length " + std::to_string(n) + " is not a power of two");
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double angle = 2.0 * std::numbers::pi / static_cast<double>(len) * (invert ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (invert) {
    double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

}  // namespace

void transform(std::vector<std::complex<double>>& data) { fft_core(data, false); }
void inverse(std::vector<std::complex<double>>& data) { fft_core(data, true); }

std::vector<std::complex<double>> real_spectrum(std::span<const double> frame) {
  std::size_t n = frame.size();
  if (!is_pow2(n)) throw SizeError("fft: length " + std::to_string(n) + " is not a power of two");
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = {frame[i], 0.0};
  transform(buf);
  buf.resize(n / 2 + 1);
  return buf;
}

}  // namespace spoofdet::fft
