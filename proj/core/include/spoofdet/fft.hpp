#pragma once

#include <complex>
#include <span>
#include <vector>

namespace spoofdet::fft {

// Iterative radix-2 decimation-in-time FFT, in place. Length must be a
// power of two (1 is allowed); anything else is a size error.
void transform(std::vector<std::complex<double>>& data);
void inverse(std::vector<std::complex<double>>& data);

// Real frame -> bins 0..n/2 of its transform (n/2+1 complex values).
std::vector<std::complex<double>> real_spectrum(std::span<const double> frame);

}  // namespace spoofdet::fft
