#pragma once
// Iterative radix-2 complex FFT. ADC sample counts are powers of two by
// configuration, so this covers everything the range processing needs.

#include <complex>
#include <vector>

namespace merit {

// In-place forward FFT; n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& x);

// Windowed one-sided spectrum of a real signal: returns n/2 complex bins.
// `window` may be empty (rectangular) or length n.
std::vector<std::complex<double>> rfft_onesided(const std::vector<double>& x,
                                                const std::vector<double>& window);

// Hann window of length n.
std::vector<double> hann_window(std::size_t n);

}  // namespace merit
