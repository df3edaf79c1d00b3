#pragma once

#include <complex>
#include <vector>

namespace bicam {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& a, bool invert);

// Circular cross-correlation via zero-padded FFT, any length d:
// out_i = sum_k h_k * t_{(k+i) mod d}
std::vector<double> circular_correlation_fft(const std::vector<double>& h,
                                             const std::vector<double>& t);

// Reference double loop for the same quantity.
std::vector<double> circular_correlation_ref(const std::vector<double>& h,
                                             const std::vector<double>& t);

}  // namespace bicam
