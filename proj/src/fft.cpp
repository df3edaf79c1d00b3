#include "bicam/fft.hpp"

#include <cmath>
#include <numbers>

#include "bicam/tensor.hpp"

namespace bicam {

void fft_pow2(std::vector<std::complex<double>>& a, bool invert) {
    size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw UsageError("fft_pow2: size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (invert ? -1.0 : 1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (invert)
        for (auto& x : a) x /= static_cast<double>(n);
}

std::vector<double> circular_correlation_ref(const std::vector<double>& h,
                                             const std::vector<double>& t) {
    if (h.size() != t.size())
        throw UsageError("circular correlation: dimension mismatch");
    size_t d = h.size();
    if (d == 0) throw UsageError("circular correlation: empty vectors");
    std::vector<double> out(d, 0.0);
    for (size_t i = 0; i < d; ++i)
        for (size_t k = 0; k < d; ++k) out[i] += h[k] * t[(k + i) % d];
    return out;
}

std::vector<double> circular_correlation_fft(const std::vector<double>& h,
                                             const std::vector<double>& t) {
    if (h.size() != t.size())
        throw UsageError("circular correlation: dimension mismatch");
    size_t d = h.size();
    if (d == 0) throw UsageError("circular correlation: empty vectors");
    // correlate h against [t, t]; padding to >= 2d kills circular wraparound
    size_t m = 1;
    while (m < 2 * d) m <<= 1;
    std::vector<std::complex<double>> H(m), T(m);
    for (size_t i = 0; i < d; ++i) {
        H[i] = h[i];
        T[i] = t[i];
        T[i + d] = t[i];
    }
    fft_pow2(H, false);
    fft_pow2(T, false);
    for (size_t i = 0; i < m; ++i) H[i] = std::conj(H[i]) * T[i];
    fft_pow2(H, true);
    std::vector<double> out(d);
    for (size_t i = 0; i < d; ++i) out[i] = H[i].real();
    return out;
}

}  // namespace bicam
