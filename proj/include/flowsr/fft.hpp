// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_FFT_HPP
#define FLOWSR_FFT_HPP

#include <complex>
#include <vector>

namespace flowsr::dsp {

// In-place complex FFT for arbitrary sizes: iterative radix-2 for powers of
// two, Bluestein's chirp-z otherwise. Inverse includes the 1/n scale.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Real-input helpers; K = n/2 + 1 bins, conjugate symmetry implied.
std::vector<std::complex<double>> rfft(const std::vector<double>& x);
std::vector<double> irfft(const std::vector<std::complex<double>>& X, int n);

}  // namespace flowsr::dsp

#endif  // FLOWSR_FFT_HPP
