// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/fft.hpp"

#include <map>
#include <mutex>
#include <numbers>

#include "flowsr/common.hpp"

namespace flowsr::dsp {

namespace {

using cd = std::complex<double>;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_pow2(cd* a, int n, bool inverse) {
  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang =
        2.0 * std::numbers::pi / len * (inverse ? 1.0 : -1.0);
    const cd wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      cd w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        const cd u = a[i + j];
        const cd v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / n;
    for (int i = 0; i < n; ++i) a[i] *= inv;
  }
}

struct BluesteinPlan {
  int n = 0;
  int m = 0;                  // convolution length, power of two
  std::vector<cd> chirp;      // exp(-i*pi*k^2/n), k in [0, n)
  std::vector<cd> b_fft;      // FFT of the chirp kernel, length m
};

const BluesteinPlan& bluestein_plan(int n) {
  static std::map<int, BluesteinPlan> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  BluesteinPlan p;
  p.n = n;
  p.m = next_pow2(2 * n - 1);
  p.chirp.resize(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for large n
    const long long k2 = (1LL * k * k) % (2LL * n);
    const double ang = std::numbers::pi * static_cast<double>(k2) / n;
    p.chirp[static_cast<size_t>(k)] = cd(std::cos(ang), -std::sin(ang));
  }
  std::vector<cd> b(static_cast<size_t>(p.m), cd(0.0, 0.0));
  b[0] = std::conj(p.chirp[0]);
  for (int k = 1; k < n; ++k) {
    b[static_cast<size_t>(k)] = std::conj(p.chirp[static_cast<size_t>(k)]);
    b[static_cast<size_t>(p.m - k)] = std::conj(p.chirp[static_cast<size_t>(k)]);
  }
  fft_pow2(b.data(), p.m, false);
  p.b_fft = std::move(b);
  return cache.emplace(n, std::move(p)).first->second;
}

void fft_bluestein(std::vector<cd>& x, bool inverse) {
  const int n = static_cast<int>(x.size());
  if (inverse) {
    for (auto& v : x) v = std::conj(v);
    fft_bluestein(x, false);
    const double inv = 1.0 / n;
    for (auto& v : x) v = std::conj(v) * inv;
    return;
  }
  const BluesteinPlan& p = bluestein_plan(n);
  std::vector<cd> a(static_cast<size_t>(p.m), cd(0.0, 0.0));
  for (int k = 0; k < n; ++k)
    a[static_cast<size_t>(k)] =
        x[static_cast<size_t>(k)] * p.chirp[static_cast<size_t>(k)];
  fft_pow2(a.data(), p.m, false);
  for (int k = 0; k < p.m; ++k)
    a[static_cast<size_t>(k)] *= p.b_fft[static_cast<size_t>(k)];
  fft_pow2(a.data(), p.m, true);
  for (int k = 0; k < n; ++k)
    x[static_cast<size_t>(k)] =
        a[static_cast<size_t>(k)] * p.chirp[static_cast<size_t>(k)];
}

}  // namespace

void fft(std::vector<cd>& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  require(n > 0, "fft: empty input");
  if (n == 1) return;
  if (is_pow2(n)) {
    fft_pow2(a.data(), n, inverse);
  } else {
    fft_bluestein(a, inverse);
  }
}

std::vector<cd> rfft(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<cd> a(x.begin(), x.end());
  fft(a, false);
  a.resize(static_cast<size_t>(n / 2 + 1));
  return a;
}

std::vector<double> irfft(const std::vector<cd>& X, int n) {
  require(static_cast<int>(X.size()) == n / 2 + 1,
          "irfft: expected ", n / 2 + 1, " bins for length ", n, ", got ",
          X.size());
  std::vector<cd> a(static_cast<size_t>(n));
  for (int k = 0; k <= n / 2; ++k) a[static_cast<size_t>(k)] = X[static_cast<size_t>(k)];
  for (int k = n / 2 + 1; k < n; ++k)
    a[static_cast<size_t>(k)] = std::conj(X[static_cast<size_t>(n - k)]);
  fft(a, true);
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a[static_cast<size_t>(i)].real();
  return out;
}

}  // namespace flowsr::dsp
