// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/dsp.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "flowsr/common.hpp"
#include "flowsr/fft.hpp"
#include "flowsr/rng.hpp"
#include "flowsr/wav.hpp"

using namespace flowsr;
namespace dsp = flowsr::dsp;

namespace {

std::vector<double> white_noise(int n, Rng& rng, double amp = 0.5) {
  std::vector<double> x(static_cast<size_t>(n));
  for (auto& v : x) v = rng.uniform(-amp, amp);
  return x;
}

// windowed-sinc lowpass with Blackman window, delay-compensated
std::vector<double> sharp_lowpass(const std::vector<double>& x, double cutoff,
                                  int fs, int taps = 511) {
  const double fc = cutoff / fs;
  const int half = taps / 2;
  std::vector<double> h(static_cast<size_t>(taps));
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const int m = i - half;
    const double sinc =
        m == 0 ? 2.0 * fc
               : std::sin(2.0 * std::numbers::pi * fc * m) /
                     (std::numbers::pi * m);
    const double wb = 0.42 -
                      0.5 * std::cos(2.0 * std::numbers::pi * i / (taps - 1)) +
                      0.08 * std::cos(4.0 * std::numbers::pi * i / (taps - 1));
    h[static_cast<size_t>(i)] = sinc * wb;
    sum += h[static_cast<size_t>(i)];
  }
  for (auto& v : h) v /= sum;

  std::vector<double> y(x.size(), 0.0);
  for (size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (int i = 0; i < taps; ++i) {
      const long long src = static_cast<long long>(n) + half - i;
      if (src >= 0 && src < static_cast<long long>(x.size()))
        acc += h[static_cast<size_t>(i)] * x[static_cast<size_t>(src)];
    }
    y[n] = acc;
  }
  return y;
}

double fit_slope_db_per_decade(const std::vector<double>& log10f,
                               const std::vector<double>& db) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(log10f.size());
  for (size_t i = 0; i < log10f.size(); ++i) {
    sx += log10f[i];
    sy += db[i];
    sxx += log10f[i] * log10f[i];
    sxy += log10f[i] * db[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double noise_slope(dsp::NoiseColor color, int frames) {
  Rng rng(99);
  const int K = 161;
  auto spec = dsp::spectral_noise(K, frames, color, rng);
  std::vector<double> lf, db;
  for (int k = 1; k <= (K - 1) / 2; ++k) {
    double e = 0.0;
    for (int n = 0; n < frames; ++n) e += std::norm(spec.at(k, n));
    e /= frames;
    lf.push_back(std::log10(static_cast<double>(k)));
    db.push_back(10.0 * std::log10(e));
  }
  return fit_slope_db_per_decade(lf, db);
}

}  // namespace

TEST_CASE("stft round trip reproduces interior samples") {
  Rng rng(1);
  dsp::StftConfig cfg;
  auto x = white_noise(16000, rng, 0.9);
  auto spec = dsp::stft(x, cfg);
  auto y = dsp::istft(spec, cfg);
  REQUIRE(y.size() >= x.size());
  const int W = cfg.window_size();
  double worst = 0.0;
  for (size_t i = static_cast<size_t>(W); i + static_cast<size_t>(W) < x.size(); ++i)
    worst = std::max(worst, std::abs(y[i] - x[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("constant full-scale signal hits DC magnitude 1 after normalization") {
  dsp::StftConfig cfg;
  std::vector<double> x(static_cast<size_t>(cfg.sample_rate), 1.0);
  auto spec = dsp::stft(x, cfg);
  // interior frame fully covered by the signal
  const int n = spec.frames / 2;
  CHECK(std::abs(spec.at(0, n)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("full-scale sine stays within unit magnitude") {
  dsp::StftConfig cfg;
  std::vector<double> x(static_cast<size_t>(cfg.sample_rate));
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) /
                    cfg.sample_rate);
  auto spec = dsp::stft(x, cfg);
  double peak = 0.0;
  for (const auto& z : spec.data) peak = std::max(peak, std::abs(z));
  CHECK(peak <= 1.0 + 1e-9);
}

TEST_CASE("stft rejects bad input") {
  dsp::StftConfig cfg;
  CHECK_THROWS_AS((void)dsp::stft({}, cfg), Error);
  std::vector<double> bad(static_cast<size_t>(cfg.sample_rate), 0.0);
  bad[100] = std::nan("");
  CHECK_THROWS_AS((void)dsp::stft(bad, cfg), Error);
}

TEST_CASE("stft is linear") {
  Rng rng(2);
  dsp::StftConfig cfg;
  auto x = white_noise(8000, rng);
  auto y = white_noise(8000, rng);
  const double a = 0.7, b = -1.3;
  std::vector<double> mix(x.size());
  for (size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
  auto sx = dsp::stft(x, cfg);
  auto sy = dsp::stft(y, cfg);
  auto sm = dsp::stft(mix, cfg);
  double worst = 0.0;
  for (size_t i = 0; i < sm.data.size(); ++i)
    worst = std::max(worst,
                     std::abs(sm.data[i] - (a * sx.data[i] + b * sy.data[i])));
  CHECK(worst < 1e-10);
}

TEST_CASE("magnitude compression examples") {
  dsp::ComplexSpectrogram spec(3, 1);
  spec.at(0, 0) = {4.0, 0.0};
  spec.at(1, 0) = {0.0, 1.0};  // unit magnitude
  spec.at(2, 0) = {0.0, 0.0};
  auto c = dsp::compress(spec, 0.3);
  CHECK(std::abs(c.at(0, 0)) == doctest::Approx(std::pow(4.0, 0.3)).epsilon(1e-12));
  CHECK(c.at(0, 0).imag() == 0.0);
  CHECK(std::abs(c.at(1, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.at(2, 0) == std::complex<double>(0.0, 0.0));
}

TEST_CASE("compression round trip and phase equivariance") {
  Rng rng(3);
  dsp::ComplexSpectrogram spec(64, 16);
  for (auto& z : spec.data) {
    const double mag = std::pow(10.0, rng.uniform(-6.0, 0.0));
    const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    z = std::polar(mag, ph);
  }
  const double c = 0.3;
  auto rt1 = dsp::decompress(dsp::compress(spec, c), c);
  auto rt2 = dsp::compress(dsp::decompress(spec, c), c);
  double worst = 0.0;
  for (size_t i = 0; i < spec.data.size(); ++i) {
    worst = std::max(worst, std::abs(rt1.data[i] - spec.data[i]) /
                                std::abs(spec.data[i]));
    worst = std::max(worst, std::abs(rt2.data[i] - spec.data[i]) /
                                std::abs(spec.data[i]));
  }
  CHECK(worst < 1e-9);

  // rotating the input rotates the output
  const std::complex<double> rot = std::polar(1.0, 0.77);
  auto rotated = spec;
  for (auto& z : rotated.data) z *= rot;
  auto c1 = dsp::compress(rotated, c);
  auto c2 = dsp::compress(spec, c);
  double worst_rot = 0.0;
  for (size_t i = 0; i < spec.data.size(); ++i)
    worst_rot = std::max(worst_rot, std::abs(c1.data[i] - rot * c2.data[i]));
  CHECK(worst_rot < 1e-14);
}

TEST_CASE("pink noise has a -10 dB/decade slope, white is flat") {
  CHECK(noise_slope(dsp::NoiseColor::pink, 10000) ==
        doctest::Approx(-10.0).epsilon(0.15));
  CHECK(std::abs(noise_slope(dsp::NoiseColor::white, 10000)) < 0.5);
}

TEST_CASE("spectral noise has unit mean per-bin variance") {
  Rng rng(4);
  for (auto color : {dsp::NoiseColor::white, dsp::NoiseColor::pink}) {
    const int K = 161, N = 700;  // > 1e5 draws
    auto spec = dsp::spectral_noise(K, N, color, rng);
    double acc = 0.0;
    for (const auto& z : spec.data) acc += std::norm(z);
    acc /= static_cast<double>(spec.data.size());
    CHECK(acc == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("estimate_fmax on synthetic signals") {
  Rng rng(5);
  const int fs = 16000;
  auto noise = white_noise(fs * 2, rng);

  SUBCASE("lowpass at 2 kHz lands in [1.8, 2.2] kHz") {
    auto lp = sharp_lowpass(noise, 2000.0, fs);
    const double f = dsp::estimate_fmax(lp, fs);
    CHECK(f >= 1800.0);
    CHECK(f <= 2200.0);
  }
  SUBCASE("full-band noise reaches at least 7.2 kHz") {
    CHECK(dsp::estimate_fmax(noise, fs) >= 7200.0);
  }
  SUBCASE("silence maps to 0 Hz") {
    std::vector<double> zero(static_cast<size_t>(fs), 0.0);
    CHECK(dsp::estimate_fmax(zero, fs) == 0.0);
  }
  SUBCASE("monotone under lowpass cutoff") {
    double prev = 0.0;
    for (double cutoff : {1500.0, 2500.0, 4000.0, 6000.0}) {
      const double f = dsp::estimate_fmax(sharp_lowpass(noise, cutoff, fs), fs);
      CHECK(prev <= f + 100.0);
      prev = f;
    }
  }
}

TEST_CASE("log spectral distance") {
  Rng rng(6);
  const int fs = 16000;
  auto a = white_noise(fs, rng, 0.45);

  CHECK(dsp::log_spectral_distance(a, a, fs) < 1e-12);

  std::vector<double> half(a.size());
  for (size_t i = 0; i < a.size(); ++i) half[i] = 0.5 * a[i];
  CHECK(dsp::log_spectral_distance(a, half, fs) ==
        doctest::Approx(20.0 * std::log10(2.0)).epsilon(0.02));

  auto lp = sharp_lowpass(a, 2000.0, fs);
  CHECK(dsp::log_spectral_distance(a, lp, fs) > 1.0);

  std::vector<double> shorter(a.begin(), a.end() - 10);
  CHECK_THROWS_AS((void)dsp::log_spectral_distance(a, shorter, fs), Error);
}

TEST_CASE("wav round trip") {
  Rng rng(7);
  auto x = white_noise(4000, rng, 0.8);
  const char* path16 = "test_tmp_pcm16.wav";
  const char* path32 = "test_tmp_f32.wav";

  dsp::write_wav(path16, x, 16000, dsp::WavFormat::pcm16);
  auto r16 = dsp::read_wav(path16);
  CHECK(r16.sample_rate == 16000);
  REQUIRE(r16.samples.size() == x.size());
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(r16.samples[i] - x[i]));
  CHECK(worst < 1.0 / 32000.0);

  dsp::write_wav(path32, x, 48000, dsp::WavFormat::float32);
  auto r32 = dsp::read_wav(path32);
  CHECK(r32.sample_rate == 48000);
  worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(r32.samples[i] - x[i]));
  CHECK(worst < 1e-7);

  std::remove(path16);
  std::remove(path32);
}

TEST_CASE("unit bound holds for random bounded signals") {
  Rng rng(8);
  dsp::StftConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(static_cast<size_t>(cfg.sample_rate / 2));
    const int kind = static_cast<int>(rng.below(3));
    for (size_t i = 0; i < x.size(); ++i) {
      switch (kind) {
        case 0: x[i] = rng.uniform(-1.0, 1.0); break;
        case 1: x[i] = (i / 37) % 2 ? 1.0 : -1.0; break;  // square wave
        default:
          x[i] = std::sin(2.0 * std::numbers::pi * 440.0 *
                          static_cast<double>(i) / cfg.sample_rate);
      }
    }
    auto spec = dsp::compress(dsp::stft(x, cfg), cfg.compression);
    double peak = 0.0;
    for (const auto& z : spec.data) peak = std::max(peak, std::abs(z));
    CHECK(peak <= 1.0 + 1e-9);
  }
}
