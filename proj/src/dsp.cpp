// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowsr/common.hpp"
#include "flowsr/fft.hpp"

namespace flowsr::dsp {

namespace {

std::vector<double> sqrt_hann(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double h =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    w[static_cast<size_t>(i)] = std::sqrt(h);
  }
  return w;
}

}  // namespace

int StftConfig::window_size() const {
  int w = static_cast<int>(std::lround(sample_rate * window_ms / 1000.0));
  if (w % 2 != 0) ++w;
  return w;
}

int StftConfig::hop_size() const { return window_size() / overlap; }

int StftConfig::bins() const { return window_size() / 2 + 1; }

double StftConfig::frames_per_second() const {
  return static_cast<double>(sample_rate) / hop_size();
}

void StftConfig::validate() const {
  require(sample_rate > 0, "StftConfig: sample_rate must be positive");
  require(window_ms > 0, "StftConfig: window_ms must be positive");
  require(overlap >= 2 && window_size() % overlap == 0,
          "StftConfig: window must be an integer multiple of the hop");
  require(compression > 0.0 && compression <= 1.0,
          "StftConfig: compression must be in (0, 1], got ", compression);
}

ComplexSpectrogram::ComplexSpectrogram(int bins_, int frames_)
    : bins(bins_),
      frames(frames_),
      data(static_cast<size_t>(bins_) * frames_, {0.0, 0.0}) {}

ComplexSpectrogram stft(const std::vector<double>& signal,
                        const StftConfig& cfg) {
  cfg.validate();
  const int W = cfg.window_size();
  const int H = cfg.hop_size();
  require(!signal.empty(), "stft: empty signal");
  require(static_cast<int>(signal.size()) >= W,
          "stft: signal shorter than one window (", signal.size(), " < ", W,
          ")");
  for (double s : signal)
    require(std::isfinite(s), "stft: signal contains a non-finite sample");

  const auto w = sqrt_hann(W);
  double wsum = 0.0;
  for (double v : w) wsum += v;
  const double scale = 1.0 / wsum;

  const int len = static_cast<int>(signal.size());
  const int n_frames = (len - W + H - 1) / H + 1;  // last frame zero-padded

  ComplexSpectrogram spec(cfg.bins(), n_frames);
  spec.sample_rate = cfg.sample_rate;
  spec.window = W;
  spec.hop = H;
  spec.compression = 1.0;

  std::vector<double> frame(static_cast<size_t>(W));
  for (int n = 0; n < n_frames; ++n) {
    const int start = n * H;
    for (int i = 0; i < W; ++i) {
      const int idx = start + i;
      const double s = idx < len ? signal[static_cast<size_t>(idx)] : 0.0;
      frame[static_cast<size_t>(i)] = s * w[static_cast<size_t>(i)] * scale;
    }
    auto bins = rfft(frame);
    std::copy(bins.begin(), bins.end(), spec.data.begin() +
                                            static_cast<size_t>(n) * spec.bins);
  }
  return spec;
}

std::vector<double> istft(const ComplexSpectrogram& spec,
                          const StftConfig& cfg) {
  cfg.validate();
  const int W = cfg.window_size();
  const int H = cfg.hop_size();
  require(spec.bins == cfg.bins(), "istft: spectrogram has ", spec.bins,
          " bins, config expects ", cfg.bins());
  require(spec.frames > 0, "istft: empty spectrogram");
  require(std::abs(spec.compression - 1.0) < 1e-12,
          "istft: spectrogram is still magnitude-compressed; decompress first");

  const auto w = sqrt_hann(W);
  double wsum = 0.0;
  for (double v : w) wsum += v;

  const int out_len = (spec.frames - 1) * H + W;
  std::vector<double> out(static_cast<size_t>(out_len), 0.0);
  std::vector<std::complex<double>> bins(static_cast<size_t>(spec.bins));
  for (int n = 0; n < spec.frames; ++n) {
    for (int k = 0; k < spec.bins; ++k)
      bins[static_cast<size_t>(k)] = spec.at(k, n) * wsum;
    auto frame = irfft(bins, W);
    const int start = n * H;
    for (int i = 0; i < W; ++i)
      out[static_cast<size_t>(start + i)] +=
          frame[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
  }
  return out;
}

ComplexSpectrogram compress(const ComplexSpectrogram& spec, double c) {
  require(c > 0.0 && c <= 1.0, "compress: exponent must be in (0, 1], got ",
          c);
  ComplexSpectrogram out = spec;
  for (auto& z : out.data) {
    const double mag = std::abs(z);
    if (mag > 0.0) z *= std::pow(mag, c - 1.0);
  }
  out.compression = spec.compression * c;
  return out;
}

ComplexSpectrogram decompress(const ComplexSpectrogram& spec, double c) {
  require(c > 0.0 && c <= 1.0, "decompress: exponent must be in (0, 1], got ",
          c);
  ComplexSpectrogram out = spec;
  const double inv = 1.0 / c;
  for (auto& z : out.data) {
    const double mag = std::abs(z);
    if (mag > 0.0) z *= std::pow(mag, inv - 1.0);
  }
  out.compression = spec.compression * inv;
  return out;
}

ComplexSpectrogram spectral_noise(int bins, int frames, NoiseColor color,
                                  Rng& rng) {
  require(bins >= 2, "spectral_noise: need at least 2 bins, got ", bins);
  ComplexSpectrogram spec(bins, frames);

  std::vector<double> var(static_cast<size_t>(bins), 1.0);
  if (color == NoiseColor::pink) {
    double mean = 0.0;
    for (int k = 0; k < bins; ++k) {
      var[static_cast<size_t>(k)] = 1.0 / std::max(k, 1);
      mean += var[static_cast<size_t>(k)];
    }
    mean /= bins;
    for (auto& v : var) v /= mean;  // mean per-bin variance = 1
  }
  std::vector<double> sigma(static_cast<size_t>(bins));
  for (int k = 0; k < bins; ++k)
    sigma[static_cast<size_t>(k)] = std::sqrt(var[static_cast<size_t>(k)] / 2.0);

  for (int n = 0; n < frames; ++n)
    for (int k = 0; k < bins; ++k) {
      const double s = sigma[static_cast<size_t>(k)];
      spec.at(k, n) = {rng.normal() * s, rng.normal() * s};
    }
  return spec;
}

double estimate_fmax(const std::vector<double>& signal, int sample_rate) {
  require(sample_rate > 0, "estimate_fmax: invalid sample rate");
  require(static_cast<int>(signal.size()) >= sample_rate,
          "estimate_fmax: need at least 1 s of audio, got ",
          signal.size(), " samples at ", sample_rate, " Hz");

  const int nfft = 512;
  const int hop = nfft / 2;
  std::vector<double> window(static_cast<size_t>(nfft));
  for (int i = 0; i < nfft; ++i)
    window[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / nfft);

  const int K = nfft / 2 + 1;
  std::vector<double> power(static_cast<size_t>(K), 0.0);
  int count = 0;
  std::vector<double> frame(static_cast<size_t>(nfft));
  for (size_t start = 0; start + nfft <= signal.size(); start += hop) {
    for (int i = 0; i < nfft; ++i)
      frame[static_cast<size_t>(i)] =
          signal[start + static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    auto bins = rfft(frame);
    for (int k = 0; k < K; ++k)
      power[static_cast<size_t>(k)] += std::norm(bins[static_cast<size_t>(k)]);
    ++count;
  }
  for (auto& p : power) p /= count;

  double peak_power = 0.0;
  for (double p : power) peak_power = std::max(peak_power, p);
  if (peak_power < 1e-20) return 0.0;  // digital silence

  // dB spectrum with 1/3-octave smoothing (dB-domain mean keeps the edge of
  // a steep cutoff from being dragged upward by in-band energy)
  std::vector<double> db(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k)
    db[static_cast<size_t>(k)] =
        10.0 * std::log10(power[static_cast<size_t>(k)] + 1e-30);

  const double third_octave = std::pow(2.0, 1.0 / 6.0);
  std::vector<double> smooth(static_cast<size_t>(K), -300.0);
  for (int k = 1; k < K; ++k) {
    const int lo = std::max(1, static_cast<int>(std::floor(k / third_octave)));
    const int hi =
        std::min(K - 1, static_cast<int>(std::ceil(k * third_octave)));
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += db[static_cast<size_t>(j)];
    smooth[static_cast<size_t>(k)] = acc / (hi - lo + 1);
  }

  double peak = -300.0;
  for (int k = 1; k < K; ++k)
    peak = std::max(peak, smooth[static_cast<size_t>(k)]);
  const double threshold = peak - 40.0;

  int fmax_bin = 0;
  for (int k = 1; k < K; ++k)
    if (smooth[static_cast<size_t>(k)] >= threshold) fmax_bin = k;
  return static_cast<double>(fmax_bin) * sample_rate / nfft;
}

double log_spectral_distance(const std::vector<double>& a,
                             const std::vector<double>& b, int sample_rate) {
  require(a.size() == b.size(),
          "log_spectral_distance: length mismatch: ", a.size(), " vs ",
          b.size());
  StftConfig cfg;
  cfg.sample_rate = sample_rate;
  const ComplexSpectrogram A = stft(a, cfg);
  const ComplexSpectrogram B = stft(b, cfg);

  constexpr double kFloor = 1e-4;  // -80 dB
  double acc = 0.0;
  for (size_t i = 0; i < A.data.size(); ++i) {
    const double da = 20.0 * std::log10(std::max(std::abs(A.data[i]), kFloor));
    const double dbv = 20.0 * std::log10(std::max(std::abs(B.data[i]), kFloor));
    acc += (da - dbv) * (da - dbv);
  }
  return std::sqrt(acc / static_cast<double>(A.data.size()));
}

}  // namespace flowsr::dsp
