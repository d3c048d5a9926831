// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_DSP_HPP
#define FLOWSR_DSP_HPP

#include <complex>
#include <vector>

#include "flowsr/rng.hpp"

namespace flowsr::dsp {

// Square-root Hann analysis/synthesis pair at 50% overlap, forward scale
// 1/sum(w) so a full-scale input never exceeds spectral magnitude 1.
struct StftConfig {
  int sample_rate = 16000;
  double window_ms = 20.0;
  int overlap = 2;          // window/hop ratio
  double compression = 0.3; // magnitude compression exponent

  int window_size() const;  // samples (even)
  int hop_size() const;
  int bins() const;         // window/2 + 1
  double frames_per_second() const;
  void validate() const;
};

struct ComplexSpectrogram {
  int bins = 0;
  int frames = 0;
  int sample_rate = 0;
  int window = 0;
  int hop = 0;
  double compression = 1.0;  // exponent currently applied to magnitudes
  std::vector<std::complex<double>> data;  // frame-major: index (k,n) = n*bins + k

  ComplexSpectrogram() = default;
  ComplexSpectrogram(int bins_, int frames_);

  std::complex<double>& at(int k, int n) {
    return data[static_cast<size_t>(n) * bins + k];
  }
  const std::complex<double>& at(int k, int n) const {
    return data[static_cast<size_t>(n) * bins + k];
  }
  bool same_grid(const ComplexSpectrogram& o) const {
    return bins == o.bins && frames == o.frames;
  }
};

ComplexSpectrogram stft(const std::vector<double>& signal,
                        const StftConfig& cfg);
std::vector<double> istft(const ComplexSpectrogram& spec,
                          const StftConfig& cfg);

// |X|^c * X/|X| with phase preserved; 0 maps to 0 by convention.
ComplexSpectrogram compress(const ComplexSpectrogram& spec, double c);
ComplexSpectrogram decompress(const ComplexSpectrogram& spec, double c);

enum class NoiseColor { white, pink };

// Per-bin complex Gaussian noise; pink applies a 1/f energy decay (clamped
// below at the first non-DC bin) and both colors are rescaled so the mean
// per-bin variance over all bins is 1.
ComplexSpectrogram spectral_noise(int bins, int frames, NoiseColor color,
                                  Rng& rng);

// Highest frequency whose 1/3-octave-smoothed long-term spectrum stays
// within 40 dB of the peak band. Silence maps to 0 Hz.
double estimate_fmax(const std::vector<double>& signal, int sample_rate);

// RMS dB distance between magnitude spectrograms, floored at -80 dB.
double log_spectral_distance(const std::vector<double>& a,
                             const std::vector<double>& b, int sample_rate);

}  // namespace flowsr::dsp

#endif  // FLOWSR_DSP_HPP
