// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_WAV_HPP
#define FLOWSR_WAV_HPP

#include <string>
#include <vector>

namespace flowsr::dsp {

// Mono WAV, little-endian, 16-bit PCM or 32-bit IEEE float.
struct WavData {
  std::vector<double> samples;
  int sample_rate = 0;
};

enum class WavFormat { pcm16, float32 };

WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate, WavFormat format = WavFormat::pcm16);

}  // namespace flowsr::dsp

#endif  // FLOWSR_WAV_HPP
