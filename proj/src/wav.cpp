// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "flowsr/common.hpp"

namespace flowsr::dsp {

namespace {

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open WAV file: ", path);

  char tag[4];
  in.read(tag, 4);
  require(std::memcmp(tag, "RIFF", 4) == 0, path, ": not a RIFF file");
  (void)read_le<uint32_t>(in);
  in.read(tag, 4);
  require(std::memcmp(tag, "WAVE", 4) == 0, path, ": not a WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool got_fmt = false;
  WavData wav;

  while (in.read(tag, 4)) {
    const uint32_t chunk_size = read_le<uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<uint16_t>(in);
      channels = read_le<uint16_t>(in);
      rate = read_le<uint32_t>(in);
      (void)read_le<uint32_t>(in);  // byte rate
      (void)read_le<uint16_t>(in);  // block align
      bits = read_le<uint16_t>(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      require(got_fmt, path, ": data chunk before fmt chunk");
      require(channels == 1, path, ": only mono WAV is supported, file has ",
              channels, " channels");
      if (format == 1 && bits == 16) {
        const size_t n = chunk_size / 2;
        wav.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
          const auto raw = static_cast<int16_t>(read_le<uint16_t>(in));
          wav.samples[i] = static_cast<double>(raw) / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        const size_t n = chunk_size / 4;
        wav.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
          const uint32_t raw = read_le<uint32_t>(in);
          float f;
          std::memcpy(&f, &raw, 4);
          wav.samples[i] = static_cast<double>(f);
        }
      } else {
        throw Error(format_msg(path, ": unsupported WAV encoding (format=",
                               format, ", bits=", bits,
                               "); expected 16-bit PCM or 32-bit float"));
      }
      wav.sample_rate = static_cast<int>(rate);
      return wav;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw Error(format_msg(path, ": no data chunk found"));
}

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate, WavFormat format) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot create WAV file: ", path);

  const bool f32 = format == WavFormat::float32;
  const uint32_t bytes_per = f32 ? 4 : 2;
  const uint32_t data_size =
      static_cast<uint32_t>(samples.size()) * bytes_per;

  out.write("RIFF", 4);
  write_le<uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<uint32_t>(out, 16);
  write_le<uint16_t>(out, f32 ? 3 : 1);
  write_le<uint16_t>(out, 1);
  write_le<uint32_t>(out, static_cast<uint32_t>(sample_rate));
  write_le<uint32_t>(out, static_cast<uint32_t>(sample_rate) * bytes_per);
  write_le<uint16_t>(out, static_cast<uint16_t>(bytes_per));
  write_le<uint16_t>(out, f32 ? 32 : 16);
  out.write("data", 4);
  write_le<uint32_t>(out, data_size);

  if (f32) {
    for (double s : samples) {
      const float f = static_cast<float>(s);
      uint32_t raw;
      std::memcpy(&raw, &f, 4);
      write_le<uint32_t>(out, raw);
    }
  } else {
    for (double s : samples) {
      const long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
      const auto raw = static_cast<int16_t>(std::clamp(q, -32768L, 32767L));
      write_le<uint16_t>(out, static_cast<uint16_t>(raw));
    }
  }
  require(out.good(), "failed writing WAV file: ", path);
}

}  // namespace flowsr::dsp
