// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_DATAGEN_HPP
#define FLOWSR_DATAGEN_HPP

#include <string>
#include <vector>

#include "flowsr/rng.hpp"

namespace flowsr::datagen {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  Range() = default;
  Range(double lo_, double hi_) : lo(lo_), hi(hi_) {}
  static Range fixed(double v) { return Range(v, v); }
  double sample(Rng& rng) const {
    return lo == hi ? lo : rng.uniform(lo, hi);
  }
};

enum class FilterKind { fir, butterworth, notch_cascade };
enum class NonlinKind { sigmoid, rectify, hard_clip };

std::string to_string(FilterKind k);
FilterKind filter_kind_from_string(const std::string& s);
std::string to_string(NonlinKind k);
NonlinKind nonlin_kind_from_string(const std::string& s);

// Stage toggles and parameter ranges for the synthetic degradation cascade.
// Stages run in the order: reverb, noise, level, highpass, lowpass, notch,
// nonlinear, bubbles, dropouts, modulation. Each stage draws from its own
// forked rng stream, so toggling one stage never shifts another's draws.
struct DegradationSpec {
  bool reverb = false;
  Range rt60_s{0.15, 0.4};

  bool noise = false;
  double snr_mean_db = 5.0;
  double snr_std_db = 10.0;

  bool level = false;
  double level_mean_dbfs = -40.0;
  double level_std_dbfs = 10.0;

  bool highpass = false;
  Range highpass_hz{100.0, 800.0};
  bool lowpass = false;
  Range lowpass_hz{1500.0, 8000.0};
  FilterKind filter_kind = FilterKind::fir;

  bool notch = false;
  Range notch_hz{300.0, 3000.0};
  Range notch_q{1.0, 10.0};

  bool nonlinear = false;
  NonlinKind nonlin_kind = NonlinKind::hard_clip;
  Range drive{2.0, 10.0};        // sigmoid drive / rectify mix scale
  Range clip_level{0.3, 0.9};    // hard clip threshold, fraction of peak

  bool bubbles = false;
  int bubble_count = 4;
  Range bubble_size{2.0, 8.0};   // gaussian sigma in bins/frames
  Range bubble_depth{0.5, 0.95};

  bool dropouts = false;
  Range dropout_ms{10.0, 80.0};
  int dropout_count = 2;

  bool modulation = false;
  Range am_rate_hz{0.5, 8.0};
  Range am_depth{0.2, 0.8};

  void validate(int sample_rate) const;
  bool any_enabled() const;
  std::string stage_list() const;         // e.g. "lowpass;nonlinear"
  std::string parameter_summary() const;  // enabled stages with their ranges
};

// Speech-like synthetic signal: harmonic source with a pitch contour,
// formant resonances, breath noise and fricative bursts under a syllabic
// envelope; peak-normalized to -25 dBFS.
std::vector<double> synth_clean(Rng& rng, double duration_s, int sample_rate);

std::vector<double> apply_degradation(const std::vector<double>& clean,
                                      const DegradationSpec& spec,
                                      int sample_rate, const Rng& rng);

struct Pair {
  std::vector<double> y;   // degraded
  std::vector<double> x0;  // time-aligned clean target
};

Pair make_pair(const Rng& rng, const DegradationSpec& spec, double duration_s,
               int sample_rate);

// Writes n paired WAVs plus a manifest CSV (id, seed, stages, parameters).
struct EmitResult {
  int count = 0;
  std::string manifest_path;
};
EmitResult emit_dataset(const std::string& out_dir, int n,
                        const DegradationSpec& spec, double duration_s,
                        int sample_rate, uint64_t seed);

}  // namespace flowsr::datagen

#endif  // FLOWSR_DATAGEN_HPP
