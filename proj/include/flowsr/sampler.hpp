// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_SAMPLER_HPP
#define FLOWSR_SAMPLER_HPP

#include <functional>
#include <vector>

#include "flowsr/flowcore.hpp"
#include "flowsr/model.hpp"

namespace flowsr::sampler {

struct SamplerConfig {
  int nfe = 4;
  flow::LossMode mode = flow::LossMode::dp_imf;
  double t_floor = flow::kTimeFloor;
  // dp-imf conditioning at inference: r = step target t_{k+1} (default) or
  // r = t as the configurable alternative
  bool condition_r_equals_t = false;

  void validate() const;
};

struct EulerResult {
  dsp::ComplexSpectrogram x0;
  int evals = 0;         // model/field evaluations, one per step
  int clamp_events = 0;  // conversions that hit the time floor
};

// u(x, t_k, t_next) -> instantaneous velocity; the oracle-testable core.
using VelocityField = std::function<dsp::ComplexSpectrogram(
    const dsp::ComplexSpectrogram& x, double t, double t_next)>;

// Euler integration on the uniform grid t_k = 1 - k/nfe, x <- x - u * dt.
EulerResult euler_integrate(dsp::ComplexSpectrogram x1,
                            const VelocityField& field, int nfe);

// Full sampler: x1 = y + sigma_max * eps, velocity from the trained net
// per the configured parameterization.
EulerResult euler_sample(const dsp::ComplexSpectrogram& y,
                         const model::Model& net, const SamplerConfig& cfg,
                         const flow::FlowConfig& fcfg, Rng& rng);

struct RestoreResult {
  std::vector<double> samples;
  int evals = 0;
  int clamp_events = 0;
};

// STFT -> compress -> Euler -> decompress -> ISTFT, trimmed to the input
// length and soft-clipped to the valid WAV range.
RestoreResult restore(const std::vector<double>& audio, int sample_rate,
                      const model::Model& net, const dsp::StftConfig& stft,
                      const flow::FlowConfig& fcfg, const SamplerConfig& cfg,
                      Rng& rng);

// Frame-by-frame pipeline over per-step streaming model states; numerically
// equivalent to restore() through the model's streaming guarantee.
RestoreResult restore_streaming(const std::vector<double>& audio,
                                int sample_rate, const model::Model& net,
                                const dsp::StftConfig& stft,
                                const flow::FlowConfig& fcfg,
                                const SamplerConfig& cfg, Rng& rng);

struct SweepRow {
  int nfe = 0;
  double lsd_db = 0.0;
  double fmax_hz = 0.0;
  double runtime_ms = 0.0;
};

struct EvalClip {
  std::vector<double> degraded;
  std::vector<double> clean;
};

// One row per requested NFE, averaged over the clip set; deterministic
// given the seed (runtime excluded).
std::vector<SweepRow> nfe_sweep(const std::vector<EvalClip>& clips,
                                int sample_rate, const model::Model& net,
                                const dsp::StftConfig& stft,
                                const flow::FlowConfig& fcfg,
                                SamplerConfig cfg,
                                const std::vector<int>& nfe_list,
                                uint64_t seed);

std::string sweep_csv_header();
std::string sweep_csv_line(const SweepRow& row);

}  // namespace flowsr::sampler

#endif  // FLOWSR_SAMPLER_HPP
