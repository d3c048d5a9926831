// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_FLOWCORE_HPP
#define FLOWSR_FLOWCORE_HPP

#include <string>

#include "flowsr/dsp.hpp"
#include "flowsr/rng.hpp"
#include "flowsr/tensor.hpp"

namespace flowsr::flow {

// Complex spectrograms cross into the network as [2,K,N] tensors
// (channel 0 = real, channel 1 = imaginary).
Tensor spec_to_tensor(const dsp::ComplexSpectrogram& spec);
dsp::ComplexSpectrogram tensor_to_spec(const Tensor& t,
                                       const dsp::ComplexSpectrogram& like);

enum class LossMode { velocity, dp, dp_imf };
enum class TSampler { uniform, logit_normal };

std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);
std::string to_string(TSampler s);
TSampler t_sampler_from_string(const std::string& s);

struct FlowConfig {
  double sigma_max = 0.3;
  double sigma_min = 1e-8;
  dsp::NoiseColor noise_color = dsp::NoiseColor::pink;
  TSampler t_sampler = TSampler::logit_normal;
  double t_location = 0.4;
  double t_scale = 1.0;
  LossMode loss_mode = LossMode::dp_imf;

  void validate() const;
};

// Conversions divide by the flow time; times below this are clamped and
// flagged rather than allowed to blow up.
inline constexpr double kTimeFloor = 1e-4;

// One training draw on the linear path from data x0 (t=0) to the informed
// prior centered on the degraded input y (t=1).
struct FlowSample {
  dsp::ComplexSpectrogram x0;
  dsp::ComplexSpectrogram y;
  dsp::ComplexSpectrogram eps;
  dsp::ComplexSpectrogram mu;
  dsp::ComplexSpectrogram xt;
  double t = 0.0;
  double r = 0.0;
  double sigma = 0.0;      // sigma_t on the path
  double sigma_max = 0.0;
  double sigma_min = 0.0;
};

FlowSample make_flow_sample(const dsp::ComplexSpectrogram& x0,
                            const dsp::ComplexSpectrogram& y, double t,
                            double r, const FlowConfig& cfg, Rng& rng);
// deterministic variant with the noise supplied by the caller
FlowSample make_flow_sample(const dsp::ComplexSpectrogram& x0,
                            const dsp::ComplexSpectrogram& y, double t,
                            double r, const FlowConfig& cfg,
                            dsp::ComplexSpectrogram eps);

// v = (sigma_max - sigma_min) * eps - (x0 - y); independent of t.
dsp::ComplexSpectrogram velocity_target(const FlowSample& s);

// Mean squared error over the real and imaginary parts of all bins.
// Summation runs real plane then imaginary plane, bin-major with the frame
// index fastest, matching the flat order of the network's [2,K,N] tensors;
// losses computed here and through the tensor path are bit-identical.
double mse_loss(const dsp::ComplexSpectrogram& pred,
                const dsp::ComplexSpectrogram& target);

double fm_velocity_loss(const dsp::ComplexSpectrogram& pred,
                        const FlowSample& s);
double dp_loss(const dsp::ComplexSpectrogram& pred, const FlowSample& s);

struct Conversion {
  dsp::ComplexSpectrogram v;
  bool clamped = false;  // t fell below kTimeFloor
};

// v = (xt - xhat) * (1/t); shared kernel for the (t)- and (t,r)-conditioned
// predictors.
Conversion dp_to_velocity(const dsp::ComplexSpectrogram& xhat,
                          const dsp::ComplexSpectrogram& xt, double t);
Conversion x_to_u(const dsp::ComplexSpectrogram& xhat,
                  const dsp::ComplexSpectrogram& xt, double t);

// V = u + (t - r) * jvp_sg, the u-prediction trained against v-targets.
// jvp_sg is treated as a constant by the caller's gradient step.
dsp::ComplexSpectrogram imf_prediction(const dsp::ComplexSpectrogram& u_theta,
                                       const dsp::ComplexSpectrogram& jvp_sg,
                                       double t, double r);
double imf_loss(const dsp::ComplexSpectrogram& v_pred,
                const dsp::ComplexSpectrogram& v_target);

double sample_t(const FlowConfig& cfg, Rng& rng);
// with probability rho returns r = t; otherwise r = t * U(0,1)^gamma
double sample_r(double t, double gamma, double rho, Rng& rng);

double ratio_schedule(int epoch, int total_epochs);  // rho: ~0.75 -> ~0.25
double gamma_schedule(int epoch, int total_epochs);  // gamma: 0.05 -> 1.0

struct ScheduleState {
  int epoch = 0;
  int total_epochs = 1;
  double rho = 0.75;
  double gamma = 0.05;

  static ScheduleState at(int epoch, int total_epochs);
};

}  // namespace flowsr::flow

#endif  // FLOWSR_FLOWCORE_HPP
