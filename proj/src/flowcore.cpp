// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/flowcore.hpp"

#include <cmath>
#include <numbers>

#include "flowsr/common.hpp"

namespace flowsr::flow {

Tensor spec_to_tensor(const dsp::ComplexSpectrogram& spec) {
  const int K = spec.bins, N = spec.frames;
  Tensor t({2, K, N});
  double* v = t.data();
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      v[static_cast<size_t>(k) * N + n] = spec.at(k, n).real();
      v[(static_cast<size_t>(K) + k) * N + n] = spec.at(k, n).imag();
    }
  return t;
}

dsp::ComplexSpectrogram tensor_to_spec(const Tensor& t,
                                       const dsp::ComplexSpectrogram& like) {
  require(t.ndim() == 3 && t.dim(0) == 2 && t.dim(1) == like.bins &&
              t.dim(2) == like.frames,
          "tensor_to_spec: tensor ", t.shape_str(), " does not match grid ",
          like.bins, "x", like.frames);
  dsp::ComplexSpectrogram spec = like;
  const int K = like.bins, N = like.frames;
  const double* v = t.data();
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      spec.at(k, n) = {v[static_cast<size_t>(k) * N + n],
                       v[(static_cast<size_t>(K) + k) * N + n]};
  return spec;
}

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::velocity: return "velocity";
    case LossMode::dp: return "dp";
    case LossMode::dp_imf: return "dp-imf";
  }
  return "?";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "velocity") return LossMode::velocity;
  if (s == "dp") return LossMode::dp;
  if (s == "dp-imf") return LossMode::dp_imf;
  throw Error(format_msg("unknown loss mode '", s,
                         "' (expected velocity | dp | dp-imf)"));
}

std::string to_string(TSampler s) {
  return s == TSampler::uniform ? "uniform" : "logit-normal";
}

TSampler t_sampler_from_string(const std::string& s) {
  if (s == "uniform") return TSampler::uniform;
  if (s == "logit-normal") return TSampler::logit_normal;
  throw Error(format_msg("unknown t sampler '", s,
                         "' (expected uniform | logit-normal)"));
}

void FlowConfig::validate() const {
  require(sigma_min >= 0.0 && sigma_min < sigma_max && sigma_max <= 1.0,
          "FlowConfig: need 0 <= sigma_min < sigma_max <= 1, got ", sigma_min,
          " / ", sigma_max);
  require(std::isfinite(t_location), "FlowConfig: t_location must be finite");
  require(t_scale > 0.0, "FlowConfig: t_scale must be positive");
}

FlowSample make_flow_sample(const dsp::ComplexSpectrogram& x0,
                            const dsp::ComplexSpectrogram& y, double t,
                            double r, const FlowConfig& cfg, Rng& rng) {
  return make_flow_sample(
      x0, y, t, r, cfg,
      dsp::spectral_noise(x0.bins, x0.frames, cfg.noise_color, rng));
}

FlowSample make_flow_sample(const dsp::ComplexSpectrogram& x0,
                            const dsp::ComplexSpectrogram& y, double t,
                            double r, const FlowConfig& cfg,
                            dsp::ComplexSpectrogram eps) {
  cfg.validate();
  require(x0.same_grid(y), "make_flow_sample: x0 is ", x0.bins, "x", x0.frames,
          " but y is ", y.bins, "x", y.frames);
  require(x0.same_grid(eps), "make_flow_sample: noise grid mismatch");
  require(t >= 0.0 && t <= 1.0, "make_flow_sample: t must be in [0,1], got ",
          t);
  require(r <= t, "make_flow_sample: need r <= t, got r=", r, ", t=", t);

  FlowSample s;
  s.x0 = x0;
  s.y = y;
  s.eps = std::move(eps);
  s.t = t;
  s.r = r;
  s.sigma = (1.0 - t) * cfg.sigma_min + t * cfg.sigma_max;
  s.sigma_max = cfg.sigma_max;
  s.sigma_min = cfg.sigma_min;

  s.mu = dsp::ComplexSpectrogram(x0.bins, x0.frames);
  s.mu.sample_rate = x0.sample_rate;
  s.mu.window = x0.window;
  s.mu.hop = x0.hop;
  s.mu.compression = x0.compression;
  s.xt = s.mu;
  for (size_t i = 0; i < x0.data.size(); ++i) {
    s.mu.data[i] = (1.0 - t) * x0.data[i] + t * y.data[i];
    s.xt.data[i] = s.mu.data[i] + s.sigma * s.eps.data[i];
  }
  return s;
}

dsp::ComplexSpectrogram velocity_target(const FlowSample& s) {
  dsp::ComplexSpectrogram v(s.x0.bins, s.x0.frames);
  const double scale = s.sigma_max - s.sigma_min;
  for (size_t i = 0; i < v.data.size(); ++i)
    v.data[i] = scale * s.eps.data[i] - (s.x0.data[i] - s.y.data[i]);
  return v;
}

double mse_loss(const dsp::ComplexSpectrogram& pred,
                const dsp::ComplexSpectrogram& target) {
  require(pred.same_grid(target), "mse_loss: grid mismatch: ", pred.bins, "x",
          pred.frames, " vs ", target.bins, "x", target.frames);
  const int K = pred.bins, N = pred.frames;
  double acc = 0.0;
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const double d = pred.at(k, n).real() - target.at(k, n).real();
      acc += d * d;
    }
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const double d = pred.at(k, n).imag() - target.at(k, n).imag();
      acc += d * d;
    }
  // multiply by the reciprocal, matching the tensor-path reduction rounding
  return acc * (1.0 / (2.0 * K * N));
}

double fm_velocity_loss(const dsp::ComplexSpectrogram& pred,
                        const FlowSample& s) {
  return mse_loss(pred, velocity_target(s));
}

double dp_loss(const dsp::ComplexSpectrogram& pred, const FlowSample& s) {
  return mse_loss(pred, s.x0);
}

Conversion dp_to_velocity(const dsp::ComplexSpectrogram& xhat,
                          const dsp::ComplexSpectrogram& xt, double t) {
  require(xhat.same_grid(xt), "dp_to_velocity: grid mismatch");
  Conversion out;
  out.clamped = t < kTimeFloor;
  const double inv = 1.0 / std::max(t, kTimeFloor);
  out.v = xt;
  for (size_t i = 0; i < out.v.data.size(); ++i)
    out.v.data[i] = (xt.data[i] - xhat.data[i]) * inv;
  return out;
}

Conversion x_to_u(const dsp::ComplexSpectrogram& xhat,
                  const dsp::ComplexSpectrogram& xt, double t) {
  return dp_to_velocity(xhat, xt, t);
}

dsp::ComplexSpectrogram imf_prediction(const dsp::ComplexSpectrogram& u_theta,
                                       const dsp::ComplexSpectrogram& jvp_sg,
                                       double t, double r) {
  require(u_theta.same_grid(jvp_sg), "imf_prediction: grid mismatch");
  require(r <= t, "imf_prediction: need r <= t");
  if (t == r) return u_theta;  // Mean Flow degenerates to vanilla FM
  dsp::ComplexSpectrogram out = u_theta;
  const double span = t - r;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += span * jvp_sg.data[i];
  return out;
}

double imf_loss(const dsp::ComplexSpectrogram& v_pred,
                const dsp::ComplexSpectrogram& v_target) {
  return mse_loss(v_pred, v_target);
}

double sample_t(const FlowConfig& cfg, Rng& rng) {
  if (cfg.t_sampler == TSampler::uniform) return rng.uniform();
  const double z = rng.normal(cfg.t_location, cfg.t_scale);
  return 1.0 / (1.0 + std::exp(-z));
}

double sample_r(double t, double gamma, double rho, Rng& rng) {
  require(gamma > 0.0 && gamma <= 1.0, "sample_r: gamma must be in (0,1]");
  require(rho >= 0.0 && rho <= 1.0, "sample_r: rho must be in [0,1]");
  if (rng.uniform() < rho) return t;
  const double span = std::pow(rng.uniform(), gamma);
  return span * t;
}

double ratio_schedule(int epoch, int total_epochs) {
  require(epoch >= 0 && epoch <= total_epochs, "ratio_schedule: epoch ",
          epoch, " outside [0, ", total_epochs, "]");
  const double x = static_cast<double>(epoch) / total_epochs;
  return 0.25 + 0.5 / (1.0 + std::exp(10.0 * (x - 0.5)));
}

double gamma_schedule(int epoch, int total_epochs) {
  require(epoch >= 0 && epoch <= total_epochs, "gamma_schedule: epoch ",
          epoch, " outside [0, ", total_epochs, "]");
  const double x = static_cast<double>(epoch) / total_epochs;
  return 0.05 + 0.95 * (1.0 - std::cos(std::numbers::pi * x)) / 2.0;
}

ScheduleState ScheduleState::at(int epoch, int total_epochs) {
  ScheduleState s;
  s.epoch = epoch;
  s.total_epochs = total_epochs;
  s.rho = ratio_schedule(epoch, total_epochs);
  s.gamma = gamma_schedule(epoch, total_epochs);
  return s;
}

}  // namespace flowsr::flow
