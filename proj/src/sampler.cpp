// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "flowsr/common.hpp"

namespace flowsr::sampler {

void SamplerConfig::validate() const {
  require(nfe >= 1, "SamplerConfig: NFE must be at least 1, got ", nfe);
  require(t_floor > 0 && t_floor < 1, "SamplerConfig: bad t_floor");
}

EulerResult euler_integrate(dsp::ComplexSpectrogram x1,
                            const VelocityField& field, int nfe) {
  require(nfe >= 1, "euler_integrate: NFE must be at least 1");
  EulerResult res;
  res.x0 = std::move(x1);
  for (int k = 0; k < nfe; ++k) {
    const double t = 1.0 - static_cast<double>(k) / nfe;
    const double t_next = 1.0 - static_cast<double>(k + 1) / nfe;
    const auto u = field(res.x0, t, t_next);
    require(u.same_grid(res.x0), "euler_integrate: field changed the grid");
    const double dt = t - t_next;
    for (size_t i = 0; i < res.x0.data.size(); ++i) {
      res.x0.data[i] -= u.data[i] * dt;
      require(std::isfinite(res.x0.data[i].real()) &&
                  std::isfinite(res.x0.data[i].imag()),
              "euler_integrate: non-finite state at step ", k,
              " (t=", t, ")");
    }
    ++res.evals;
  }
  return res;
}

namespace {

// One model evaluation converted to an instantaneous velocity per the
// trained parameterization.
dsp::ComplexSpectrogram model_velocity(const model::Model& net,
                                       const Tensor& y_tensor,
                                       const dsp::ComplexSpectrogram& x,
                                       double t, double t_next,
                                       const SamplerConfig& cfg,
                                       int* clamp_events) {
  const Tensor xt = flow::spec_to_tensor(x);
  switch (cfg.mode) {
    case flow::LossMode::velocity: {
      Tensor u = net.forward(xt, y_tensor, t, t);
      return flow::tensor_to_spec(u, x);
    }
    case flow::LossMode::dp: {
      Tensor xhat = net.forward(xt, y_tensor, t, t);
      auto conv = flow::x_to_u(flow::tensor_to_spec(xhat, x), x, t);
      if (conv.clamped) ++*clamp_events;
      return std::move(conv.v);
    }
    case flow::LossMode::dp_imf: {
      const double r = cfg.condition_r_equals_t ? t : t_next;
      Tensor xhat = net.forward(xt, y_tensor, t, r);
      auto conv = flow::x_to_u(flow::tensor_to_spec(xhat, x), x, t);
      if (conv.clamped) ++*clamp_events;
      return std::move(conv.v);
    }
  }
  throw Error("model_velocity: unreachable mode");
}

double soft_clip(double v) {
  constexpr double kKnee = 0.99;
  const double mag = std::abs(v);
  if (mag <= kKnee) return v;
  const double excess = (mag - kKnee) / (1.0 - kKnee);
  const double clipped = kKnee + (1.0 - kKnee) * std::tanh(excess);
  return v < 0 ? -clipped : clipped;
}

}  // namespace

EulerResult euler_sample(const dsp::ComplexSpectrogram& y,
                         const model::Model& net, const SamplerConfig& cfg,
                         const flow::FlowConfig& fcfg, Rng& rng) {
  cfg.validate();
  fcfg.validate();

  dsp::ComplexSpectrogram x1 = y;
  const auto eps =
      dsp::spectral_noise(y.bins, y.frames, fcfg.noise_color, rng);
  for (size_t i = 0; i < x1.data.size(); ++i)
    x1.data[i] += fcfg.sigma_max * eps.data[i];

  const Tensor y_tensor = flow::spec_to_tensor(y);
  int clamps = 0;
  auto field = [&](const dsp::ComplexSpectrogram& x, double t,
                   double t_next) {
    return model_velocity(net, y_tensor, x, t, t_next, cfg, &clamps);
  };
  EulerResult res = euler_integrate(std::move(x1), field, cfg.nfe);
  res.clamp_events = clamps;
  return res;
}

RestoreResult restore(const std::vector<double>& audio, int sample_rate,
                      const model::Model& net, const dsp::StftConfig& stft,
                      const flow::FlowConfig& fcfg, const SamplerConfig& cfg,
                      Rng& rng) {
  require(sample_rate == stft.sample_rate,
          "restore: audio is at ", sample_rate,
          " Hz but the model was trained at ", stft.sample_rate,
          " Hz; resample the input or use a matching checkpoint");

  const auto y = dsp::compress(dsp::stft(audio, stft), stft.compression);
  auto euler = euler_sample(y, net, cfg, fcfg, rng);
  const auto spec = dsp::decompress(euler.x0, stft.compression);
  auto samples = dsp::istft(spec, stft);
  samples.resize(audio.size());
  for (auto& s : samples) s = soft_clip(s);

  RestoreResult out;
  out.samples = std::move(samples);
  out.evals = euler.evals;
  out.clamp_events = euler.clamp_events;
  return out;
}

RestoreResult restore_streaming(const std::vector<double>& audio,
                                int sample_rate, const model::Model& net,
                                const dsp::StftConfig& stft,
                                const flow::FlowConfig& fcfg,
                                const SamplerConfig& cfg, Rng& rng) {
  require(sample_rate == stft.sample_rate,
          "restore_streaming: audio is at ", sample_rate,
          " Hz but the model was trained at ", stft.sample_rate, " Hz");
  cfg.validate();
  fcfg.validate();

  // Offline front end produces the same frame sequence the streaming STFT
  // would; the flow trajectory below is strictly frame-by-frame.
  const auto y = dsp::compress(dsp::stft(audio, stft), stft.compression);
  const int K = y.bins, N = y.frames;

  // per-Euler-step model state and time grid
  std::vector<model::StreamingState> states;
  std::vector<double> t_grid, r_grid;
  for (int k = 0; k < cfg.nfe; ++k) {
    states.push_back(net.make_state(K));
    const double t = 1.0 - static_cast<double>(k) / cfg.nfe;
    const double t_next = 1.0 - static_cast<double>(k + 1) / cfg.nfe;
    t_grid.push_back(t);
    switch (cfg.mode) {
      case flow::LossMode::velocity:
      case flow::LossMode::dp:
        r_grid.push_back(t);
        break;
      case flow::LossMode::dp_imf:
        r_grid.push_back(cfg.condition_r_equals_t ? t : t_next);
        break;
    }
  }

  dsp::ComplexSpectrogram out_spec = y;
  RestoreResult res;
  Tensor yf({2, K, 1}), xf({2, K, 1});
  for (int n = 0; n < N; ++n) {
    // prior draw matches euler_sample's frame-major noise order
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < K; ++k) {
        yf.values()[static_cast<size_t>(c * K + k)] =
            c == 0 ? y.at(k, n).real() : y.at(k, n).imag();
      }
    std::vector<std::complex<double>> x_frame(static_cast<size_t>(K));
    {
      // same per-bin complex Gaussian stream as dsp::spectral_noise
      std::vector<double> var(static_cast<size_t>(K), 1.0);
      if (fcfg.noise_color == dsp::NoiseColor::pink) {
        double mean = 0.0;
        for (int k = 0; k < K; ++k) {
          var[static_cast<size_t>(k)] = 1.0 / std::max(k, 1);
          mean += var[static_cast<size_t>(k)];
        }
        mean /= K;
        for (auto& v : var) v /= mean;
      }
      for (int k = 0; k < K; ++k) {
        const double s = std::sqrt(var[static_cast<size_t>(k)] / 2.0);
        const double re = rng.normal() * s;
        const double im = rng.normal() * s;
        x_frame[static_cast<size_t>(k)] =
            y.at(k, n) + fcfg.sigma_max * std::complex<double>(re, im);
      }
    }

    for (int step = 0; step < cfg.nfe; ++step) {
      for (int k = 0; k < K; ++k) {
        xf.values()[static_cast<size_t>(k)] = x_frame[static_cast<size_t>(k)].real();
        xf.values()[static_cast<size_t>(K + k)] =
            x_frame[static_cast<size_t>(k)].imag();
      }
      Tensor out = net.forward_streaming(xf, yf, t_grid[static_cast<size_t>(step)],
                                         r_grid[static_cast<size_t>(step)],
                                         states[static_cast<size_t>(step)]);
      ++res.evals;

      const double t = t_grid[static_cast<size_t>(step)];
      const double t_next = 1.0 - static_cast<double>(step + 1) / cfg.nfe;
      const double dt = t - t_next;  // same rounding as euler_integrate
      const bool direct = cfg.mode == flow::LossMode::velocity;
      double t_eff = t;
      if (!direct && t < flow::kTimeFloor) {
        t_eff = flow::kTimeFloor;
        ++res.clamp_events;
      }
      const double inv_t = 1.0 / t_eff;
      for (int k = 0; k < K; ++k) {
        const std::complex<double> pred{
            out.values()[static_cast<size_t>(k)],
            out.values()[static_cast<size_t>(K + k)]};
        const std::complex<double> u =
            direct ? pred : (x_frame[static_cast<size_t>(k)] - pred) * inv_t;
        x_frame[static_cast<size_t>(k)] -= u * dt;
      }
    }
    for (int k = 0; k < K; ++k)
      out_spec.at(k, n) = x_frame[static_cast<size_t>(k)];
  }

  const auto spec = dsp::decompress(out_spec, stft.compression);
  auto samples = dsp::istft(spec, stft);
  samples.resize(audio.size());
  for (auto& s : samples) s = soft_clip(s);
  res.samples = std::move(samples);
  return res;
}

std::vector<SweepRow> nfe_sweep(const std::vector<EvalClip>& clips,
                                int sample_rate, const model::Model& net,
                                const dsp::StftConfig& stft,
                                const flow::FlowConfig& fcfg,
                                SamplerConfig cfg,
                                const std::vector<int>& nfe_list,
                                uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  require(!clips.empty(), "nfe_sweep: empty clip set");
  std::vector<SweepRow> rows;
  const Rng master(seed);
  for (int nfe : nfe_list) {
    cfg.nfe = nfe;
    SweepRow row;
    row.nfe = nfe;
    const auto t0 = Clock::now();
    for (size_t c = 0; c < clips.size(); ++c) {
      Rng rng = master.fork(static_cast<uint64_t>(nfe),
                            static_cast<uint64_t>(c));
      auto res = restore(clips[c].degraded, sample_rate, net, stft, fcfg, cfg,
                         rng);
      row.lsd_db += dsp::log_spectral_distance(res.samples, clips[c].clean,
                                               sample_rate);
      row.fmax_hz += dsp::estimate_fmax(res.samples, sample_rate);
    }
    row.runtime_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    row.lsd_db /= static_cast<double>(clips.size());
    row.fmax_hz /= static_cast<double>(clips.size());
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv_header() { return "nfe,lsd_db,fmax_hz,runtime_ms"; }

std::string sweep_csv_line(const SweepRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.3f", row.nfe, row.lsd_db,
                row.fmax_hz, row.runtime_ms);
  return buf;
}

}  // namespace flowsr::sampler
