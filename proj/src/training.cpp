// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowsr/autodiff.hpp"
#include "flowsr/checkpoint.hpp"
#include "flowsr/common.hpp"
#include "flowsr/datagen.hpp"

namespace flowsr::train {

namespace ops = autodiff::ops;

void TrainConfig::validate() const {
  require(epochs > 0 && steps_per_epoch > 0 && batch_size > 0,
          "TrainConfig: epochs, steps_per_epoch and batch_size must be "
          "positive");
  require(learning_rate > 0 && adam_eps > 0 && grad_clip > 0,
          "TrainConfig: optimizer constants must be positive");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1,
          "TrainConfig: moments must be in [0, 1)");
  require(clip_seconds > 0, "TrainConfig: clip_seconds must be positive");
  require(checkpoint_every_epochs > 0,
          "TrainConfig: checkpoint cadence must be positive");
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(double lr, double beta1, double beta2, double eps, double clip)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), clip_(clip) {}

void Adam::init(const std::vector<Tensor>& params) {
  m_.clear();
  v_.clear();
  for (const auto& p : params) {
    m_.emplace_back(static_cast<size_t>(p.size()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.size()), 0.0);
  }
  step_count_ = 0;
}

void Adam::restore(int64_t step_count, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
  require(m.size() == v.size(), "Adam::restore: moment count mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  step_count_ = step_count;
}

double Adam::step(std::vector<Tensor>& params,
                  const std::vector<Tensor>& grads) {
  require(params.size() == grads.size() && params.size() == m_.size(),
          "Adam::step: parameter/gradient/moment counts differ");
  double norm_sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  const double scale = norm > clip_ ? clip_ / norm : 1.0;

  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

  for (size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].values();
    const auto& g = grads[i].values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j] * scale;
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      theta[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// per-sample losses
// ---------------------------------------------------------------------------

namespace {

// Gradient-frozen JVP of u(x, r, t) = (x - xhat(x, y, t, r)) / t along the
// tangent [v, 0, 1], v being the net's own velocity at r = t. Must run
// without an active tape.
Tensor imf_jvp_term(const model::Model& net, const flow::FlowSample& s,
                    int* clamp_events) {
  const Tensor xt = flow::spec_to_tensor(s.xt);
  const Tensor y = flow::spec_to_tensor(s.y);

  double t_eff = s.t;
  if (t_eff < flow::kTimeFloor) {
    t_eff = flow::kTimeFloor;
    ++*clamp_events;
  }

  // tangent direction: current network evaluated at r = t
  Tensor xhat_tt = net.forward(xt, y, s.t, s.t);
  Tensor v_dir = ops::scale(ops::sub(xt, xhat_tt), 1.0 / t_eff);

  auto f = [&net, &y](std::vector<Tensor>& in) {
    Tensor xhat = net.forward(in[0], y, in[2], in[1]);
    Tensor inv_t = ops::powc(in[2], -1.0);
    return ops::mul(ops::sub(in[0], xhat), inv_t);
  };
  auto res = autodiff::jvp(
      f, {xt, Tensor::scalar(s.r), Tensor::scalar(t_eff)},
      {v_dir, Tensor(), Tensor::scalar(1.0)});
  return autodiff::stop_gradient(res.tangent);
}

// Taped loss for one sample. jvp_term is the frozen constant (undefined for
// r == t, where the Mean Flow objective degenerates to the velocity loss).
Tensor taped_sample_loss(const model::Model& net, const flow::FlowSample& s,
                         const flow::FlowConfig& fcfg, const Tensor& jvp_term,
                         int* clamp_events) {
  const Tensor xt = flow::spec_to_tensor(s.xt);
  const Tensor y = flow::spec_to_tensor(s.y);

  switch (fcfg.loss_mode) {
    case flow::LossMode::velocity: {
      const Tensor target = flow::spec_to_tensor(flow::velocity_target(s));
      Tensor pred = net.forward(xt, y, s.t, s.t);
      Tensor d = ops::sub(pred, target);
      return ops::mean(ops::mul(d, d));
    }
    case flow::LossMode::dp: {
      const Tensor x0 = flow::spec_to_tensor(s.x0);
      Tensor pred = net.forward(xt, y, s.t, s.t);
      Tensor d = ops::sub(pred, x0);
      return ops::mean(ops::mul(d, d));
    }
    case flow::LossMode::dp_imf: {
      const Tensor target = flow::spec_to_tensor(flow::velocity_target(s));
      Tensor xhat = net.forward(xt, y, s.t, s.r);
      double t_eff = s.t;
      if (t_eff < flow::kTimeFloor) {
        t_eff = flow::kTimeFloor;
        ++*clamp_events;
      }
      Tensor u = ops::scale(ops::sub(xt, xhat), 1.0 / t_eff);
      Tensor v_pred = jvp_term.defined()
                          ? ops::add(u, ops::scale(jvp_term, s.t - s.r))
                          : u;
      Tensor d = ops::sub(v_pred, target);
      return ops::mean(ops::mul(d, d));
    }
  }
  throw Error("taped_sample_loss: unreachable loss mode");
}

flow::FlowSample draw_sample(const dsp::ComplexSpectrogram& x0,
                             const dsp::ComplexSpectrogram& y,
                             const flow::FlowConfig& fcfg,
                             const flow::ScheduleState& sched,
                             const Rng& sample_rng) {
  Rng t_rng = sample_rng.fork(1);
  Rng span_rng = sample_rng.fork(2);
  Rng noise_rng = sample_rng.fork(3);
  const double t = flow::sample_t(fcfg, t_rng);
  const double r = fcfg.loss_mode == flow::LossMode::dp_imf
                       ? flow::sample_r(t, sched.gamma, sched.rho, span_rng)
                       : t;
  return flow::make_flow_sample(
      x0, y, t, r, fcfg,
      dsp::spectral_noise(x0.bins, x0.frames, fcfg.noise_color, noise_rng));
}

}  // namespace

SampleLossResult sample_loss_value(const model::Model& net,
                                   const dsp::ComplexSpectrogram& x0,
                                   const dsp::ComplexSpectrogram& y,
                                   const flow::FlowConfig& fcfg, double t,
                                   double r,
                                   const dsp::ComplexSpectrogram& eps) {
  const auto s = flow::make_flow_sample(x0, y, t, r, fcfg, eps);
  SampleLossResult out;
  Tensor jterm;
  if (fcfg.loss_mode == flow::LossMode::dp_imf && s.r < s.t)
    jterm = imf_jvp_term(net, s, &out.clamp_events);
  autodiff::Tape tape;
  Tensor loss;
  {
    autodiff::TapeScope scope(tape);
    loss = taped_sample_loss(net, s, fcfg, jterm, &out.clamp_events);
  }
  out.loss = loss.item();
  return out;
}

StepResult train_step(model::Model& net, Adam& opt,
                      const std::vector<SpecPair>& batch,
                      const flow::FlowConfig& fcfg,
                      const flow::ScheduleState& sched, const Rng& step_rng) {
  require(!batch.empty(), "train_step: empty batch");
  auto params = net.trainable_tensors();
  if (!opt.initialized()) opt.init(params);

  StepResult result;
  std::vector<Tensor> grad_sum;
  grad_sum.reserve(params.size());
  for (const auto& p : params) grad_sum.emplace_back(p.shape());

  double loss_sum = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Rng sample_rng = step_rng.fork(static_cast<uint64_t>(i));
    const auto s =
        draw_sample(batch[i].first, batch[i].second, fcfg, sched, sample_rng);

    Tensor jterm;
    if (fcfg.loss_mode == flow::LossMode::dp_imf && s.r < s.t)
      jterm = imf_jvp_term(net, s, &result.clamp_events);

    autodiff::Tape tape;
    Tensor loss;
    {
      autodiff::TapeScope scope(tape);
      loss = taped_sample_loss(net, s, fcfg, jterm, &result.clamp_events);
    }
    const double lv = loss.item();
    if (!std::isfinite(lv)) {
      result.loss = lv;
      result.ok = false;  // abort the step, parameters stay untouched
      return result;
    }
    loss_sum += lv;

    auto grads = tape.gradients(loss, params);
    for (size_t g = 0; g < grad_sum.size(); ++g) {
      auto& acc = grad_sum[g].values();
      const auto& add = grads.grads[g].values();
      for (size_t j = 0; j < acc.size(); ++j) acc[j] += add[j];
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad_sum)
    for (auto& v : g.values()) v *= inv_batch;

  result.loss = loss_sum * inv_batch;
  result.grad_norm = opt.step(params, grad_sum);
  return result;
}

// ---------------------------------------------------------------------------
// metrics + trainer
// ---------------------------------------------------------------------------

std::string metrics_csv_header() {
  return "step,epoch,loss,rho,gamma,lr,wall_ms";
}

std::string metrics_csv_line(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.3f",
                row.step, row.epoch, row.loss, row.rho, row.gamma, row.lr,
                row.wall_ms);
  return buf;
}

Trainer::Trainer(model::Model& net, TrainConfig tcfg, flow::FlowConfig fcfg,
                 dsp::StftConfig stft, BatchProvider provider)
    : net_(net),
      tcfg_(std::move(tcfg)),
      fcfg_(fcfg),
      stft_(stft),
      provider_(std::move(provider)),
      opt_(tcfg_.learning_rate, tcfg_.beta1, tcfg_.beta2, tcfg_.adam_eps,
           tcfg_.grad_clip) {
  tcfg_.validate();
  fcfg_.validate();
  stft_.validate();
}

void Trainer::restore_optimizer(int64_t step_count,
                                std::vector<std::vector<double>> m,
                                std::vector<std::vector<double>> v) {
  opt_.restore(step_count, std::move(m), std::move(v));
}

void Trainer::save(const std::string& path, int next_step) const {
  model::Checkpoint ck;
  ck.model_cfg = net_.config();
  ck.flow_cfg = fcfg_;
  ck.stft_cfg = stft_;
  ck.step = static_cast<uint64_t>(next_step);
  ck.seed = tcfg_.seed;
  ck.params = net_.params();
  if (opt_.initialized()) {
    ck.has_optimizer = true;
    ck.opt_step = opt_.step_count();
    ck.adam_m = opt_.m();
    ck.adam_v = opt_.v();
  }
  model::save_checkpoint(path, ck);
}

std::vector<MetricsRow> Trainer::run(const std::string& metrics_csv,
                                     const std::string& ckpt_path) {
  using Clock = std::chrono::steady_clock;
  const int total = tcfg_.total_steps();
  require(start_step_ >= 0 && start_step_ <= total,
          "Trainer: start step ", start_step_, " outside [0, ", total, "]");

  std::ofstream metrics;
  if (!metrics_csv.empty()) {
    const bool resuming = start_step_ > 0;
    metrics.open(metrics_csv, resuming ? std::ios::app : std::ios::trunc);
    require(metrics.good(), "cannot write metrics file: ", metrics_csv);
    if (!resuming) metrics << metrics_csv_header() << "\n";
  }

  const Rng master(tcfg_.seed);
  std::vector<MetricsRow> rows;
  for (int step = start_step_; step < total; ++step) {
    const int epoch = step / tcfg_.steps_per_epoch;
    const auto sched = flow::ScheduleState::at(epoch, tcfg_.epochs);
    auto batch = provider_(step, tcfg_.batch_size);

    const auto t0 = Clock::now();
    const Rng step_rng = master.fork(0x5354, static_cast<uint64_t>(step));
    auto res = train_step(net_, opt_, batch, fcfg_, sched, step_rng);
    const double wall =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

    if (!res.ok)
      std::fprintf(stderr,
                   "step %d: non-finite loss, update skipped (previous "
                   "parameters kept)\n",
                   step);

    MetricsRow row{step, epoch, res.loss, sched.rho, sched.gamma,
                   tcfg_.learning_rate, wall};
    rows.push_back(row);
    if (metrics.is_open()) metrics << metrics_csv_line(row) << "\n";

    if (!ckpt_path.empty()) {
      const int cadence =
          tcfg_.steps_per_epoch * tcfg_.checkpoint_every_epochs;
      if ((step + 1) % cadence == 0 || step + 1 == total)
        save(ckpt_path, step + 1);
    }
  }
  return rows;
}

BatchProvider synthetic_batch_provider(datagen::DegradationSpec spec,
                                       double duration_s,
                                       dsp::StftConfig stft, uint64_t seed) {
  return [spec, duration_s, stft, seed](int step, int batch_size) {
    std::vector<SpecPair> out(static_cast<size_t>(batch_size));
    const Rng master(seed);
    for (int i = 0; i < batch_size; ++i) {
      const Rng pair_rng =
          master.fork(0xDA7A, static_cast<uint64_t>(step),
                      static_cast<uint64_t>(i));
      auto pair =
          datagen::make_pair(pair_rng, spec, duration_s, stft.sample_rate);
      out[static_cast<size_t>(i)] = {
          dsp::compress(dsp::stft(pair.x0, stft), stft.compression),
          dsp::compress(dsp::stft(pair.y, stft), stft.compression)};
    }
    return out;
  };
}

}  // namespace flowsr::train
