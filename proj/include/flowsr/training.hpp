// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_TRAINING_HPP
#define FLOWSR_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "flowsr/datagen.hpp"
#include "flowsr/flowcore.hpp"
#include "flowsr/model.hpp"
#include "flowsr/rng.hpp"

namespace flowsr::train {

struct TrainConfig {
  int epochs = 10;
  int steps_per_epoch = 50;
  int batch_size = 4;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  double clip_seconds = 1.5;  // fixed-length training clips
  uint64_t seed = 1;
  int checkpoint_every_epochs = 1;

  int total_steps() const { return epochs * steps_per_epoch; }
  void validate() const;
};

// Adaptive moment estimation with global-norm gradient clipping.
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps, double clip);

  void init(const std::vector<Tensor>& params);
  bool initialized() const { return !m_.empty(); }
  // applies one update in place; returns the pre-clip gradient norm
  double step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);

  int64_t step_count() const { return step_count_; }
  const std::vector<std::vector<double>>& m() const { return m_; }
  const std::vector<std::vector<double>>& v() const { return v_; }
  void restore(int64_t step_count, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, clip_ = 1.0;
  int64_t step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

using SpecPair = std::pair<dsp::ComplexSpectrogram, dsp::ComplexSpectrogram>;

struct StepResult {
  double loss = 0.0;
  bool ok = true;          // false: non-finite loss, update skipped
  int clamp_events = 0;    // time-floor clamps in conversions
  double grad_norm = 0.0;
};

// One optimization step over a batch of (x0, y) compressed spectrogram
// pairs. Per-sample randomness comes from rng.fork(sample_index, ...), so
// results do not depend on evaluation order.
StepResult train_step(model::Model& net, Adam& opt,
                      const std::vector<SpecPair>& batch,
                      const flow::FlowConfig& fcfg,
                      const flow::ScheduleState& sched, const Rng& step_rng);

// Per-sample loss through the autodiff path without touching parameters;
// used by tests to compare against the plain-math references bit for bit.
struct SampleLossResult {
  double loss = 0.0;
  int clamp_events = 0;
};
SampleLossResult sample_loss_value(const model::Model& net,
                                   const dsp::ComplexSpectrogram& x0,
                                   const dsp::ComplexSpectrogram& y,
                                   const flow::FlowConfig& fcfg, double t,
                                   double r,
                                   const dsp::ComplexSpectrogram& eps);

struct MetricsRow {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;
  double rho = 0.0;
  double gamma = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);

using BatchProvider =
    std::function<std::vector<SpecPair>(int step, int batch_size)>;

// Binds model, optimizer, schedules and data into the optimization loop.
class Trainer {
 public:
  Trainer(model::Model& net, TrainConfig tcfg, flow::FlowConfig fcfg,
          dsp::StftConfig stft, BatchProvider provider);

  // Resume support: continue from a checkpoint's step/optimizer state.
  void restore_optimizer(int64_t step_count,
                         std::vector<std::vector<double>> m,
                         std::vector<std::vector<double>> v);
  void set_start_step(int step) { start_step_ = step; }

  // Runs steps [start, total); writes metrics rows (and checkpoints when
  // ckpt_path is non-empty) as it goes. Returns all rows produced.
  std::vector<MetricsRow> run(const std::string& metrics_csv,
                              const std::string& ckpt_path);

  Adam& optimizer() { return opt_; }
  model::Model& net() { return net_; }

 private:
  void save(const std::string& path, int next_step) const;

  model::Model& net_;
  TrainConfig tcfg_;
  flow::FlowConfig fcfg_;
  dsp::StftConfig stft_;
  BatchProvider provider_;
  Adam opt_;
  int start_step_ = 0;
};

// On-the-fly (x0, y) pairs: synthetic speech through the degradation
// cascade, STFT'd and compressed. Streams are forked per (step, index), so
// resumed runs see identical batches.
BatchProvider synthetic_batch_provider(datagen::DegradationSpec spec,
                                       double duration_s,
                                       dsp::StftConfig stft, uint64_t seed);

}  // namespace flowsr::train

#endif  // FLOWSR_TRAINING_HPP
