// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_CONFIG_HPP
#define FLOWSR_CONFIG_HPP

#include <cstdint>
#include <string>

#include "flowsr/datagen.hpp"
#include "flowsr/dsp.hpp"
#include "flowsr/flowcore.hpp"
#include "flowsr/model.hpp"
#include "flowsr/sampler.hpp"
#include "flowsr/training.hpp"

namespace flowsr::config {

// One human-readable JSON file drives every command. Unknown keys are
// rejected so typos fail loudly.
struct ExperimentConfig {
  uint64_t seed = 1;
  dsp::StftConfig stft;
  flow::FlowConfig flow;
  model::ModelConfig model;
  train::TrainConfig train;
  sampler::SamplerConfig sampler;
  datagen::DegradationSpec degradation;

  void validate() const;
};

std::string to_json_text(const ExperimentConfig& cfg);
ExperimentConfig from_json_text(const std::string& text);

ExperimentConfig load_file(const std::string& path);
void save_file(const std::string& path, const ExperimentConfig& cfg);

// --set style override: "train.epochs=20", "flow.loss_mode=dp-imf",
// "model.channels=[4,4,8,8,8]"
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Checkpoint metadata block (model/flow/stft configs + step + seed) as a
// self-contained JSON string.
std::string checkpoint_meta_to_text(const model::ModelConfig& mcfg,
                                    const flow::FlowConfig& fcfg,
                                    const dsp::StftConfig& stft,
                                    uint64_t step, uint64_t seed);
void checkpoint_meta_from_text(const std::string& text,
                               model::ModelConfig* mcfg,
                               flow::FlowConfig* fcfg, dsp::StftConfig* stft,
                               uint64_t* step, uint64_t* seed);

}  // namespace flowsr::config

#endif  // FLOWSR_CONFIG_HPP
