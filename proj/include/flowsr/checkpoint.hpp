// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_CHECKPOINT_HPP
#define FLOWSR_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "flowsr/flowcore.hpp"
#include "flowsr/model.hpp"

namespace flowsr::model {

// Versioned container: magic "RMFS", u32 version, length-prefixed config
// text, a (name, shape, offset) manifest, and raw little-endian f32
// parameter blobs. A trailing section carries exact f64 parameters and
// optimizer moments so an interrupted run resumes on the same loss trace.
struct Checkpoint {
  ModelConfig model_cfg;
  flow::FlowConfig flow_cfg;
  dsp::StftConfig stft_cfg;
  uint64_t step = 0;
  uint64_t seed = 0;
  std::vector<Param> params;

  bool has_optimizer = false;
  int64_t opt_step = 0;
  std::vector<std::vector<double>> adam_m;
  std::vector<std::vector<double>> adam_v;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace flowsr::model

#endif  // FLOWSR_CHECKPOINT_HPP
